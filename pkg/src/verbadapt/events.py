"""Downstream event extraction: token-level trigger classification and
BIO sequence labeling for triggers and arguments, under the FFT/TA/2TA
fine-tuning regimes.

Subword alignment predicts on the first subword of each word; remaining
subwords are masked from loss and evaluation. The argument pass runs once
per trigger, marking the trigger's tokens with a learned indicator added to
the encoder output (gold triggers in training, predicted at test time).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from .crf import CrfLayer, build_bio_transition_mask
from .encoder import AdapterStack, set_freezing
from .metrics import EventAnnotation, ace_span_f1, token_f1
from .pair_task import _pad_batch

logger = logging.getLogger(__name__)

TEMPEVAL_TYPES = ["OCCURRENCE", "STATE", "REPORTING", "I-ACTION", "I-STATE", "ASPECTUAL", "PERCEPTION"]

# eight time-related ACE argument roles conflated into a single Time role
TIME_ROLES = frozenset({
    "Time-Within", "Time-Starting", "Time-Ending", "Time-Before",
    "Time-After", "Time-Holds", "Time-At-Beginning", "Time-At-End",
})


class EventDataError(Exception):
    pass


def conflate_role(role: str) -> str:
    return "Time" if role in TIME_ROLES else role


@dataclass
class Sentence:
    tokens: list[str]
    labels: list[str]
    events: list[EventAnnotation] = field(default_factory=list)


@dataclass
class EventDataset:
    """Documents of labeled sentences; task is 'tempeval-trigger' or 'ace-sequence'."""

    documents: list[list[Sentence]]
    task: str
    label_inventory: list[str]
    language: str = "en"
    split: str = "train"

    def sentences(self) -> list[Sentence]:
        return [s for doc in self.documents for s in doc]

    def token_count(self) -> int:
        return sum(len(s.tokens) for s in self.sentences())


def _infer_inventory(documents: list[list[Sentence]], task: str) -> list[str]:
    labels = sorted({lbl for doc in documents for s in doc for lbl in s.labels if lbl != "O"})
    if task == "ace-sequence":
        extra = sorted({f"{tag[:2]}{conflate_role(role)}"
                        for doc in documents for s in doc for e in s.events
                        for (_, role) in e.arguments for tag in ("B-", "I-")})
        labels = sorted(set(labels) | set(extra))
    return ["O"] + labels


def load_conll(path, task: str, language: str = "en", split: str = "train") -> EventDataset:
    """Read CoNLL-style event data.

    tempeval-trigger: two columns ``token<TAB>label``. ace-sequence: three
    columns ``token<TAB>trigger_bio<TAB>argument_bio`` where the argument
    column is BIO over ``role:trigger_index`` (index into the sentence's
    triggers, in order of appearance); ``_`` means no argument. Blank lines
    separate sentences, ``-DOCSTART-`` lines separate documents.
    """
    documents: list[list[Sentence]] = []
    doc: list[Sentence] = []
    rows: list[list[str]] = []

    def flush_sentence():
        nonlocal rows
        if rows:
            doc.append(_rows_to_sentence(rows, task, path))
            rows = []

    def flush_doc():
        nonlocal doc
        flush_sentence()
        if doc:
            documents.append(doc)
            doc = []

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                flush_sentence()
                continue
            if line.startswith("-DOCSTART-"):
                flush_doc()
                continue
            cols = line.split("\t")
            expected = 2 if task == "tempeval-trigger" else 3
            if len(cols) != expected:
                raise EventDataError(f"{path}:{lineno}: expected {expected} columns, got {len(cols)}")
            rows.append(cols)
    flush_doc()
    if not documents:
        raise EventDataError(f"{path}: no sentences found")
    inventory = _infer_inventory(documents, task)
    return EventDataset(documents=documents, task=task, label_inventory=inventory,
                        language=language, split=split)


def _rows_to_sentence(rows: list[list[str]], task: str, path) -> Sentence:
    tokens = [r[0] for r in rows]
    labels = [r[1] for r in rows]
    if task == "tempeval-trigger":
        return Sentence(tokens=tokens, labels=labels)
    events = _decode_ace_rows(rows)
    return Sentence(tokens=tokens, labels=labels, events=events)


def _decode_ace_rows(rows: list[list[str]]) -> list[EventAnnotation]:
    trigger_spans = decode_bio_spans([r[1] for r in rows])
    args_by_trigger: dict[int, list[tuple[tuple[int, int], str]]] = {}
    current: tuple[int, str, int] | None = None  # (start, role, trigger_idx)
    for i, r in enumerate(rows + [["", "O", "_"]]):
        tag = r[2] if len(r) > 2 else "_"
        starts_new = tag.startswith("B-")
        continues = tag.startswith("I-")
        if current is not None and not continues:
            start, role, tidx = current
            args_by_trigger.setdefault(tidx, []).append(((start, i), conflate_role(role)))
            current = None
        if starts_new:
            body = tag[2:]
            role, _, tidx = body.rpartition(":")
            current = (i, role, int(tidx))
    events = []
    for tidx, (span, ttype) in enumerate(trigger_spans):
        events.append(EventAnnotation(trigger_span=span, trigger_type=ttype,
                                      arguments=tuple(args_by_trigger.get(tidx, []))))
    return events


def decode_bio_spans(tags: list[str]) -> list[tuple[tuple[int, int], str]]:
    """(span, type) list from a BIO tag sequence; stray I- tags open a new span."""
    spans = []
    start, typ = None, None
    for i, tag in enumerate(tags + ["O"]):
        if tag.startswith("I-") and typ == tag[2:]:
            continue
        if start is not None:
            spans.append(((start, i), typ))
            start, typ = None, None
        if tag.startswith("B-") or tag.startswith("I-"):
            start, typ = i, tag[2:]
    return spans


def encode_sentence(tokens: list[str], tokenizer, max_len: int) -> tuple[list[int], list[int]]:
    """Token ids with [CLS]/[SEP] plus first-subword positions per word (-1 if truncated away)."""
    ids = [tokenizer.cls_id]
    first = []
    truncated = False
    for tok in tokens:
        pieces = tokenizer.encode_word(tok)
        if len(ids) + len(pieces) + 1 > max_len:
            truncated = True
            first.append(-1)
            continue
        first.append(len(ids))
        ids.extend(pieces)
    ids.append(tokenizer.sep_id)
    if truncated:
        logger.warning("sentence of %d words truncated to %d subword slots", len(tokens), max_len)
    return ids, first


class TokenClassificationHead(nn.Module):
    """Single-layer softmax regression over per-token hidden states."""

    def __init__(self, hidden: int, n_labels: int, seed: int = 0):
        super().__init__()
        self.linear = nn.Linear(hidden, n_labels)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            self.linear.weight.normal_(0.0, 0.02, generator=gen)
            self.linear.bias.zero_()

    def forward(self, hidden_states: torch.Tensor) -> torch.Tensor:
        return self.linear(hidden_states)


def token_head_forward(stack: AdapterStack, head: TokenClassificationHead,
                       tokens: list[str]) -> torch.Tensor:
    """Per-word label distributions (first-subword alignment), rows sum to 1."""
    tok = stack.encoder.tokenizer
    ids, first = encode_sentence(tokens, tok, stack.encoder.cfg.max_len)
    x, mask = _pad_batch([ids], tok.pad_id)
    hidden = stack(x, mask)[0]
    positions = [p if p >= 0 else 0 for p in first]
    logits = head(hidden[positions])
    return torch.softmax(logits, dim=-1)


class CrfSequenceHead(nn.Module):
    """Emission projection + CRF over BIO tags; optional trigger-position marker."""

    def __init__(self, hidden: int, tags: list[str], bio_mask: bool = True,
                 with_trigger_marker: bool = False, seed: int = 0):
        super().__init__()
        self.tags = list(tags)
        self.tag_index = {t: i for i, t in enumerate(self.tags)}
        self.emission = nn.Linear(hidden, len(tags))
        mask = build_bio_transition_mask(self.tags) if bio_mask else None
        self.crf = CrfLayer(len(tags), mask=mask, seed=seed)
        self.trigger_marker = nn.Embedding(2, hidden) if with_trigger_marker else None
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            self.emission.weight.normal_(0.0, 0.02, generator=gen)
            self.emission.bias.zero_()
            if self.trigger_marker is not None:
                self.trigger_marker.weight.normal_(0.0, 0.1, generator=gen)

    def emissions(self, stack: AdapterStack, tokens: list[str],
                  trigger_span: tuple[int, int] | None = None) -> torch.Tensor:
        tok = stack.encoder.tokenizer
        ids, first = encode_sentence(tokens, tok, stack.encoder.cfg.max_len)
        x, mask = _pad_batch([ids], tok.pad_id)
        hidden = stack(x, mask)[0]
        positions = [p if p >= 0 else 0 for p in first]
        word_states = hidden[positions]
        if self.trigger_marker is not None:
            marks = torch.zeros(len(tokens), dtype=torch.long)
            if trigger_span is not None:
                marks[trigger_span[0] : trigger_span[1]] = 1
            word_states = word_states + self.trigger_marker(marks)
        return self.emission(word_states)

    def decode(self, stack: AdapterStack, tokens: list[str],
               trigger_span: tuple[int, int] | None = None) -> list[str]:
        with torch.no_grad():
            em = self.emissions(stack, tokens, trigger_span)
            path, _ = self.crf.viterbi(em)
        return [self.tags[i] for i in path]


@dataclass
class EventTrainConfig:
    epochs: int = 10
    learning_rate: float = 1e-4
    batch_size: int = 32
    seed: int = 0
    # ACE grid search: (learning_rate, epochs) candidates; None = no search
    grid: list[tuple[float, int]] | None = None


REGIME_ALIASES = {"fft": "FFT", "ta": "TA", "2ta": "2TA"}
ADAPTER_SOURCES = ("FN", "VN", "Random", "None")


def _trainable_params(stack: AdapterStack, head: nn.Module, regime: str) -> list[nn.Parameter]:
    set_freezing(stack, regime)
    params = [p for p in stack.parameters() if p.requires_grad]
    params += list(head.parameters())
    return params


def finetune_token_classifier(
    stack: AdapterStack,
    train: EventDataset,
    test: EventDataset,
    regime: str,
    cfg: EventTrainConfig,
) -> tuple[TokenClassificationHead, tuple[float, float, float]]:
    """TempEval-style token classification; returns head and test (P, R, F1)."""
    labels = train.label_inventory
    lindex = {l: i for i, l in enumerate(labels)}
    head = TokenClassificationHead(stack.hidden, len(labels), seed=cfg.seed)
    params = _trainable_params(stack, head, regime)
    opt = torch.optim.Adam(params, lr=cfg.learning_rate)
    torch.manual_seed(cfg.seed)
    tok = stack.encoder.tokenizer
    max_len = stack.encoder.cfg.max_len

    sentences = train.sentences()
    gen = torch.Generator().manual_seed(cfg.seed)
    for epoch in range(cfg.epochs):
        order = torch.randperm(len(sentences), generator=gen).tolist()
        for start in range(0, len(sentences), cfg.batch_size):
            batch = [sentences[i] for i in order[start : start + cfg.batch_size]]
            seqs, firsts = [], []
            for s in batch:
                ids, first = encode_sentence(s.tokens, tok, max_len)
                seqs.append(ids)
                firsts.append(first)
            x, mask = _pad_batch(seqs, tok.pad_id)
            hidden = stack(x, mask)
            logits_list, target_list = [], []
            for bi, (s, first) in enumerate(zip(batch, firsts)):
                pos = [p for p in first if p >= 0]
                lbls = [lindex[l] for p, l in zip(first, s.labels) if p >= 0]
                logits_list.append(head(hidden[bi, pos]))
                target_list.extend(lbls)
            loss = F.cross_entropy(torch.cat(logits_list), torch.tensor(target_list))
            opt.zero_grad()
            loss.backward()
            opt.step()

    pred_all, gold_all = [], []
    with torch.no_grad():
        for s in test.sentences():
            dist = token_head_forward(stack, head, s.tokens)
            pred_all.extend(labels[int(i)] for i in dist.argmax(dim=-1))
            gold_all.extend(s.labels)
    return head, token_f1(pred_all, gold_all)


def finetune_event_model(
    stack_factory,
    train: EventDataset,
    test: EventDataset,
    regime: str,
    adapter_source: str,
    cfg: EventTrainConfig,
    dev: EventDataset | None = None,
) -> dict[str, tuple[float, float, float]]:
    """Dispatch one fine-tuning run by task; returns per-subtask (P, R, F1).

    ``stack_factory()`` must build the stack matching ``adapter_source``
    (trained VN/FN adapters, a random adapter, or no verb slot for 'None').
    """
    regime = REGIME_ALIASES.get(regime, regime)
    if adapter_source not in ADAPTER_SOURCES:
        raise EventDataError(f"unknown adapter source {adapter_source!r}; expected one of {ADAPTER_SOURCES}")
    if train.task != test.task:
        raise EventDataError(f"task mismatch: train={train.task}, test={test.task}")
    if train.task == "tempeval-trigger":
        _, prf = finetune_token_classifier(stack_factory(), train, test, regime, cfg)
        return {"T-ident&class": prf}
    if train.task == "ace-sequence":
        return finetune_ace_model(stack_factory, train, test, regime, cfg, dev=dev)
    raise EventDataError(f"unknown task {train.task!r}")


def finetune_ace_model(
    stack_factory,
    train: EventDataset,
    test: EventDataset,
    regime: str,
    cfg: EventTrainConfig,
    dev: EventDataset | None = None,
) -> dict[str, tuple[float, float, float]]:
    """Two-pass ACE sequence labeling: triggers, then arguments per trigger.

    ``stack_factory()`` builds a fresh adapter stack (grid search retrains
    from scratch per configuration). Returns P/R/F1 per subtask.
    """
    grid = cfg.grid or [(cfg.learning_rate, cfg.epochs)]
    best_score, best_result = float("-inf"), None
    for lr, epochs in grid:
        run_cfg = EventTrainConfig(epochs=epochs, learning_rate=lr,
                                   batch_size=cfg.batch_size, seed=cfg.seed)
        stack = stack_factory()
        result, final_loss = _train_ace_once(stack, train, test if dev is None else dev, run_cfg, regime)
        select = result["T-class"][2] if dev is not None else -final_loss
        logger.info("ACE grid lr=%g epochs=%d: selection score %.4f", lr, epochs, select)
        if select > best_score:
            best_score = select
            if dev is not None:
                stack_final = stack_factory()
                result, _ = _train_ace_once(stack_final, train, test, run_cfg, regime)
            best_result = result
    return best_result


def _train_ace_once(stack, train: EventDataset, test: EventDataset,
                    cfg: EventTrainConfig, regime: str):
    trig_types = sorted({e.trigger_type for s in train.sentences() for e in s.events})
    roles = sorted({r for s in train.sentences() for e in s.events for _, r in e.arguments})
    trig_tags = ["O"] + [f"{p}{t}" for t in trig_types for p in ("B-", "I-")]
    arg_tags = ["O"] + [f"{p}{r}" for r in roles for p in ("B-", "I-")]

    trig_head = CrfSequenceHead(stack.hidden, trig_tags, seed=cfg.seed)
    arg_head = CrfSequenceHead(stack.hidden, arg_tags, with_trigger_marker=True, seed=cfg.seed + 1)
    set_freezing(stack, regime)
    params = [p for p in stack.parameters() if p.requires_grad]
    params += list(trig_head.parameters()) + list(arg_head.parameters())
    opt = torch.optim.Adam(params, lr=cfg.learning_rate)
    torch.manual_seed(cfg.seed)

    sentences = train.sentences()
    gen = torch.Generator().manual_seed(cfg.seed)
    final_loss = 0.0
    for epoch in range(cfg.epochs):
        order = torch.randperm(len(sentences), generator=gen).tolist()
        total, n = 0.0, 0
        for start in range(0, len(sentences), cfg.batch_size):
            batch = [sentences[i] for i in order[start : start + cfg.batch_size]]
            loss = torch.zeros(())
            for s in batch:
                tgold = _sentence_trigger_tags(s, trig_head.tag_index)
                em = trig_head.emissions(stack, s.tokens)
                loss = loss - trig_head.crf.log_likelihood(em, tgold)
                for e in s.events:  # gold triggers condition the argument pass in training
                    agold = _sentence_arg_tags(s, e, arg_head.tag_index)
                    em_a = arg_head.emissions(stack, s.tokens, trigger_span=e.trigger_span)
                    loss = loss - arg_head.crf.log_likelihood(em_a, agold)
            loss = loss / max(len(batch), 1)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.detach())
            n += 1
        final_loss = total / max(n, 1)

    pred_docs, gold_docs = [], []
    for doc in test.documents:
        for s in doc:
            events = []
            ttags = trig_head.decode(stack, s.tokens)
            for span, ttype in decode_bio_spans(ttags):  # predicted triggers at test time
                atags = arg_head.decode(stack, s.tokens, trigger_span=span)
                args = tuple((aspan, role) for aspan, role in decode_bio_spans(atags))
                events.append(EventAnnotation(trigger_span=span, trigger_type=ttype, arguments=args))
            pred_docs.append(events)
            gold_docs.append(list(s.events))
    result = {sub: ace_span_f1(pred_docs, gold_docs, sub)
              for sub in ("T-ident", "T-class", "ARG-ident", "ARG-class")}
    return result, final_loss


def _sentence_trigger_tags(s: Sentence, index: dict[str, int]) -> list[int]:
    tags = ["O"] * len(s.tokens)
    for e in s.events:
        a, b = e.trigger_span
        tags[a] = f"B-{e.trigger_type}"
        for i in range(a + 1, b):
            tags[i] = f"I-{e.trigger_type}"
    return [index[t] for t in tags]


def _sentence_arg_tags(s: Sentence, event: EventAnnotation, index: dict[str, int]) -> list[int]:
    tags = ["O"] * len(s.tokens)
    for (a, b), role in event.arguments:
        tags[a] = f"B-{role}"
        for i in range(a + 1, b):
            tags[i] = f"I-{role}"
    return [index[t] for t in tags]
