"""Verb-pair binary classification: the training task that writes class
knowledge into the verb adapters.

Each (positive or negative) pair is fed as ``[CLS] verb1 [SEP] verb2 [SEP]``;
the last layer's [CLS] state goes through a linear softmax classifier and
the adapters + classifier are trained with cross-entropy while the host
encoder stays frozen.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import torch
import torch.nn as nn
import torch.nn.functional as F

from .embeddings import EmbeddingSpace
from .encoder import AdapterStack, WordPieceTokenizer
from .lexicon import ConstraintSet, VerbPair
from .sampling import SamplingConfig, TrainingBatch, epoch_batches

logger = logging.getLogger(__name__)


class TrainingError(Exception):
    pass


@dataclass
class VerbTrainConfig:
    epochs: int = 30
    learning_rate: float = 1e-4
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    seed: int = 0
    patience: int | None = None
    validation_fraction: float = 0.1
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8


class PairClassifier(nn.Module):
    """Linear softmax head over the [CLS] state: h -> 2 logits."""

    def __init__(self, hidden: int, seed: int = 0):
        super().__init__()
        self.linear = nn.Linear(hidden, 2)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            self.linear.weight.normal_(0.0, 0.02, generator=gen)
            self.linear.bias.zero_()

    def forward(self, cls_state: torch.Tensor) -> torch.Tensor:
        return self.linear(cls_state)


def encode_pair(pair: VerbPair, tokenizer: WordPieceTokenizer, max_len: int = 128) -> list[int]:
    """[CLS] pieces(first) [SEP] pieces(second) [SEP], truncated to max_len."""
    if not pair.first or not pair.second:
        raise TrainingError(f"empty lemma in pair ({pair.first!r}, {pair.second!r})")
    ids = (
        [tokenizer.cls_id]
        + tokenizer.encode_word(pair.first)
        + [tokenizer.sep_id]
        + tokenizer.encode_word(pair.second)
        + [tokenizer.sep_id]
    )
    if len(ids) > max_len:
        logger.warning("pair (%s, %s) encodes to %d tokens; truncated to %d",
                       pair.first, pair.second, len(ids), max_len)
        ids = ids[:max_len]
    return ids


def _pad_batch(sequences: list[list[int]], pad_id: int) -> tuple[torch.Tensor, torch.Tensor]:
    T = max(len(s) for s in sequences)
    ids = torch.full((len(sequences), T), pad_id, dtype=torch.long)
    mask = torch.zeros((len(sequences), T), dtype=torch.long)
    for i, s in enumerate(sequences):
        ids[i, : len(s)] = torch.tensor(s, dtype=torch.long)
        mask[i, : len(s)] = 1
    return ids, mask


def pair_logits(stack: AdapterStack, head: PairClassifier, pairs: list[VerbPair]) -> torch.Tensor:
    tok = stack.encoder.tokenizer
    seqs = [encode_pair(p, tok, stack.encoder.cfg.max_len) for p in pairs]
    ids, mask = _pad_batch(seqs, tok.pad_id)
    hidden = stack(ids, mask)
    return head(hidden[:, 0, :])


def classify_pair(stack: AdapterStack, head: PairClassifier, pair: VerbPair) -> tuple[float, float]:
    """(p_negative, p_positive) from the last-layer [CLS] state."""
    with torch.no_grad():
        probs = torch.softmax(pair_logits(stack, head, [pair]), dim=-1)[0]
    return float(probs[0]), float(probs[1])


def batch_loss(stack: AdapterStack, head: PairClassifier, batch: TrainingBatch) -> torch.Tensor:
    pairs = [p for p, _ in batch.instances]
    labels = torch.tensor([lbl for _, lbl in batch.instances], dtype=torch.long)
    logits = pair_logits(stack, head, pairs)
    return F.cross_entropy(logits, labels)


def split_constraints(constraints: ConstraintSet, fraction: float, seed: int) -> tuple[ConstraintSet, ConstraintSet]:
    """Deterministic train/validation split of positive pairs."""
    import numpy as np

    ordered = constraints.sorted_pairs()
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(len(ordered))
    n_val = int(round(fraction * len(ordered)))
    val = {ordered[int(i)] for i in perm[:n_val]}
    train = {ordered[int(i)] for i in perm[n_val:]}
    return (ConstraintSet(train, source=constraints.source),
            ConstraintSet(val, source=constraints.source))


def train_verb_adapter(
    stack: AdapterStack,
    constraints: ConstraintSet,
    space: EmbeddingSpace,
    cfg: VerbTrainConfig,
) -> tuple[PairClassifier, list[dict]]:
    """Train verb adapters + pair classifier; encoder stays frozen.

    Returns the trained classifier head and a per-epoch log of
    ``{"epoch", "loss", "val_loss"}`` rows. Raises on NaN/Inf loss.
    """
    if stack.verb_adapters is None:
        raise TrainingError("stack has no verb adapters; call insert_adapters first")
    if len(constraints) < cfg.sampling.batch_positives:
        raise TrainingError(
            f"{len(constraints)} positive constraints < batch size {cfg.sampling.batch_positives}"
        )
    torch.manual_seed(cfg.seed)
    for p in stack.encoder.parameters():
        p.requires_grad_(False)
    for p in stack.verb_adapters.parameters():
        p.requires_grad_(True)

    head = PairClassifier(stack.hidden, seed=cfg.seed)
    params = list(stack.verb_adapters.parameters()) + list(head.parameters())
    opt = torch.optim.Adam(params, lr=cfg.learning_rate, betas=cfg.adam_betas, eps=cfg.adam_eps)

    train_set, val_set = constraints, None
    if cfg.patience is not None:
        train_set, val_set = split_constraints(constraints, cfg.validation_fraction, cfg.seed)

    sampling = replace(cfg.sampling, seed=cfg.seed)
    log: list[dict] = []
    best_val, bad_epochs = float("inf"), 0
    for epoch in range(cfg.epochs):
        total, n = 0.0, 0
        for batch in epoch_batches(train_set, space, sampling, epoch, global_positives=constraints):
            opt.zero_grad()
            loss = batch_loss(stack, head, batch)
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss.item()} at epoch {epoch}")
            loss.backward()
            opt.step()
            total += float(loss.detach())
            n += 1
        row = {"epoch": epoch, "loss": total / max(n, 1), "val_loss": None}
        if val_set is not None and len(val_set) >= sampling.batch_positives:
            with torch.no_grad():
                vtotal, vn = 0.0, 0
                for batch in epoch_batches(val_set, space, sampling, epoch, global_positives=constraints):
                    vtotal += float(batch_loss(stack, head, batch))
                    vn += 1
            row["val_loss"] = vtotal / max(vn, 1)
            if row["val_loss"] < best_val - 1e-6:
                best_val, bad_epochs = row["val_loss"], 0
            else:
                bad_epochs += 1
        log.append(row)
        logger.info("verb-adapter epoch %d: loss=%.4f val=%s", epoch, row["loss"], row["val_loss"])
        if cfg.patience is not None and bad_epochs >= cfg.patience:
            logger.info("early stopping at epoch %d (patience %d)", epoch, cfg.patience)
            break
    return head, log


def write_training_log(path, log: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "loss", "val_loss"])
        writer.writeheader()
        writer.writerows(log)


def pair_accuracy(stack: AdapterStack, head: PairClassifier, pairs: list[VerbPair], labels: list[int]) -> float:
    """Fraction of pairs whose argmax prediction matches the label."""
    correct = 0
    with torch.no_grad():
        for start in range(0, len(pairs), 64):
            chunk = pairs[start : start + 64]
            logits = pair_logits(stack, head, chunk)
            preds = logits.argmax(dim=-1)
            for p, lbl in zip(preds, labels[start : start + 64]):
                correct += int(p) == lbl
    return correct / max(len(pairs), 1)
