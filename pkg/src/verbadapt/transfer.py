"""Cross-lingual constraint transfer: nearest-neighbour translation through a
shared aligned embedding space, noise filtering with a specialization tensor
model (STM), and target-language adapter retraining (the VTRANS pipeline)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .embeddings import EmbeddingSpace, csls_nearest_neighbor, nearest_neighbor
from .lexicon import ConstraintSet, VerbPair
from .sampling import SamplingConfig, epoch_batches

logger = logging.getLogger(__name__)


class TransferError(Exception):
    pass


@dataclass
class AlignedSpacePair:
    """Source and target spaces already mapped into one coordinate system."""

    source: EmbeddingSpace
    target: EmbeddingSpace

    def __post_init__(self):
        if self.source.d != self.target.d:
            raise TransferError(f"dimension mismatch: source d={self.source.d}, target d={self.target.d}")
        if self.source.alignment_tag != self.target.alignment_tag:
            raise TransferError("source and target spaces carry different alignment tags")


@dataclass
class TranslationReport:
    kept: int = 0
    dropped_oov: int = 0
    dropped_identical: int = 0
    duplicates_merged: int = 0


def translate_pairs(
    constraints: ConstraintSet,
    spaces: AlignedSpacePair,
    retrieval: str = "cosine",
) -> tuple[ConstraintSet, TranslationReport]:
    """Map each verb to its nearest target-vocabulary word; drop OOV and
    identical-member pairs; deduplicate under canonical order."""
    if len(spaces.source) == 0 or len(spaces.target) == 0:
        raise TransferError("empty embedding space")
    if retrieval not in ("cosine", "csls"):
        raise TransferError(f"unknown retrieval criterion {retrieval!r}")
    report = TranslationReport()
    cache: dict[str, str] = {}

    def translate(word: str) -> str | None:
        if word not in cache:
            if word not in spaces.source:
                return None
            vec = spaces.source.vector(word)
            cache[word] = (nearest_neighbor(vec, spaces.target) if retrieval == "cosine"
                           else csls_nearest_neighbor(vec, spaces.target))
        return cache[word]

    out: set[VerbPair] = set()
    for pair in constraints.sorted_pairs():
        a, b = translate(pair.first), translate(pair.second)
        if a is None or b is None:
            report.dropped_oov += 1
            continue
        if a == b:
            report.dropped_identical += 1
            continue
        cand = VerbPair(a, b).canonical()
        if cand in out:
            report.duplicates_merged += 1
        else:
            out.add(cand)
    report.kept = len(out)
    if not out:
        raise TransferError("no translatable pairs: every pair was dropped")
    return ConstraintSet(out, source=f"{constraints.source}->vtrans:{spaces.target.language}"), report


class StmModel(nn.Module):
    """Multi-slice pair scorer: per slice k, tanh projections of the two word
    vectors; their dot products form a K-dim feature fed to a 2-class softmax."""

    def __init__(self, d: int, slices: int = 5, specialized_dim: int = 300, seed: int = 0):
        super().__init__()
        self.d = d
        self.slices = slices
        self.specialized_dim = specialized_dim
        self.left = nn.Parameter(torch.empty(slices, specialized_dim, d))
        self.right = nn.Parameter(torch.empty(slices, specialized_dim, d))
        self.classifier = nn.Linear(slices, 2)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            self.left.normal_(0.0, 1.0 / np.sqrt(d), generator=gen)
            self.right.normal_(0.0, 1.0 / np.sqrt(d), generator=gen)
            self.classifier.weight.normal_(0.0, 0.1, generator=gen)
            self.classifier.bias.zero_()

    def features(self, x_left: torch.Tensor, x_right: torch.Tensor) -> torch.Tensor:
        u = torch.tanh(torch.einsum("khd,nd->nkh", self.left, x_left))
        v = torch.tanh(torch.einsum("khd,nd->nkh", self.right, x_right))
        return (u * v).sum(dim=-1)

    def forward(self, x_left: torch.Tensor, x_right: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.features(x_left, x_right))

    def predict_positive(self, x_left: np.ndarray, x_right: np.ndarray) -> bool:
        with torch.no_grad():
            logits = self(torch.as_tensor(x_left, dtype=torch.float32)[None],
                          torch.as_tensor(x_right, dtype=torch.float32)[None])
        return int(logits.argmax(dim=-1)) == 1

    @classmethod
    def constant(cls, d: int, positive: bool) -> "StmModel":
        """Hard-wired always-positive / always-negative model (test scaffolding)."""
        model = cls(d, slices=1, specialized_dim=1, seed=0)
        with torch.no_grad():
            model.left.zero_()
            model.right.zero_()
            model.classifier.weight.zero_()
            model.classifier.bias.copy_(torch.tensor([0.0, 1.0] if positive else [1.0, 0.0]))
        return model


def save_stm(path, model: StmModel) -> None:
    torch.save({"meta": {"d": model.d, "slices": model.slices,
                         "specialized_dim": model.specialized_dim},
                "state": model.state_dict()}, path)


def load_stm(path) -> StmModel:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    meta = blob["meta"]
    model = StmModel(meta["d"], slices=meta["slices"], specialized_dim=meta["specialized_dim"])
    model.load_state_dict(blob["state"])
    return model


@dataclass
class StmTrainConfig:
    slices: int = 5
    specialized_dim: int = 300
    learning_rate: float = 1e-4
    batch_size: int = 32
    iterations: int = 10
    sampling_k: int = 2
    sampling_scheme: str = "cc"
    seed: int = 0


def train_stm(
    constraints: ConstraintSet,
    space: EmbeddingSpace,
    cfg: StmTrainConfig = StmTrainConfig(),
) -> tuple[StmModel, dict]:
    """Train the STM to separate same-class pairs from controlled negatives.

    Pairs with out-of-space members are dropped (counted). Returns the model
    and a stats dict with final training accuracy.
    """
    in_space = {p for p in constraints.pairs if p.first in space and p.second in space}
    dropped = len(constraints) - len(in_space)
    if not in_space:
        raise TransferError("all constraint verbs are out of the embedding space")
    usable = ConstraintSet(in_space, source=constraints.source)
    # the starting batch holds B positives; with k negatives each the total is B(1+k)
    B = max(2, cfg.batch_size // (1 + cfg.sampling_k))
    if len(usable) < B:
        raise TransferError(f"{len(usable)} usable constraints < starting batch size {B}")
    sampling = SamplingConfig(k=cfg.sampling_k, scheme=cfg.sampling_scheme,
                              batch_positives=B, seed=cfg.seed)
    model = StmModel(space.d, slices=cfg.slices, specialized_dim=cfg.specialized_dim, seed=cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    torch.manual_seed(cfg.seed)

    correct = total = 0
    for it in range(cfg.iterations):
        correct = total = 0
        for batch in epoch_batches(usable, space, sampling, it, global_positives=constraints):
            lefts, rights, labels = [], [], []
            for pair, label in batch.instances:
                if pair.first not in space or pair.second not in space:
                    continue
                lefts.append(space.vector(pair.first))
                rights.append(space.vector(pair.second))
                labels.append(label)
            if not labels:
                continue
            xl = torch.as_tensor(np.array(lefts), dtype=torch.float32)
            xr = torch.as_tensor(np.array(rights), dtype=torch.float32)
            y = torch.tensor(labels, dtype=torch.long)
            logits = model(xl, xr)
            loss = F.cross_entropy(logits, y)
            if not torch.isfinite(loss):
                raise TransferError(f"non-finite STM loss at iteration {it}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            correct += int((logits.argmax(dim=-1) == y).sum())
            total += len(labels)
    accuracy = correct / total if total else 0.0
    logger.info("STM training accuracy %.3f (last iteration), %d OOV pairs dropped", accuracy, dropped)
    return model, {"train_accuracy": accuracy, "dropped_oov": dropped}


@dataclass
class FilterReport:
    kept: int = 0
    rejected: int = 0
    dropped_oov: int = 0

    @property
    def retention_rate(self) -> float:
        considered = self.kept + self.rejected
        return self.kept / considered if considered else 0.0


def stm_filter(
    noisy: ConstraintSet,
    model: StmModel,
    spaces: AlignedSpacePair,
) -> tuple[ConstraintSet, FilterReport]:
    """Keep pairs the STM classifies positive; target OOV pairs are dropped."""
    report = FilterReport()
    kept: set[VerbPair] = set()
    for pair in noisy.sorted_pairs():
        if pair.first not in spaces.target or pair.second not in spaces.target:
            report.dropped_oov += 1
            continue
        if model.predict_positive(spaces.target.vector(pair.first), spaces.target.vector(pair.second)):
            kept.add(pair)
            report.kept += 1
        else:
            report.rejected += 1
    if not kept:
        logger.warning("STM filtering rejected every pair")
    return ConstraintSet(kept, source=noisy.source + ":stm-filtered"), report


@dataclass
class VtransResult:
    purified: ConstraintSet
    classifier_head: object
    training_log: list[dict]
    stats: dict = field(default_factory=dict)


def run_vtrans(
    en_constraints: ConstraintSet,
    spaces: AlignedSpacePair,
    target_stack,
    stm_cfg: StmTrainConfig,
    adapter_cfg,
    retrieval: str = "cosine",
) -> VtransResult:
    """translate -> train STM on source constraints -> filter -> retrain the
    verb adapter in the target language (same protocol as the source)."""
    from .pair_task import train_verb_adapter

    noisy, trans_report = translate_pairs(en_constraints, spaces, retrieval=retrieval)
    model, stm_stats = train_stm(en_constraints, spaces.source, stm_cfg)
    purified, filter_report = stm_filter(noisy, model, spaces)
    head, log = train_verb_adapter(target_stack, purified, spaces.target, adapter_cfg)
    stats = {
        "translation": trans_report,
        "stm": stm_stats,
        "filter": filter_report,
        "source_pairs": len(en_constraints),
        "purified_pairs": len(purified),
    }
    return VtransResult(purified=purified, classifier_head=head, training_log=log, stats=stats)
