"""Training-batch assembly: positive verb pairs plus controlled and random negatives.

For each positive pair (w1, w2) in a batch, controlled negatives replace one
member with the in-batch verb closest to the other member in an auxiliary
static embedding space; random negatives pair two other batch verbs. Any
candidate negative that is itself a global positive constraint is rejected.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .embeddings import EmbeddingSpace
from .lexicon import ConstraintSet, VerbPair

logger = logging.getLogger(__name__)

SUPPORTED_SCHEMES = {2: "cc", 3: "ccr", 4: "ccrr"}


class SamplingError(Exception):
    pass


class SamplingFallback(SamplingError):
    """No usable controlled candidate; the caller substitutes a random negative."""


class DegenerateBatchError(SamplingError):
    """Batch has too few distinct lemmas to sample negatives."""


@dataclass(frozen=True)
class SamplingConfig:
    k: int = 3
    scheme: str = "ccr"
    batch_positives: int = 16
    seed: int = 0

    def __post_init__(self):
        if len(self.scheme) != self.k:
            raise ValueError(f"scheme {self.scheme!r} has length {len(self.scheme)}, expected k={self.k}")
        if set(self.scheme) - {"c", "r"}:
            raise ValueError(f"scheme {self.scheme!r} may only contain 'c' and 'r'")
        if self.scheme.count("c") > 2:
            raise ValueError("at most two controlled negatives per positive are supported")
        if self.batch_positives < 2:
            raise ValueError("batch_positives must be >= 2")


@dataclass
class TrainingBatch:
    """Ordered instances: B positives first, then negatives grouped by scheme slot."""

    instances: list[tuple[VerbPair, int]]
    provenance: list[str]
    fallback_count: int = 0
    skipped_count: int = 0

    def __len__(self) -> int:
        return len(self.instances)

    def dump_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for (pair, label), prov in zip(self.instances, self.provenance):
                fh.write(f"{pair.first}\t{pair.second}\t{label}\t{prov}\n")


def nearest_in_batch(target: str, candidates: Sequence[str], space: EmbeddingSpace) -> str:
    """In-space candidate with highest cosine to the target; lexicographic tie-break."""
    ranked = rank_candidates(target, candidates, space)
    if not ranked:
        raise SamplingFallback(f"no in-space candidate for target {target!r}")
    return ranked[0]


def rank_candidates(target: str, candidates: Sequence[str], space: EmbeddingSpace) -> list[str]:
    """Candidates present in the space, sorted by descending cosine to target, then lemma."""
    if target not in space:
        return []
    present = sorted(c for c in set(candidates) if c in space)
    if not present:
        return []
    t = space.unit_vector(target)
    sims = np.array([float(space.unit_vector(c) @ t) for c in present])
    order = sorted(range(len(present)), key=lambda i: (-sims[i], present[i]))
    return [present[i] for i in order]


def build_training_batch(
    positives: Sequence[VerbPair],
    global_positives: ConstraintSet,
    space: EmbeddingSpace,
    cfg: SamplingConfig,
    rng: np.random.Generator,
) -> TrainingBatch:
    """Assemble one batch of B positives and k*B negatives per the sampling scheme.

    Controlled slots advance to the next-nearest candidate when the nearest
    forms a global positive; random slots redraw (at most 100 attempts, then
    the slot is skipped with a warning). Positives with members missing from
    the embedding space fall back to random negatives in controlled slots.
    """
    if len(positives) != cfg.batch_positives:
        raise SamplingError(f"expected {cfg.batch_positives} positives, got {len(positives)}")
    batch_lemmas = sorted({lemma for p in positives for lemma in (p.first, p.second)})
    if len(batch_lemmas) < 3:
        raise DegenerateBatchError(f"batch has only {len(batch_lemmas)} distinct lemmas; need >= 3")

    instances: list[tuple[VerbPair, int]] = [(p.canonical(), 1) for p in positives]
    provenance: list[str] = ["positive"] * len(positives)
    fallbacks = 0
    skipped = 0

    neg_slots: list[list[tuple[VerbPair, str]]] = [[] for _ in cfg.scheme]
    for pos in positives:
        w1, w2 = pos.first, pos.second
        pool = [c for c in batch_lemmas if c not in (w1, w2)]
        c_seen = 0
        for slot, kind in enumerate(cfg.scheme):
            neg = None
            prov = "random"
            if kind == "c":
                c_seen += 1
                anchor = w2 if c_seen == 1 else w1
                prov = f"controlled-{c_seen}"
                ranked = rank_candidates(anchor, pool, space)
                for cand in ranked:
                    candidate = (VerbPair(cand, w2) if c_seen == 1 else VerbPair(w1, cand)).canonical()
                    if candidate not in global_positives:
                        neg = candidate
                        break
                if neg is None:
                    prov = "random"
                    fallbacks += 1
            if neg is None:
                neg = _draw_random_negative(pool, global_positives, rng)
                if neg is None:
                    skipped += 1
                    logger.warning("random negative resampling exhausted for positive (%s, %s)", w1, w2)
                    continue
            neg_slots[slot].append((neg, prov))

    for slot_pairs in neg_slots:
        for pair, prov in slot_pairs:
            instances.append((pair, 0))
            provenance.append(prov)
    return TrainingBatch(instances=instances, provenance=provenance, fallback_count=fallbacks, skipped_count=skipped)


def _draw_random_negative(
    pool: Sequence[str], global_positives: ConstraintSet, rng: np.random.Generator, max_attempts: int = 100
) -> VerbPair | None:
    if len(pool) < 2:
        return None
    for _ in range(max_attempts):
        i, j = rng.choice(len(pool), size=2, replace=False)
        cand = VerbPair(pool[int(i)], pool[int(j)]).canonical()
        if cand not in global_positives:
            return cand
    return None


def epoch_batches(
    constraints: ConstraintSet,
    space: EmbeddingSpace,
    cfg: SamplingConfig,
    epoch: int = 0,
    global_positives: ConstraintSet | None = None,
) -> Iterator[TrainingBatch]:
    """One epoch: a seeded permutation of positives in batches of B; the short remainder is dropped.

    ``global_positives`` defaults to the constraint set itself; pass the full
    set when streaming from a train split so negatives avoid held-out positives too.
    """
    B = cfg.batch_positives
    if len(constraints) < B:
        raise SamplingError(f"need at least {B} positive constraints, got {len(constraints)}")
    if global_positives is None:
        global_positives = constraints
    ordered = constraints.sorted_pairs()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, epoch))))
    perm = rng.permutation(len(ordered))
    for start in range(0, len(ordered) - B + 1, B):
        chunk = [ordered[int(i)] for i in perm[start : start + B]]
        yield build_training_batch(chunk, global_positives, space, cfg, rng)


def batch_stream(
    constraints: ConstraintSet,
    space: EmbeddingSpace,
    cfg: SamplingConfig,
    epochs: int = 1,
    global_positives: ConstraintSet | None = None,
) -> Iterator[TrainingBatch]:
    """Yield batches over seeded epoch permutations; negatives are regenerated per epoch."""
    for epoch in range(epochs):
        yield from epoch_batches(constraints, space, cfg, epoch, global_positives=global_positives)
