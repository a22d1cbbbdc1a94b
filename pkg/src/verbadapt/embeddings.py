"""Static word embedding spaces: loading, cosine retrieval, alignment bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EmbeddingError(Exception):
    pass


@dataclass
class EmbeddingSpace:
    """Word-vector table over a fixed vocabulary.

    Vectors are stored raw (not pre-normalized); a unit-norm copy is cached
    lazily for cosine retrieval. All-zero vectors are rejected because they
    have no cosine direction.
    """

    vocabulary: list[str]
    vectors: np.ndarray
    language: str = "en"
    alignment_tag: str | None = None
    _index: dict[str, int] = field(default_factory=dict, repr=False)
    _unit: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.vocabulary):
            raise EmbeddingError(
                f"vector matrix shape {self.vectors.shape} does not match vocabulary size {len(self.vocabulary)}"
            )
        self._index = {}
        for i, w in enumerate(self.vocabulary):
            if w in self._index:
                raise EmbeddingError(f"duplicate vocabulary entry {w!r}")
            self._index[w] = i
        norms = np.linalg.norm(self.vectors, axis=1)
        if np.any(norms == 0.0):
            bad = self.vocabulary[int(np.argmin(norms))]
            raise EmbeddingError(f"all-zero vector for {bad!r}")

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.vocabulary)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def vector(self, word: str) -> np.ndarray:
        return self.vectors[self._index[word]]

    def unit_vectors(self) -> np.ndarray:
        if self._unit is None:
            norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
            self._unit = self.vectors / norms
        return self._unit

    def unit_vector(self, word: str) -> np.ndarray:
        return self.unit_vectors()[self._index[word]]

    def save_text(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.vocabulary)} {self.d}\n")
            for w, v in zip(self.vocabulary, self.vectors):
                fh.write(w + " " + " ".join(f"{x:.6g}" for x in v) + "\n")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))


def load_embeddings_text(path, language: str = "en", alignment_tag: str | None = None) -> EmbeddingSpace:
    """Read the standard text word-vector format: header ``|V| d``, then one word per line."""
    words: list[str] = []
    rows: list[np.ndarray] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingError(f"{path}: malformed header {header!r}, expected '|V| d'")
        n, d = int(header[0]), int(header[1])
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < d + 1:
                raise EmbeddingError(f"{path}:{lineno}: expected {d} vector components")
            words.append(parts[0])
            rows.append(np.array(parts[1 : d + 1], dtype=np.float64))
    if len(words) != n:
        raise EmbeddingError(f"{path}: header promised {n} words, found {len(words)}")
    return EmbeddingSpace(vocabulary=words, vectors=np.vstack(rows), language=language, alignment_tag=alignment_tag)


def nearest_neighbor(query: np.ndarray, space: EmbeddingSpace, exclude: set[str] | None = None) -> str:
    """Cosine-nearest vocabulary word; ties broken lexicographically."""
    sims = space.unit_vectors() @ (query / np.linalg.norm(query))
    order = np.argsort(-sims, kind="stable")
    best_word, best_sim = None, -np.inf
    for i in order:
        w = space.vocabulary[int(i)]
        if exclude and w in exclude:
            continue
        s = sims[int(i)]
        if s > best_sim + 1e-12:
            best_word, best_sim = w, s
        elif abs(s - best_sim) <= 1e-12 and best_word is not None and w < best_word:
            best_word = w
        elif s < best_sim - 1e-12:
            break
    if best_word is None:
        raise EmbeddingError("no candidate left after exclusions")
    return best_word


def csls_nearest_neighbor(query: np.ndarray, space: EmbeddingSpace, knn: int = 10) -> str:
    """CSLS-adjusted retrieval: cosine penalized by the target's mean similarity to its k nearest sources.

    Only the target-side hubness penalty is applied, computed against the
    target space itself (single-query form).
    """
    unit = space.unit_vectors()
    q = query / np.linalg.norm(query)
    sims = unit @ q
    # hubness estimate: mean similarity of each target word to its knn neighbors in the space
    neigh = unit @ unit.T
    np.fill_diagonal(neigh, -np.inf)
    k = min(knn, len(space) - 1)
    topk = np.partition(neigh, -k, axis=1)[:, -k:]
    penalty = topk.mean(axis=1)
    scores = 2 * sims - penalty
    order = np.argsort(-scores, kind="stable")
    candidates = [space.vocabulary[int(i)] for i in order if abs(scores[int(i)] - scores[int(order[0])]) <= 1e-12]
    return min(candidates)
