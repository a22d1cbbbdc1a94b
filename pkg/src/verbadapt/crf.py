"""Linear-chain CRF: forward/backward log-partition, Viterbi decoding, and
BIO transition masking for span labeling heads."""

from __future__ import annotations

import torch
import torch.nn as nn

NEG_INF = -1e9  # finite stand-in for masked transitions; keeps gradients clean


class CrfError(Exception):
    pass


def build_bio_transition_mask(tags: list[str]) -> torch.Tensor:
    """Boolean (allowed) matrix over tags plus a start-allowed vector, packed
    as (transitions_allowed [n,n], start_allowed [n]).

    I-X may only follow B-X or I-X; everything else is unconstrained.
    """
    n = len(tags)
    allowed = torch.ones((n, n), dtype=torch.bool)
    start_allowed = torch.ones(n, dtype=torch.bool)
    for j, tag in enumerate(tags):
        if not tag.startswith("I-"):
            continue
        x = tag[2:]
        start_allowed[j] = False
        for i, prev in enumerate(tags):
            ok = prev == f"B-{x}" or prev == f"I-{x}"
            allowed[i, j] = ok
    return torch.cat([allowed, start_allowed[None, :]], dim=0)


class CrfLayer(nn.Module):
    """Transition scores over a fixed tag inventory; emissions come from the host head.

    An optional packed mask (from build_bio_transition_mask) pins disallowed
    transitions and start tags to a large negative score.
    """

    def __init__(self, n_tags: int, mask: torch.Tensor | None = None, seed: int = 0):
        super().__init__()
        self.n_tags = n_tags
        gen = torch.Generator().manual_seed(seed)
        self.transitions = nn.Parameter(torch.zeros(n_tags, n_tags))
        self.start = nn.Parameter(torch.zeros(n_tags))
        self.end = nn.Parameter(torch.zeros(n_tags))
        with torch.no_grad():
            self.transitions.normal_(0.0, 0.01, generator=gen)
            self.start.normal_(0.0, 0.01, generator=gen)
            self.end.normal_(0.0, 0.01, generator=gen)
        if mask is not None:
            if mask.shape != (n_tags + 1, n_tags):
                raise CrfError(f"mask shape {tuple(mask.shape)} != ({n_tags + 1}, {n_tags})")
            self.register_buffer("trans_allowed", mask[:n_tags])
            self.register_buffer("start_allowed", mask[n_tags])
        else:
            self.register_buffer("trans_allowed", torch.ones(n_tags, n_tags, dtype=torch.bool))
            self.register_buffer("start_allowed", torch.ones(n_tags, dtype=torch.bool))

    def _trans(self) -> torch.Tensor:
        return torch.where(self.trans_allowed, self.transitions, torch.full_like(self.transitions, NEG_INF))

    def _start(self) -> torch.Tensor:
        return torch.where(self.start_allowed, self.start, torch.full_like(self.start, NEG_INF))

    def _check(self, emissions: torch.Tensor) -> None:
        if emissions.ndim != 2 or emissions.shape[1] != self.n_tags:
            raise CrfError(f"emissions shape {tuple(emissions.shape)} incompatible with {self.n_tags} tags")
        if emissions.shape[0] < 1:
            raise CrfError("empty emission sequence")

    def path_score(self, emissions: torch.Tensor, tags: list[int] | torch.Tensor) -> torch.Tensor:
        self._check(emissions)
        tags = torch.as_tensor(tags, dtype=torch.long)
        if len(tags) != emissions.shape[0]:
            raise CrfError(f"path length {len(tags)} != sequence length {emissions.shape[0]}")
        if tags.min() < 0 or tags.max() >= self.n_tags:
            raise CrfError(f"tag index out of range [0, {self.n_tags})")
        score = self._start()[tags[0]] + emissions[0, tags[0]]
        trans = self._trans()
        for t in range(1, len(tags)):
            score = score + trans[tags[t - 1], tags[t]] + emissions[t, tags[t]]
        return score + self.end[tags[-1]]

    def log_partition(self, emissions: torch.Tensor) -> torch.Tensor:
        """Forward-algorithm log Z, left to right."""
        self._check(emissions)
        alpha = self._start() + emissions[0]
        trans = self._trans()
        for t in range(1, emissions.shape[0]):
            alpha = torch.logsumexp(alpha[:, None] + trans, dim=0) + emissions[t]
        return torch.logsumexp(alpha + self.end, dim=0)

    def log_partition_backward(self, emissions: torch.Tensor) -> torch.Tensor:
        """Same quantity computed right to left (backward algorithm)."""
        self._check(emissions)
        beta = self.end.clone()
        trans = self._trans()
        for t in range(emissions.shape[0] - 1, 0, -1):
            beta = torch.logsumexp(trans + (emissions[t] + beta)[None, :], dim=1)
        return torch.logsumexp(self._start() + emissions[0] + beta, dim=0)

    def log_likelihood(self, emissions: torch.Tensor, tags) -> torch.Tensor:
        """score(path) - log Z; always <= 0 up to numerical slack."""
        return self.path_score(emissions, tags) - self.log_partition(emissions)

    def viterbi(self, emissions: torch.Tensor) -> tuple[list[int], float]:
        """Best path and its score; ties broken by lowest tag index at the
        earliest divergent step (suffix DP, forward backtrace)."""
        self._check(emissions)
        with torch.no_grad():
            T = emissions.shape[0]
            trans = self._trans()
            # suffix[t, j]: best score of a path covering steps t..T-1 starting with tag j
            suffix = emissions[T - 1] + self.end
            suffixes = [suffix]
            for t in range(T - 2, -1, -1):
                best, _ = (trans + suffix[None, :]).max(dim=1)
                suffix = emissions[t] + best
                suffixes.append(suffix)
            suffixes.reverse()
            first = suffixes[0] + self._start()
            # numpy argmax guarantees the lowest index among exact ties
            path = [int(first.numpy().argmax())]
            total = float(first[path[0]])
            for t in range(1, T):
                scores = trans[path[-1]] + suffixes[t]
                path.append(int(scores.numpy().argmax()))
        return path, total
