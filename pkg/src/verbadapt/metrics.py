"""Scoring: token-level micro F1, ACE-style span F1 per subtask, multi-seed
aggregation, and paired t-test significance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import stats

ACE_SUBTASKS = ("T-ident", "T-class", "ARG-ident", "ARG-class")


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class EventAnnotation:
    """One event: a trigger span with a type, plus role-labeled argument spans.

    Spans are (start, end) token offsets, end exclusive.
    """

    trigger_span: tuple[int, int]
    trigger_type: str
    arguments: tuple[tuple[tuple[int, int], str], ...] = ()


def _prf(tp: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    p = 100.0 * tp / n_pred if n_pred else 0.0
    r = 100.0 * tp / n_gold if n_gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def token_f1(pred: list[str], gold: list[str], outside: str = "O") -> tuple[float, float, float]:
    """Micro P/R/F1 over non-O tokens: a token counts when pred type == gold type."""
    if len(pred) != len(gold):
        raise MetricsError(f"length mismatch: {len(pred)} predictions vs {len(gold)} gold labels")
    tp = sum(1 for p, g in zip(pred, gold) if g != outside and p == g)
    n_pred = sum(1 for p in pred if p != outside)
    n_gold = sum(1 for g in gold if g != outside)
    return _prf(tp, n_pred, n_gold)


def _validate_disjoint(spans: list[tuple[int, int]], what: str) -> None:
    for s in sorted(spans):
        if s[1] <= s[0]:
            raise MetricsError(f"{what}: empty or inverted span {s}")
    ordered = sorted(spans)
    for a, b in zip(ordered, ordered[1:]):
        if b[0] < a[1]:
            raise MetricsError(f"{what}: overlapping gold spans {a} and {b}")


def ace_span_f1(
    pred_docs: list[list[EventAnnotation]],
    gold_docs: list[list[EventAnnotation]],
    subtask: str,
) -> tuple[float, float, float]:
    """Micro P/R/F1 for one ACE subtask.

    T-ident: trigger span match. T-class: span + type. ARG-ident: argument
    span attached to a correctly identified trigger. ARG-class: additionally
    the role matches. Exact-offset matching throughout.
    """
    if subtask not in ACE_SUBTASKS:
        raise MetricsError(f"unknown subtask {subtask!r}; expected one of {ACE_SUBTASKS}")
    if len(pred_docs) != len(gold_docs):
        raise MetricsError("document count mismatch between predictions and gold")
    tp = n_pred = n_gold = 0
    for pred, gold in zip(pred_docs, gold_docs):
        _validate_disjoint([e.trigger_span for e in gold], "gold triggers")
        for e in gold:
            _validate_disjoint([s for s, _ in e.arguments], f"gold arguments of trigger {e.trigger_span}")
        if subtask in ("T-ident", "T-class"):
            gold_items = {(e.trigger_span,) if subtask == "T-ident" else (e.trigger_span, e.trigger_type)
                          for e in gold}
            pred_items = {(e.trigger_span,) if subtask == "T-ident" else (e.trigger_span, e.trigger_type)
                          for e in pred}
            tp += len(gold_items & pred_items)
            n_pred += len(pred_items)
            n_gold += len(gold_items)
        else:
            gold_triggers = {e.trigger_span for e in gold}
            gold_items = set()
            for e in gold:
                for span, role in e.arguments:
                    gold_items.add((e.trigger_span, span) if subtask == "ARG-ident"
                                   else (e.trigger_span, span, role))
            pred_items = set()
            for e in pred:
                # arguments only count when attached to a correctly identified trigger
                if e.trigger_span not in gold_triggers:
                    n_pred += len(e.arguments)
                    continue
                for span, role in e.arguments:
                    pred_items.add((e.trigger_span, span) if subtask == "ARG-ident"
                                   else (e.trigger_span, span, role))
            tp += len(gold_items & pred_items)
            n_pred += len(pred_items)
            n_gold += len(gold_items)
    return _prf(tp, n_pred, n_gold)


@dataclass(frozen=True)
class TTestResult:
    p_value: float
    statistic: float
    degenerate: bool = False


def paired_t_test(scores_a: list[float], scores_b: list[float]) -> TTestResult:
    """Two-sided paired Student's t-test on per-seed score differences.

    Degenerate zero-variance cases: zero mean difference reports p=1.0; a
    nonzero mean with zero variance is reported significant (p=0.0) with the
    degenerate flag set instead of dividing by zero.
    """
    n = len(scores_a)
    if n != len(scores_b):
        raise MetricsError("paired t-test requires equal-length score lists")
    if n < 2:
        raise MetricsError("paired t-test requires n >= 2 runs")
    diffs = [a - b for a, b in zip(scores_a, scores_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(p_value=1.0, statistic=0.0, degenerate=True)
        return TTestResult(p_value=0.0, statistic=math.copysign(math.inf, mean), degenerate=True)
    t = mean / math.sqrt(var / n)
    p = 2.0 * float(stats.t.sf(abs(t), df=n - 1))
    return TTestResult(p_value=p, statistic=t)


@dataclass
class ScoreReport:
    """Per-configuration scores for one subtask over n seeded runs."""

    subtask: str
    runs: dict[str, list[float]] = field(default_factory=dict)
    baseline: str = "baseline"
    alpha: float = 0.05

    def add(self, config: str, scores: list[float]) -> None:
        self.runs[config] = list(scores)

    def mean(self, config: str) -> float:
        scores = self.runs[config]
        return sum(scores) / len(scores)

    def significant(self, config: str) -> bool | None:
        """Paired-t significance of config vs the named baseline at alpha."""
        if config == self.baseline or self.baseline not in self.runs:
            return None
        if len(self.runs[config]) < 2:
            return None
        res = paired_t_test(self.runs[config], self.runs[self.baseline])
        return res.p_value < self.alpha

    def format_table(self) -> str:
        lines = [f"subtask: {self.subtask}  (mean F1 over n runs; * = p<{self.alpha} vs {self.baseline})"]
        width = max((len(c) for c in self.runs), default=8)
        for config in self.runs:
            star = "*" if self.significant(config) else " "
            lines.append(f"  {config:<{width}}  {self.mean(config):6.2f}{star}  n={len(self.runs[config])}")
        return "\n".join(lines)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"subtask = {self.subtask}\n")
            fh.write(f"baseline = {self.baseline}\n")
            fh.write(f"alpha = {self.alpha}\n")
            for config, scores in self.runs.items():
                fh.write(f"runs.{config} = {','.join(repr(s) for s in scores)}\n")

    @classmethod
    def load(cls, path) -> "ScoreReport":
        report = cls(subtask="")
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                key, _, value = line.strip().partition(" = ")
                if key == "subtask":
                    report.subtask = value
                elif key == "baseline":
                    report.baseline = value
                elif key == "alpha":
                    report.alpha = float(value)
                elif key.startswith("runs."):
                    report.runs[key[5:]] = [float(x) for x in value.split(",")]
        return report
