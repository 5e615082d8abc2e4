"""Evaluation metrics, rank tests, and the exploratory statistics.

Undefined metrics (zero denominators, constant inputs) surface as ``None``
rather than silently collapsing to 0, so degenerate predictions cannot
inflate F1. Mann-Whitney p-values are two-sided throughout; small samples
use exact enumeration of the U distribution, larger ones a tie-corrected
normal approximation with continuity correction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .records import DataError

__all__ = [
    "EvalReport",
    "RankTestResult",
    "confusion_and_metrics",
    "mann_whitney_u",
    "rank_correlation",
    "report_count_histogram",
    "ReportCountSummary",
    "EXACT_MAX_N",
]

# exact U enumeration up to C(12,6) = 924 group assignments
EXACT_MAX_N = 12


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    n: int
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "n": self.n,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }

    def format_table(self) -> str:
        def fmt(v):
            return "undefined" if v is None else f"{100.0 * v:.1f}%"

        lines = [
            "              predicted 1   predicted 0",
            f"actual 1      {self.tp:>11d}   {self.fn:>11d}",
            f"actual 0      {self.fp:>11d}   {self.tn:>11d}",
            "",
            f"accuracy    {fmt(self.accuracy):>10}",
            f"recall      {fmt(self.recall):>10}",
            f"precision   {fmt(self.precision):>10}",
            f"F1-measure  {fmt(self.f1):>10}",
        ]
        return "\n".join(lines)


def confusion_and_metrics(labels, predictions) -> EvalReport:
    """Confusion counts plus accuracy/precision/recall/F1 over {0,1} arrays."""
    y = np.asarray(labels, dtype=np.int64)
    p = np.asarray(predictions, dtype=np.int64)
    if y.shape != p.shape:
        raise DataError(
            f"length mismatch: {y.shape[0]} labels vs {p.shape[0]} predictions"
        )
    bad = set(np.unique(y)) | set(np.unique(p))
    if not bad <= {0, 1}:
        raise DataError(f"labels/predictions must be 0/1, saw {sorted(bad)}")
    tp = int(np.sum((y == 1) & (p == 1)))
    fp = int(np.sum((y == 0) & (p == 1)))
    tn = int(np.sum((y == 0) & (p == 0)))
    fn = int(np.sum((y == 1) & (p == 0)))
    n = int(y.shape[0])
    accuracy = (tp + tn) / n if n else None
    precision = tp / (tp + fp) if (tp + fp) else None
    recall = tp / (tp + fn) if (tp + fn) else None
    if precision is None or recall is None or (precision + recall) == 0:
        f1 = None
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return EvalReport(tp, fp, tn, fn, n, accuracy, precision, recall, f1)


@dataclass(frozen=True)
class RankTestResult:
    u_statistic: float
    z: float
    p_value: float
    n1: int
    n2: int
    tie_corrected: bool
    method: str  # "exact" | "normal"

    def to_dict(self) -> dict:
        return {
            "u_statistic": self.u_statistic,
            "z": self.z,
            "p_value": self.p_value,
            "n1": self.n1,
            "n2": self.n2,
            "tie_corrected": self.tie_corrected,
            "method": self.method,
        }


def _midranks(pooled: np.ndarray) -> np.ndarray:
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(len(pooled), dtype=np.float64)
    srt = pooled[order]
    i = 0
    while i < len(srt):
        j = i
        while j + 1 < len(srt) and srt[j + 1] == srt[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _norm_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def mann_whitney_u(a, b, method: str = "auto") -> RankTestResult:
    """Two-sided Mann-Whitney rank test; U is reported for the first sample.

    ``method="auto"`` enumerates the exact U distribution over all
    C(n1+n2, n1) group assignments whenever n1+n2 <= 12 (ties handled by
    enumerating the observed midranks), otherwise uses the normal
    approximation with tie-corrected variance and continuity correction.
    """
    x = np.asarray(list(a), dtype=np.float64)
    y = np.asarray(list(b), dtype=np.float64)
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise DataError("mann_whitney_u: both samples must be nonempty")
    if method not in ("auto", "exact", "normal"):
        raise DataError(f"unknown method {method!r}")

    pooled = np.concatenate([x, y])
    ranks = _midranks(pooled)
    u1 = float(np.sum(ranks[:n1]) - n1 * (n1 + 1) / 2.0)
    mean_u = n1 * n2 / 2.0

    # tie-corrected variance (population of midranks)
    nn = n1 + n2
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts))
    has_ties = bool(np.any(tie_counts > 1))
    var_u = n1 * n2 / 12.0 * ((nn + 1) - tie_term / (nn * (nn - 1)))

    # report a z-score in all cases; it is the normal-approximation score
    if var_u > 0:
        d = u1 - mean_u
        # continuity correction shrinks |d| by 0.5, never past zero
        d_adj = math.copysign(max(0.0, abs(d) - 0.5), d)
        z = d_adj / math.sqrt(var_u)
    else:
        z = 0.0

    use_exact = method == "exact" or (method == "auto" and nn <= EXACT_MAX_N)
    if use_exact:
        if nn > 20:
            raise DataError("exact enumeration limited to n1+n2 <= 20")
        offset = n1 * (n1 + 1) / 2.0
        observed = abs(u1 - mean_u)
        total = 0
        hits = 0
        for combo in itertools.combinations(range(nn), n1):
            u = ranks[list(combo)].sum() - offset
            total += 1
            if abs(u - mean_u) >= observed - 1e-9:
                hits += 1
        p = hits / total
        chosen = "exact"
    else:
        if var_u == 0:
            p = 1.0
        else:
            p = min(1.0, 2.0 * _norm_sf(abs(z)))
        chosen = "normal"

    return RankTestResult(
        u_statistic=u1,
        z=z,
        p_value=min(1.0, max(0.0, p)),
        n1=n1,
        n2=n2,
        tie_corrected=has_ties,
        method=chosen,
    )


def rank_correlation(feature_column, labels) -> float | None:
    """Spearman rank correlation on midranks; None for constant input."""
    x = np.asarray(list(feature_column), dtype=np.float64)
    y = np.asarray(list(labels), dtype=np.float64)
    if x.shape != y.shape:
        raise DataError(
            f"length mismatch: {x.shape[0]} values vs {y.shape[0]} labels"
        )
    if len(x) == 0:
        raise DataError("rank_correlation: empty input")
    rx = _midranks(x)
    ry = _midranks(y)
    sx = rx.std()
    sy = ry.std()
    if sx == 0 or sy == 0:
        return None
    return float(np.mean((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))


@dataclass(frozen=True)
class ReportCountSummary:
    histogram: dict[int, int]
    positive_share: float | None

    def to_dict(self) -> dict:
        return {
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "positive_share": self.positive_share,
        }


def report_count_histogram(records) -> ReportCountSummary:
    """Exact report-count frequencies plus the share with count > 2."""
    hist: dict[int, int] = {}
    total = 0
    positive = 0
    for rec in records:
        count = rec.report_count
        if count is None:
            continue
        hist[count] = hist.get(count, 0) + 1
        total += 1
        if count > 2:
            positive += 1
    share = positive / total if total else None
    return ReportCountSummary(histogram=hist, positive_share=share)
