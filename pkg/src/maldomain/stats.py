"""Friedman average ranks and the Wilcoxon signed-rank test for comparing classifiers."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .errors import ConfigurationError, PairingError

EXACT_LIMIT = 20
ALPHA = 0.05


# ---------------------------------------------------------------------------
# Friedman


@dataclass(frozen=True)
class RankSummary:
    models: tuple[str, ...]
    average_ranks: np.ndarray
    block_ranks: np.ndarray
    statistic: float

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.models, map(float, self.average_ranks)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "average_rank"])
        for m, r in zip(self.models, self.average_ranks):
            w.writerow([m, repr(float(r))])
        return buf.getvalue()


def friedman_ranks(values, models: Sequence[str] | None = None) -> RankSummary:
    """Rank models within each block (row), best = 1, ties sharing mid-ranks.

    ``values`` is ``(n_blocks, n_models)`` with higher meaning better. The
    statistic is ``12N / (k(k+1)) * (sum(R_j^2) - k(k+1)^2 / 4)``.
    """
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ConfigurationError("result matrix must be 2-D (blocks x models)")
    n_blocks, k = m.shape
    if k < 2 or n_blocks < 2:
        raise ConfigurationError(f"need >= 2 models and >= 2 blocks, got {k} and {n_blocks}")
    if not np.all(np.isfinite(m)):
        raise ConfigurationError("result matrix has missing or non-finite cells")
    models = tuple(models) if models is not None else tuple(f"m{j}" for j in range(k))
    if len(models) != k:
        raise ConfigurationError(f"{len(models)} model names for {k} columns")
    ranks = rankdata(-m, method="average", axis=1)
    avg = ranks.mean(axis=0)
    stat = 12.0 * n_blocks / (k * (k + 1)) * (np.sum(avg**2) - k * (k + 1) ** 2 / 4.0)
    return RankSummary(models, avg, ranks, float(max(stat, 0.0)))


# ---------------------------------------------------------------------------
# Wilcoxon


class WilcoxonMethod(str, enum.Enum):
    EXACT = "ExactPermutation"
    NORMAL = "NormalApprox"


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n_effective: int
    method: WilcoxonMethod
    w_plus: float = 0.0
    w_minus: float = 0.0
    degenerate: bool = False

    @property
    def significant(self) -> bool:
        return self.p_value <= ALPHA


def exact_null_counts(doubled_ranks: Sequence[int]) -> np.ndarray:
    """``counts[s]`` = number of sign patterns whose positive doubled ranks sum to ``s``.

    Doubling makes mid-ranks integers, so the count is exact.
    """
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return counts


def wilcoxon_signed_rank(x, y, alternative: str = "two-sided", method: str = "auto",
                         exact_limit: int = EXACT_LIMIT) -> WilcoxonResult:
    """Paired two-sided signed-rank test on ``x - y``.

    Zero differences are dropped, absolute differences get mid-ranks, and
    ``W = min(W+, W-)``. The p-value is ``min(1, 2 P(W+ <= W))`` under the
    sign-flip null: exact when ``n_effective <= exact_limit`` (or
    ``method="exact"``), otherwise the normal approximation with tie
    correction and a 0.5 continuity correction.
    """
    if alternative != "two-sided":
        raise ConfigurationError("only the two-sided alternative is supported")
    if method not in ("auto", "exact", "approx"):
        raise ConfigurationError(f"unknown method {method!r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise PairingError(f"paired series differ in shape: {x.shape} vs {y.shape}")
    d = x - y
    d = d[d != 0]
    n = len(d)
    use_exact = method == "exact" or (method == "auto" and n <= exact_limit)
    kind = WilcoxonMethod.EXACT if use_exact else WilcoxonMethod.NORMAL
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, kind, degenerate=True)
    ranks = rankdata(np.abs(d), method="average")
    doubled = np.rint(2 * ranks).astype(np.int64)
    twice_plus = int(doubled[d > 0].sum())
    twice_minus = int(doubled[d < 0].sum())
    w_plus, w_minus = twice_plus / 2, twice_minus / 2
    w = min(w_plus, w_minus)
    if use_exact:
        counts = exact_null_counts(doubled)
        tail = int(counts[: min(twice_plus, twice_minus) + 1].sum())
        p = min(1.0, 2.0 * tail / 2.0**n)
    else:
        mean = n * (n + 1) / 4.0
        _, t = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(t**3 - t)) / 48.0
        if var <= 0:
            p = 1.0
        else:
            z = (w - mean + 0.5) / math.sqrt(var)
            p = min(1.0, 2.0 * float(norm.cdf(z)))
    return WilcoxonResult(w, p, n, kind, w_plus, w_minus)


@dataclass(frozen=True)
class PairwiseTable:
    models: tuple[str, ...]
    p_values: np.ndarray
    results: dict

    def to_csv(self, alpha: float = ALPHA) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model_a", "model_b", "statistic", "p_value", "n_effective", "method",
                    "significant"])
        for i, a in enumerate(self.models):
            for b in self.models[i + 1 :]:
                r = self.results[(a, b)]
                w.writerow([a, b, repr(r.statistic), repr(r.p_value), r.n_effective,
                            r.method.value, str(r.p_value <= alpha).lower()])
        return buf.getvalue()

    def format(self, digits: int = 4, alpha: float = ALPHA) -> str:
        """Square text matrix; non-significant entries carry a trailing ``*``."""
        cells = [["", *self.models]]
        for i, a in enumerate(self.models):
            row = [a]
            for j in range(len(self.models)):
                if i == j:
                    row.append("-")
                else:
                    p = self.p_values[i, j]
                    row.append(f"{p:.{digits}f}" + ("*" if p > alpha else ""))
            cells.append(row)
        widths = [max(len(r[c]) for r in cells) for c in range(len(cells[0]))]
        return "\n".join(
            "  ".join(v.rjust(wd) if c else v.ljust(wd) for c, (v, wd) in enumerate(zip(r, widths)))
            .rstrip() for r in cells
        ) + "\n"


def pairwise_comparison_table(series: Mapping[str, Sequence[float]], **kwargs) -> PairwiseTable:
    """Wilcoxon p-value for every pair of models; diagonal is NaN."""
    models = tuple(series)
    if len(models) < 2:
        raise ConfigurationError("need at least two models to compare")
    lengths = {len(series[m]) for m in models}
    if len(lengths) != 1:
        raise PairingError(f"paired series have different lengths: {sorted(lengths)}")
    k = len(models)
    p = np.full((k, k), np.nan)
    results = {}
    for i in range(k):
        for j in range(i + 1, k):
            r = wilcoxon_signed_rank(series[models[i]], series[models[j]], **kwargs)
            results[(models[i], models[j])] = results[(models[j], models[i])] = r
            p[i, j] = p[j, i] = r.p_value
    return PairwiseTable(models, p, results)
