"""Confusion matrices, the four headline metrics, repeated stratified CV and grid tuning.

A metric whose denominator is zero is reported as ``None`` rather than 0.
``None`` values are left out of every average, and the number left out is
logged and kept on the result.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .classifiers.base import ClassifierSpec, Family, fit
from .dataset import (
    Dataset,
    FoldAssignment,
    apply_mask,
    as_mask,
    fit_scaling,
    mask_to_string,
    min_max_scale,
    stratified_k_folds,
)
from .errors import ConfigurationError, FitError, MaldomainError, ShapeError, TuningError

log = logging.getLogger(__name__)

METRICS = ("accuracy", "precision", "recall", "f_measure")
METRIC_TITLES = {
    "accuracy": "Accuracy",
    "precision": "Precision",
    "recall": "Recall",
    "f_measure": "F-measure",
}
SCALING_MODES = ("global", "per_fold")

DEFAULT_GRIDS = {
    Family.SVM: {
        "gamma": [2.0**e for e in range(-4, 3)],
        "cost": [2.0**e for e in range(-1, 6)],
    },
    Family.KNN: {"k": list(range(1, 26, 2))},
}


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with malicious as the positive class."""

    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fn", "fp", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


def confusion(actual, predicted) -> ConfusionMatrix:
    a = np.asarray([int(v) for v in actual], dtype=np.int64)
    p = np.asarray([int(v) for v in predicted], dtype=np.int64)
    if a.shape != p.shape:
        raise ShapeError(f"{len(a)} actual labels but {len(p)} predictions")
    if len(a) == 0:
        raise ShapeError("cannot build a confusion matrix from zero records")
    pos_a, pos_p = a == 1, p == 1
    return ConfusionMatrix(
        tp=int(np.sum(pos_a & pos_p)),
        fn=int(np.sum(pos_a & ~pos_p)),
        fp=int(np.sum(~pos_a & pos_p)),
        tn=int(np.sum(~pos_a & ~pos_p)),
    )


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float | None
    precision: float | None
    recall: float | None
    f_measure: float | None

    def get(self, metric: str) -> float | None:
        if metric not in METRICS:
            raise ConfigurationError(f"unknown metric {metric!r}")
        return getattr(self, metric)

    def as_dict(self) -> dict:
        return {m: getattr(self, m) for m in METRICS}


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def f_measure(precision: float | None, recall: float | None) -> float | None:
    """Harmonic mean of precision and recall; ``None`` if undefined."""
    if precision is None or recall is None or precision + recall == 0:
        return None
    return 2.0 * precision * recall / (precision + recall)


def metrics(c: ConfusionMatrix) -> MetricsReport:
    if c.total < 1:
        raise ShapeError("confusion matrix is empty")
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    return MetricsReport(
        accuracy=(c.tp + c.tn) / c.total,
        precision=precision,
        recall=recall,
        f_measure=f_measure(precision, recall),
    )


# ---------------------------------------------------------------------------
# Cross-validation


@dataclass(frozen=True)
class FoldResult:
    repeat: int
    fold: int
    seed: int
    confusion: ConfusionMatrix
    report: MetricsReport


def _mean_defined(values) -> tuple[float | None, int]:
    defined = [v for v in values if v is not None]
    if not defined:
        return None, len(values)
    return math.fsum(defined) / len(defined), len(values) - len(defined)


@dataclass(frozen=True)
class CVResult:
    """Fold-level reports of one model on one dataset, repeat-major.

    ``seeds`` holds the fold-assignment seed of every repeat, which is what
    makes two results pairable.
    """

    model: str
    dataset: str
    k: int
    seeds: tuple[int, ...]
    folds: tuple[FoldResult, ...]
    mask: str | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def repeats(self) -> int:
        return len(self.seeds)

    def fold_values(self, metric: str) -> list[float | None]:
        return [f.report.get(metric) for f in self.folds]

    def repeat_means(self, metric: str) -> list[float | None]:
        out = []
        for r in range(self.repeats):
            vals = [f.report.get(metric) for f in self.folds if f.repeat == r]
            out.append(_mean_defined(vals)[0])
        return out

    def undefined_count(self, metric: str) -> int:
        return sum(v is None for v in self.fold_values(metric))

    def mean(self, metric: str) -> float | None:
        return _mean_defined(self.repeat_means(metric))[0]

    def std(self, metric: str) -> float | None:
        """Sample standard deviation of the repeat-level means (0 for one repeat)."""
        vals = [v for v in self.repeat_means(metric) if v is not None]
        if not vals:
            return None
        if len(vals) == 1:
            return 0.0
        return float(np.std(vals, ddof=1))

    def summary(self) -> dict:
        return {m: (self.mean(m), self.std(m)) for m in METRICS}


def fold_seed(repeat_seed: int, fold: int) -> int:
    """Model-fitting seed for one fold, derived from the repeat seed."""
    return int(np.random.SeedSequence([repeat_seed, fold]).generate_state(1)[0])


def derive_seeds(master_seed: int, repeats: int) -> list[int]:
    """Independent fold-assignment seeds for ``repeats`` repeats."""
    children = np.random.SeedSequence(master_seed).spawn(repeats)
    return [int(c.generate_state(1)[0]) for c in children]


def _check_seed(seed) -> int:
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ConfigurationError(f"seeds must be non-negative integers, got {seed!r}")
    return int(seed)


def _prepare(d: Dataset, scaling: str, mask) -> Dataset:
    if scaling not in SCALING_MODES:
        raise ConfigurationError(f"scaling must be one of {SCALING_MODES}, got {scaling!r}")
    if mask is not None:
        d = apply_mask(d, mask)
    if scaling == "global" and not d.scaled:
        d = min_max_scale(d)
    if scaling == "per_fold" and d.scaled:
        raise ConfigurationError("per-fold scaling needs an unscaled dataset")
    return d


def evaluate_split(spec: ClassifierSpec, d: Dataset, train_idx, test_idx, seed: int,
                   scaling: str = "global") -> ConfusionMatrix:
    """Fit on ``train_idx`` and count outcomes on ``test_idx``."""
    train, test = d.subset(train_idx), d.subset(test_idx)
    if scaling == "per_fold":
        params = fit_scaling(train.X)
        train, test = min_max_scale(train, params), min_max_scale(test, params)
    model = fit(spec, train, seed)
    return confusion(test.y, model.predict(test.X))


def _run_fold(spec, d, folds, repeat, fold, repeat_seed, scaling):
    train_idx, test_idx = folds.split(fold)
    seed = fold_seed(repeat_seed, fold)
    try:
        c = evaluate_split(spec, d, train_idx, test_idx, seed, scaling)
    except MaldomainError as exc:
        raise type(exc)(f"{spec.name}: repeat {repeat}, fold {fold}: {exc}") from exc
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        raise FitError(f"{spec.name}: repeat {repeat}, fold {fold}: {exc}") from exc
    return FoldResult(repeat, fold, seed, c, metrics(c))


def _collect(spec, d, k, seeds, scaling, n_jobs, dataset_name, mask, folds=None):
    assignments = [folds if folds is not None else stratified_k_folds(d, k, s) for s in seeds]
    tasks = [(r, f) for r in range(len(seeds)) for f in range(k)]
    if n_jobs == 1:
        results = [_run_fold(spec, d, assignments[r], r, f, seeds[r], scaling) for r, f in tasks]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(
            delayed(_run_fold)(spec, d, assignments[r], r, f, seeds[r], scaling)
            for r, f in tasks
        )
    result = CVResult(spec.name, dataset_name, k, tuple(seeds), tuple(results), mask)
    for m in METRICS:
        n_undef = result.undefined_count(m)
        if n_undef:
            log.warning("%s on %s: %s undefined in %d of %d folds, excluded from averages",
                        spec.name, dataset_name, m, n_undef, len(results))
    return result


def cross_validate(spec: ClassifierSpec, d: Dataset, k: int = 10, seed: int = 0, *,
                   folds: FoldAssignment | None = None, scaling: str = "global", mask=None,
                   n_jobs: int = 1, dataset_name: str = "") -> CVResult:
    """One repeat of stratified ``k``-fold CV.

    ``folds`` overrides the assignment drawn from ``seed`` (the seed still
    drives the per-fold model seeds).
    """
    seed = _check_seed(seed)
    mask_str = None if mask is None else _mask_str(mask)
    d = _prepare(d, scaling, mask)
    if folds is not None:
        if len(folds.assignment) != len(d):
            raise ShapeError("fold assignment does not match the dataset length")
        k = folds.k
    return _collect(spec, d, k, [seed], scaling, n_jobs, dataset_name, mask_str, folds)


def repeated_cv(spec: ClassifierSpec, d: Dataset, k: int = 10, repeats: int = 10,
                master_seed: int = 0, *, seeds: Sequence[int] | None = None,
                scaling: str = "global", mask=None, n_jobs: int = 1,
                dataset_name: str = "") -> CVResult:
    """``repeats`` independent stratified CV runs.

    Repeat seeds come from :func:`derive_seeds` unless ``seeds`` is given,
    so two specs run with the same ``master_seed`` see identical folds.
    Folds run in parallel with ``n_jobs`` > 1; results are reduced in
    (repeat, fold) order either way.
    """
    if repeats < 1:
        raise ConfigurationError("repeats must be >= 1")
    if seeds is None:
        seeds = derive_seeds(_check_seed(master_seed), repeats)
    else:
        seeds = [_check_seed(s) for s in seeds]
        if len(seeds) != repeats:
            raise ConfigurationError(f"{len(seeds)} seeds given for {repeats} repeats")
    mask_str = None if mask is None else _mask_str(mask)
    d = _prepare(d, scaling, mask)
    return _collect(spec, d, k, seeds, scaling, n_jobs, dataset_name, mask_str)


def _mask_str(mask) -> str:
    return mask_to_string(as_mask(mask))


# ---------------------------------------------------------------------------
# Tuning


def expand_grid(grid) -> list[dict]:
    """Grid points in order: a dict of value lists expands as a lattice
    (last key varies fastest); a list of dicts is taken as is."""
    if isinstance(grid, dict):
        keys = list(grid)
        for key in keys:
            if not isinstance(grid[key], (list, tuple)) or not grid[key]:
                raise ConfigurationError(f"grid values for {key!r} must be a non-empty list")
        return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    points = [dict(p) for p in grid]
    if not points:
        raise ConfigurationError("grid is empty")
    return points


@dataclass(frozen=True)
class GridSearchResult:
    best: ClassifierSpec
    best_score: float
    points: tuple[dict, ...]
    scores: tuple[float | None, ...]


def grid_search(family, grid, d: Dataset, seed: int = 0, *, k: int = 5,
                base: dict | None = None, scaling: str = "global") -> GridSearchResult:
    """Score every grid point by mean F-measure over one shared ``k``-fold split.

    Ties go to the earliest point in grid order.
    """
    family = Family.parse(family) if isinstance(family, str) else family
    points = expand_grid(grid)
    if not points:
        raise ConfigurationError("grid is empty")
    seed = _check_seed(seed)
    d = _prepare(d, scaling, None)
    folds = stratified_k_folds(d, k, seed)
    scores: list[float | None] = []
    best_i, best_score = -1, -math.inf
    for i, point in enumerate(points):
        spec = ClassifierSpec(family, {**(base or {}), **point})
        res = cross_validate(spec, d, k, seed, folds=folds, scaling=scaling)
        score = res.mean("f_measure")
        scores.append(score)
        log.info("grid point %s: F-measure %s", point, score)
        if score is not None and score > best_score:
            best_i, best_score = i, score
    if best_i < 0:
        raise TuningError(f"every grid point for {family.value} gave an undefined F-measure")
    best = ClassifierSpec(family, {**(base or {}), **points[best_i]})
    return GridSearchResult(best, best_score, tuple(points), tuple(scores))


def grid_tune(family, grid, d: Dataset, seed: int = 0, **kwargs) -> ClassifierSpec:
    return grid_search(family, grid, d, seed, **kwargs).best


# ---------------------------------------------------------------------------
# Reports


def _fmt(v: float | None, digits: int | None = None) -> str:
    if v is None:
        return "NA"
    if digits is None:
        return repr(float(v))
    return f"{v:.{digits}f}"


def summary_rows(results: Iterable[CVResult]) -> list[dict]:
    rows = []
    for res in results:
        for m in METRICS:
            rows.append({"model": res.model, "dataset": res.dataset, "metric": m,
                         "mean": res.mean(m), "std": res.std(m)})
    return rows


def summary_csv(results: Iterable[CVResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "dataset", "metric", "mean", "std"])
    for row in summary_rows(results):
        w.writerow([row["model"], row["dataset"], row["metric"], _fmt(row["mean"]),
                    _fmt(row["std"])])
    return buf.getvalue()


def folds_csv(results: Iterable[CVResult]) -> str:
    """Every fold of every result, for paired tests downstream."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "dataset", "repeat", "fold", "repeat_seed", "tp", "fn", "fp", "tn",
                *METRICS])
    for res in results:
        for f in res.folds:
            c = f.confusion
            w.writerow([res.model, res.dataset, f.repeat, f.fold, res.seeds[f.repeat],
                        c.tp, c.fn, c.fp, c.tn, *(_fmt(f.report.get(m)) for m in METRICS)])
    return buf.getvalue()


def format_table(results: Iterable[CVResult], title: str = "", digits: int = 4) -> str:
    """Aligned text table, one row per model, ``mean (std)`` per metric."""
    header = ["Model", *(METRIC_TITLES[m] for m in METRICS)]
    body = []
    for res in results:
        cells = [res.model if not res.mask else f"{res.model} [{res.mask}]"]
        for m in METRICS:
            cells.append(f"{_fmt(res.mean(m), digits)} ({_fmt(res.std(m), digits)})")
        body.append(cells)
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]

    def line(cells):
        first = cells[0].ljust(widths[0])
        rest = (c.rjust(w) for c, w in zip(cells[1:], widths[1:]))
        return "  ".join([first, *rest]).rstrip()

    out = [title] if title else []
    out += [line(header), "  ".join("-" * w for w in widths)]
    out += [line(r) for r in body]
    return "\n".join(out) + "\n"


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")
