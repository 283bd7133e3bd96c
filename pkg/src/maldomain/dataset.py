"""Domain records, CSV ingestion, scaling, stratified folds and masking.

A :class:`Dataset` stores its features as a read-only ``(n, d)`` float
matrix and its labels as a 0/1 vector (1 = malicious). Every operation
returns a new dataset; nothing is mutated in place.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DataError,
    InvalidSubsetError,
    LabelError,
    ParseError,
    SchemaError,
)

FEATURE_NAMES: tuple[str, ...] = (
    "moz_domain_authority",
    "moz_rank",
    "moz_backlinks",
    "majestic_citation_flow",
    "majestic_trust_flow",
    "majestic_backlinks",
    "majestic_ref_domains",
    "facebook_shares",
    "twitter_tweets",
    "google_plus_ones",
    "google_page_rank",
    "google_page_speed",
    "alexa_rank",
    "alexa_reach_1m",
    "alexa_reach_3m",
    "alexa_median_load",
)
N_FEATURES = len(FEATURE_NAMES)

# Columns that carry class signal in generated data; the rest are noise.
INFORMATIVE_FEATURES: tuple[int, ...] = (0, 1, 4, 10, 12, 13)


class Label(enum.IntEnum):
    BENIGN = 0
    MALICIOUS = 1

    @classmethod
    def parse(cls, token: str) -> "Label":
        t = token.strip().lower()
        if t == "malicious":
            return cls.MALICIOUS
        if t == "benign":
            return cls.BENIGN
        raise LabelError(f"unknown label token {token!r}")

    @property
    def token(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class DomainRecord:
    domain_id: str
    features: tuple[float, ...]
    label: Label


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable labelled feature matrix.

    Attributes
    ----------
    feature_names : tuple of str
        Column schema, in order.
    X : ndarray, shape (n, d)
    y : ndarray of int8, shape (n,)
        1 for malicious, 0 for benign.
    domain_ids : tuple of str
    scaled : bool
    scaling_params : ndarray, shape (d, 2) or None
        Per-feature ``(min, max)`` used by :func:`min_max_scale`.
    """

    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    domain_ids: tuple[str, ...] = ()
    scaled: bool = False
    scaling_params: np.ndarray | None = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        if X.ndim != 2:
            raise DataError("feature matrix must be 2-D")
        n, d = X.shape
        if d != len(self.feature_names):
            raise SchemaError(
                f"{d} feature columns but schema names {len(self.feature_names)}"
            )
        if len(set(self.feature_names)) != d:
            raise SchemaError("feature names must be unique")
        if y.shape != (n,):
            raise DataError("label vector length does not match record count")
        if not np.all((y == 0) | (y == 1)):
            raise LabelError("labels must be 0 (benign) or 1 (malicious)")
        if not np.all(np.isfinite(X)):
            raise ParseError("feature values must be finite")
        ids = tuple(self.domain_ids) or tuple(f"r{i}" for i in range(n))
        if len(ids) != n:
            raise DataError("domain_ids length does not match record count")
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "y", _readonly(y.astype(np.int8)))
        object.__setattr__(self, "domain_ids", ids)
        if self.scaling_params is not None:
            object.__setattr__(
                self, "scaling_params", _readonly(np.asarray(self.scaling_params, float))
            )

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def records(self) -> list[DomainRecord]:
        return [
            DomainRecord(i, tuple(float(v) for v in row), Label(int(lab)))
            for i, row, lab in zip(self.domain_ids, self.X, self.y)
        ]

    def class_counts(self) -> tuple[int, int]:
        """Return ``(n_benign, n_malicious)``."""
        n_mal = int(self.y.sum())
        return len(self) - n_mal, n_mal

    def subset(self, index: Sequence[int] | np.ndarray) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            self.feature_names,
            self.X[index],
            self.y[index],
            tuple(self.domain_ids[i] for i in np.arange(len(self))[index]),
            self.scaled,
            self.scaling_params,
        )

    @classmethod
    def from_records(cls, records: Sequence[DomainRecord], feature_names=FEATURE_NAMES):
        X = np.array([r.features for r in records], dtype=np.float64).reshape(
            len(records), len(feature_names)
        )
        y = np.array([int(r.label) for r in records], dtype=np.int8)
        return cls(tuple(feature_names), X, y, tuple(r.domain_id for r in records))


# ---------------------------------------------------------------------------
# CSV


def load_csv(path: str | Path, feature_names: Sequence[str] = FEATURE_NAMES) -> Dataset:
    """Read a ``domain_id,<features>,label`` CSV file into an unscaled dataset."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        for col in ("domain_id", *feature_names, "label"):
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}", column=col)
        id_col = header.index("domain_id")
        label_col = header.index("label")
        feat_cols = [header.index(name) for name in feature_names]

        ids, rows, labels = [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}",
                    row=row_no,
                )
            values = []
            for j, name in zip(feat_cols, feature_names):
                cell = row[j].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {row_no}: non-numeric value {cell!r} for {name}",
                        row=row_no,
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(
                        f"{path}: row {row_no}: non-finite value {cell!r} for {name}",
                        row=row_no,
                    )
                values.append(v)
            try:
                labels.append(int(Label.parse(row[label_col])))
            except LabelError as exc:
                raise LabelError(f"{path}: row {row_no}: {exc}") from None
            ids.append(row[id_col].strip())
            rows.append(values)

    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_names))
    return Dataset(tuple(feature_names), X, np.array(labels, dtype=np.int8), tuple(ids))


def write_csv(d: Dataset, path: str | Path) -> None:
    """Write ``d`` in the ingestion schema. Floats use ``repr`` so reloads are exact."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["domain_id", *d.feature_names, "label"])
        for did, row, lab in zip(d.domain_ids, d.X, d.y):
            w.writerow([did, *(repr(float(v)) for v in row), Label(int(lab)).token])


def write_scaling_params(d: Dataset, path: str | Path) -> None:
    if d.scaling_params is None:
        raise DataError("dataset carries no scaling parameters")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "min", "max"])
        for name, (lo, hi) in zip(d.feature_names, d.scaling_params):
            w.writerow([name, repr(float(lo)), repr(float(hi))])


# ---------------------------------------------------------------------------
# Scaling


def fit_scaling(X: np.ndarray) -> np.ndarray:
    return np.column_stack([X.min(axis=0), X.max(axis=0)])


def apply_scaling(X: np.ndarray, params: np.ndarray) -> np.ndarray:
    lo, hi = params[:, 0], params[:, 1]
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = (X - lo) / safe
    # constant columns map to 0
    out[:, span <= 0] = 0.0
    return out


def min_max_scale(d: Dataset, params: np.ndarray | None = None) -> Dataset:
    """Map every feature to ``[0, 1]`` with ``(x - min) / (max - min)``.

    ``params`` lets a caller scale with bounds fitted elsewhere (e.g. a
    training fold); values outside those bounds are not clipped.
    """
    if d.scaled:
        raise DataError("dataset is already scaled")
    if params is None:
        params = fit_scaling(d.X)
    params = np.asarray(params, dtype=np.float64)
    X = apply_scaling(d.X, params)
    return Dataset(d.feature_names, X, d.y, d.domain_ids, True, params)


def inverse_scale(d: Dataset) -> Dataset:
    if not d.scaled or d.scaling_params is None:
        raise DataError("dataset is not scaled")
    lo, hi = d.scaling_params[:, 0], d.scaling_params[:, 1]
    X = d.X * (hi - lo) + lo
    return Dataset(d.feature_names, X, d.y, d.domain_ids, False, None)


# ---------------------------------------------------------------------------
# Folds


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    k: int
    assignment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "assignment", _readonly(np.asarray(self.assignment, np.int64)))

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(train_index, test_index)`` for one fold."""
        test = self.assignment == fold
        return np.flatnonzero(~test), np.flatnonzero(test)

    def __iter__(self):
        for f in range(self.k):
            yield self.split(f)

    def __eq__(self, other):
        return (
            isinstance(other, FoldAssignment)
            and self.k == other.k
            and np.array_equal(self.assignment, other.assignment)
        )


def stratified_k_folds(d: Dataset, k: int, seed: int) -> FoldAssignment:
    """Permute each class with a seeded RNG and deal it round-robin into ``k`` folds.

    The dealing position carries over from one class to the next so total
    fold sizes also stay within one of each other.
    """
    if k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(d), dtype=np.int64)
    offset = 0
    for cls in (Label.MALICIOUS, Label.BENIGN):
        members = np.flatnonzero(d.y == cls)
        if len(members) < k:
            raise ConfigurationError(
                f"class {cls.token} has {len(members)} records, fewer than k={k}"
            )
        perm = rng.permutation(members)
        assignment[perm] = (np.arange(len(perm)) + offset) % k
        offset = (offset + len(perm)) % k
    return FoldAssignment(k, assignment)


# ---------------------------------------------------------------------------
# Masks


def as_mask(bits, length: int | None = None) -> np.ndarray:
    """Coerce a 0/1 string, sequence or array into a boolean mask."""
    if isinstance(bits, str):
        if set(bits) - {"0", "1"}:
            raise InvalidSubsetError(f"mask string must be 0/1 characters: {bits!r}")
        arr = np.array([c == "1" for c in bits], dtype=bool)
    else:
        arr = np.asarray(bits).astype(bool)
    if arr.ndim != 1:
        raise InvalidSubsetError("mask must be 1-D")
    if length is not None and len(arr) != length:
        raise InvalidSubsetError(f"mask length {len(arr)} != schema length {length}")
    return arr


def mask_to_string(mask) -> str:
    return "".join("1" if b else "0" for b in np.asarray(mask, dtype=bool))


def apply_mask(d: Dataset, mask) -> Dataset:
    """Keep only the columns whose mask bit is set."""
    m = as_mask(mask, d.n_features)
    if not m.any():
        raise InvalidSubsetError("all-zero feature mask selects no features")
    names = tuple(n for n, keep in zip(d.feature_names, m) if keep)
    params = None if d.scaling_params is None else d.scaling_params[m]
    return Dataset(names, d.X[:, m], d.y, d.domain_ids, d.scaled, params)


# ---------------------------------------------------------------------------
# Synthetic data


def generate_synthetic(n_per_class: int, separation: float, noise_seed: int,
                       distribution: str = "lognormal") -> Dataset:
    """Balanced synthetic dataset over the 16-feature schema.

    Each column in :data:`INFORMATIVE_FEATURES` is built from a unit-variance
    Gaussian latent whose class means differ by ``separation / sqrt(6)``, so
    the two classes sit ``separation`` within-class standard deviations apart
    jointly over the informative block. With ``distribution="lognormal"``
    (default) the column is the exponential of that latent, giving the heavy
    right tails typical of popularity and traffic counts; ``"gaussian"``
    keeps the latent as is. The remaining ten columns are uniform noise with
    the same law for both classes. Every column carries its own scale
    factor, and values are emitted unscaled.
    """
    if n_per_class < 1:
        raise ConfigurationError("n_per_class must be >= 1")
    if separation < 0:
        raise ConfigurationError("separation must be >= 0")
    if distribution not in ("lognormal", "gaussian"):
        raise ConfigurationError(f"unknown distribution {distribution!r}")
    rng = np.random.default_rng(noise_seed)
    n = 2 * n_per_class
    y = np.repeat(np.array([1, 0], dtype=np.int8), n_per_class)
    shift = separation / math.sqrt(len(INFORMATIVE_FEATURES))
    X = np.empty((n, N_FEATURES))
    informative = set(INFORMATIVE_FEATURES)
    for j in range(N_FEATURES):
        scale = 10.0 * (j + 1)
        if j in informative:
            z = rng.standard_normal(n) + shift * y
            X[:, j] = scale * (np.exp(z) if distribution == "lognormal" else z)
        else:
            X[:, j] = scale * rng.uniform(0.0, 1.0, size=n)
    order = rng.permutation(n)
    ids = tuple(f"syn-{i:05d}" for i in range(n))
    return Dataset(FEATURE_NAMES, X[order], y[order], ids)
