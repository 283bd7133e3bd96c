"""Tree ensembles: bagging, AdaBoost.M1, random forest and gradient boosting.

Every member of an ensemble gets its own RNG stream spawned from the
ensemble seed, so members could be fitted in any order (or in parallel)
without changing the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .classifiers.base import (
    BaseModel,
    ClassifierSpec,
    Family,
    Params,
    _positive_int,
    _positive_real,
    check_training_data,
)
from .classifiers.tree import (
    TreeArrays,
    grow_classification_tree,
    grow_regression_tree,
    presort,
)
from .dataset import Dataset
from .errors import ConfigurationError

ALPHA_CAP = math.log(1e6)


@dataclass(frozen=True)
class BaggingParams(Params):
    n_learners: int = 100
    max_depth: int | None = 5
    min_leaf: int = 2

    def validate(self):
        _positive_int("n_learners", self.n_learners)
        _positive_int("max_depth", self.max_depth, allow_none=True)
        _positive_int("min_leaf", self.min_leaf)


@dataclass(frozen=True)
class AdaBoostParams(Params):
    n_learners: int = 100
    max_depth: int = 3
    min_leaf: int = 2

    def validate(self):
        _positive_int("n_learners", self.n_learners)
        _positive_int("max_depth", self.max_depth)
        _positive_int("min_leaf", self.min_leaf)


@dataclass(frozen=True)
class RFParams(Params):
    n_trees: int = 1000
    mtry: int = 4
    min_leaf: int = 1
    bootstrap: bool = True

    def validate(self):
        _positive_int("n_trees", self.n_trees)
        _positive_int("mtry", self.mtry)
        _positive_int("min_leaf", self.min_leaf)


@dataclass(frozen=True)
class GBMParams(Params):
    n_trees: int = 5000
    min_obs_in_node: int = 10
    shrinkage: float = 0.1
    max_depth: int = 1

    def validate(self):
        if not isinstance(self.n_trees, (int, np.integer)) or self.n_trees < 0:
            raise ConfigurationError(f"n_trees must be a non-negative integer, got {self.n_trees!r}")
        _positive_int("min_obs_in_node", self.min_obs_in_node)
        _positive_real("shrinkage", self.shrinkage)
        _positive_int("max_depth", self.max_depth)


@dataclass(frozen=True, eq=False)
class EnsembleModel(BaseModel):
    """Fitted ensemble.

    ``weights`` are the AdaBoost learner weights, the GBM step sizes, or
    ones for the voting ensembles. ``init`` is the GBM intercept.
    ``trace`` records per-round diagnostics: weighted errors for AdaBoost,
    training deviance (stage 0 first) for GBM.
    """

    family: Family
    members: tuple
    weights: np.ndarray
    n_features: int
    init: float = 0.0
    trace: tuple = field(default=())

    def member_votes(self, X) -> np.ndarray:
        """``(n_members, n)`` array of member labels in {0, 1}."""
        X = self._check(X)
        if not self.members:
            return np.zeros((0, len(X)), dtype=np.int8)
        return np.stack([(t.leaf_malicious_fraction(X) >= 0.5) for t in self.members]).astype(
            np.int8
        )

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        fam = self.family
        if fam is Family.GBM:
            F = np.full(len(X), self.init)
            for tree, w in zip(self.members, self.weights):
                F += w * tree.value[tree.apply(X)]
            return F
        votes = self.member_votes(X)
        if fam is Family.ADABOOST:
            return self.weights @ (2.0 * votes - 1.0)
        if len(votes) == 0:
            return np.zeros(len(X))
        return 2.0 * votes.mean(axis=0) - 1.0


def member_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def bootstrap_indices(n_samples: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, n_samples, size=n_samples)


# ---------------------------------------------------------------------------


def _fit_bagging(p: BaggingParams, X, y, seed) -> EnsembleModel:
    trees = []
    for rng in member_rngs(seed, p.n_learners):
        idx = bootstrap_indices(len(X), rng)
        trees.append(grow_classification_tree(X[idx], y[idx], min_leaf=p.min_leaf,
                                              max_depth=p.max_depth))
    return EnsembleModel(Family.BAGGING, tuple(trees), np.ones(len(trees)), X.shape[1])


def _fit_rf(p: RFParams, X, y, seed) -> EnsembleModel:
    d = X.shape[1]
    mtry = min(p.mtry, d)
    trees = []
    for rng in member_rngs(seed, p.n_trees):
        idx = bootstrap_indices(len(X), rng) if p.bootstrap else np.arange(len(X))
        trees.append(grow_classification_tree(X[idx], y[idx], min_leaf=p.min_leaf,
                                              max_features=mtry, rng=rng))
    return EnsembleModel(Family.RF, tuple(trees), np.ones(len(trees)), d)


def adaboost_learner_weight(error: float) -> float:
    """``ln((1 - e) / e)``, capped at ``ln(1e6)`` for a perfect learner."""
    if error <= 0.0:
        return ALPHA_CAP
    return min(math.log((1.0 - error) / error), ALPHA_CAP)


def _fit_adaboost(p: AdaBoostParams, X, y, seed, weight_log=None) -> EnsembleModel:
    # seed is unused: the weighted fit is deterministic
    n = len(X)
    w = np.full(n, 1.0 / n)
    trees, alphas, errors = [], [], []
    for _ in range(p.n_learners):
        tree = grow_classification_tree(X, y, w, min_leaf=p.min_leaf, max_depth=p.max_depth)
        miss = (tree.leaf_malicious_fraction(X) >= 0.5) != (y == 1)
        eps = float(w[miss].sum())
        errors.append(eps)
        if eps >= 0.5:
            break
        alpha = adaboost_learner_weight(eps)
        trees.append(tree)
        alphas.append(alpha)
        if eps == 0.0:
            break
        w = w * np.exp(alpha * miss)
        w /= w.sum()
        if weight_log is not None:
            weight_log.append(w.copy())
    return EnsembleModel(Family.ADABOOST, tuple(trees), np.array(alphas), X.shape[1],
                         trace=tuple(errors))


def bernoulli_loss(y, F) -> float:
    """Negative Bernoulli log-likelihood summed over samples, as a function of the logit."""
    return float(np.sum(np.logaddexp(0.0, F) - y * F))


def bernoulli_deviance(y, F) -> float:
    return 2.0 * bernoulli_loss(y, F) / len(y)


def pseudo_residuals(y, F) -> np.ndarray:
    """Negative gradient of :func:`bernoulli_loss` with respect to ``F``."""
    return np.asarray(y, dtype=np.float64) - expit(F)


def initial_logit(y) -> float:
    pbar = float(np.mean(y))
    return math.log(pbar / (1.0 - pbar))


def _damp_leaves(tree: TreeArrays, leaves, y, F, step) -> TreeArrays:
    """Halve the step of any leaf whose own deviance would rise.

    Shrunken Newton steps almost never overshoot; this guard only bites
    when a leaf's hessian sum is tiny, and it keeps the training deviance
    monotone.
    """
    before = np.bincount(leaves, np.logaddexp(0.0, F) - y * F, minlength=tree.n_nodes)
    value = tree.value.copy()
    for _ in range(60):
        G = F + step * value[leaves]
        after = np.bincount(leaves, np.logaddexp(0.0, G) - y * G, minlength=tree.n_nodes)
        worse = after > before + 1e-12 * np.maximum(1.0, np.abs(before))
        if not worse.any():
            break
        value[worse] *= 0.5
    else:
        value[worse] = 0.0
    return TreeArrays(tree.feature, tree.threshold, tree.left, tree.right, value)


def _fit_gbm(p: GBMParams, X, y, seed) -> EnsembleModel:
    yf = y.astype(np.float64)
    F0 = initial_logit(yf)
    F = np.full(len(X), F0)
    order_t = presort(X)
    trees = []
    trace = [bernoulli_deviance(yf, F)]
    for _ in range(p.n_trees):
        prob = expit(F)
        r = yf - prob
        tree = grow_regression_tree(X, r, prob * (1.0 - prob), max_depth=p.max_depth,
                                    min_obs=p.min_obs_in_node, order_t=order_t)
        leaves = tree.apply(X)
        tree = _damp_leaves(tree, leaves, yf, F, p.shrinkage)
        F = F + p.shrinkage * tree.value[leaves]
        trees.append(tree)
        trace.append(bernoulli_deviance(yf, F))
    return EnsembleModel(Family.GBM, tuple(trees), np.full(len(trees), p.shrinkage),
                         X.shape[1], F0, tuple(trace))


_FITTERS = {
    Family.BAGGING: _fit_bagging,
    Family.ADABOOST: _fit_adaboost,
    Family.RF: _fit_rf,
    Family.GBM: _fit_gbm,
}


def fit_ensemble(spec: ClassifierSpec, X, y, seed: int = 0) -> EnsembleModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int8)
    return _FITTERS[spec.family](spec.params, X, y, seed)


def _fit(family, params, train: Dataset, seed):
    check_training_data(train)
    return fit_ensemble(ClassifierSpec(family, params), train.X, train.y, seed)


def bagging_fit(params: BaggingParams, train: Dataset, seed: int = 0) -> EnsembleModel:
    return _fit(Family.BAGGING, params, train, seed)


def adaboost_fit(params: AdaBoostParams, train: Dataset, seed: int = 0) -> EnsembleModel:
    return _fit(Family.ADABOOST, params, train, seed)


def rf_fit(params: RFParams, train: Dataset, seed: int = 0) -> EnsembleModel:
    return _fit(Family.RF, params, train, seed)


def gbm_fit(params: GBMParams, train: Dataset, seed: int = 0) -> EnsembleModel:
    return _fit(Family.GBM, params, train, seed)
