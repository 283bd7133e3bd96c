"""Model families, parameter records and the uniform fit/predict contract."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from ..dataset import Dataset, Label
from ..errors import ConfigurationError, FitError, ShapeError


class Family(str, enum.Enum):
    KNN = "knn"
    NAIVE_BAYES = "nb"
    C45 = "c45"
    MLP = "ann"
    SVM = "svm"
    BAGGING = "bagging"
    ADABOOST = "adaboost"
    RF = "rf"
    GBM = "gbm"

    @property
    def is_ensemble(self) -> bool:
        return self in ENSEMBLE_FAMILIES

    @classmethod
    def parse(cls, token: str) -> "Family":
        t = token.strip().lower()
        aliases = {"naive_bayes": "nb", "bayes": "nb", "mlp": "ann", "c4.5": "c45"}
        t = aliases.get(t, t)
        try:
            return cls(t)
        except ValueError:
            valid = ", ".join(f.value for f in cls)
            raise ConfigurationError(f"unknown model {token!r} (valid: {valid})") from None


SINGLE_FAMILIES = (Family.SVM, Family.MLP, Family.KNN, Family.C45, Family.NAIVE_BAYES)
ENSEMBLE_FAMILIES = (Family.RF, Family.GBM, Family.ADABOOST, Family.BAGGING)
ALL_FAMILIES = SINGLE_FAMILIES + ENSEMBLE_FAMILIES


def _positive_int(name, v, allow_none=False):
    if v is None and allow_none:
        return
    if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
        raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")


def _positive_real(name, v):
    if not isinstance(v, (int, float, np.floating)) or isinstance(v, bool) or not v > 0:
        raise ConfigurationError(f"{name} must be a positive real, got {v!r}")


class Params:
    """Mixin for the per-family parameter dataclasses."""

    def validate(self):
        pass

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class KNNParams(Params):
    k: int = 10

    def validate(self):
        _positive_int("k", self.k)


@dataclass(frozen=True)
class NBParams(Params):
    variance_floor: float = 1e-9

    def validate(self):
        _positive_real("variance_floor", self.variance_floor)


@dataclass(frozen=True)
class C45Params(Params):
    confidence: float = 0.05
    min_leaf: int = 2
    max_depth: int | None = None
    prune: bool = True

    def validate(self):
        if not 0 < self.confidence < 1:
            raise ConfigurationError(f"confidence must lie in (0, 1), got {self.confidence!r}")
        _positive_int("min_leaf", self.min_leaf)
        _positive_int("max_depth", self.max_depth, allow_none=True)


@dataclass(frozen=True)
class MLPParams(Params):
    hidden_size: int = 5
    max_iterations: int = 2000
    weight_init_scale: float = 0.5
    l2_decay: float = 1e-4
    initial_step: float = 1.0
    armijo: float = 1e-4
    gradient_tolerance: float = 1e-6

    def validate(self):
        _positive_int("hidden_size", self.hidden_size)
        _positive_int("max_iterations", self.max_iterations)
        _positive_real("weight_init_scale", self.weight_init_scale)
        if self.l2_decay < 0:
            raise ConfigurationError("l2_decay must be >= 0")
        _positive_real("initial_step", self.initial_step)
        if not 0 < self.armijo < 1:
            raise ConfigurationError("armijo must lie in (0, 1)")
        _positive_real("gradient_tolerance", self.gradient_tolerance)


@dataclass(frozen=True)
class SVMParams(Params):
    gamma: float = 0.5
    cost: float = 8.0
    tolerance: float = 1e-3
    max_iterations: int = 1_000_000
    kernel: str = "rbf"

    def validate(self):
        if self.kernel != "rbf":
            raise ConfigurationError("only the rbf kernel is supported")
        _positive_real("gamma", self.gamma)
        _positive_real("cost", self.cost)
        _positive_real("tolerance", self.tolerance)
        _positive_int("max_iterations", self.max_iterations)


def _params_class(family: Family):
    if family is Family.KNN:
        return KNNParams
    if family is Family.NAIVE_BAYES:
        return NBParams
    if family is Family.C45:
        return C45Params
    if family is Family.MLP:
        return MLPParams
    if family is Family.SVM:
        return SVMParams
    from .. import ensembles

    return {
        Family.BAGGING: ensembles.BaggingParams,
        Family.ADABOOST: ensembles.AdaBoostParams,
        Family.RF: ensembles.RFParams,
        Family.GBM: ensembles.GBMParams,
    }[family]


@dataclass(frozen=True)
class ClassifierSpec:
    family: Family
    params: Params = field(default=None)

    def __post_init__(self):
        fam = Family.parse(self.family) if isinstance(self.family, str) else self.family
        object.__setattr__(self, "family", fam)
        cls = _params_class(fam)
        if self.params is None:
            object.__setattr__(self, "params", cls())
        elif isinstance(self.params, dict):
            object.__setattr__(self, "params", make_params(fam, self.params))
        elif not isinstance(self.params, cls):
            raise ConfigurationError(
                f"{fam.value} expects {cls.__name__}, got {type(self.params).__name__}"
            )
        self.params.validate()

    @classmethod
    def create(cls, family, **overrides) -> "ClassifierSpec":
        return cls(family, overrides or None)

    def with_params(self, **overrides) -> "ClassifierSpec":
        return ClassifierSpec(self.family, replace(self.params, **overrides))

    @property
    def name(self) -> str:
        return self.family.value


def make_params(family: Family, values: dict) -> Params:
    cls = _params_class(family)
    unknown = set(values) - set(cls.field_names())
    if unknown:
        raise ConfigurationError(
            f"unknown parameter(s) for {family.value}: {', '.join(sorted(unknown))}"
        )
    return cls(**values)


class BaseModel:
    """Fitted binary classifier. Subclasses implement ``decision_function``.

    ``decision_function`` is the score: higher means more malicious and the
    label is malicious exactly when the score is ``>= 0``.
    """

    family: Family
    n_features: int

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(
                f"{self.family.value} model expects {self.n_features} features, "
                f"got input of shape {np.shape(X)}"
            )
        return X

    def decision_function(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0).astype(np.int8)


def check_training_data(train: Dataset, need_scaled: bool = True):
    if len(train) == 0:
        raise FitError("empty training set")
    n_ben, n_mal = train.class_counts()
    if n_ben == 0 or n_mal == 0:
        raise FitError("training set contains a single class")
    if need_scaled and not train.scaled:
        raise FitError("training set must be scaled to [0, 1] before fitting")


def fit(spec: ClassifierSpec, train: Dataset, seed: int = 0, *, require_scaled: bool = True):
    """Fit any of the nine model families on ``train``."""
    check_training_data(train, require_scaled)
    X, y = train.X, train.y
    fam, p = spec.family, spec.params
    if fam is Family.KNN:
        from .knn import KNNModel

        return KNNModel.fit(X, y, p)
    if fam is Family.NAIVE_BAYES:
        from .naive_bayes import GaussianNBModel

        return GaussianNBModel.fit(X, y, p)
    if fam is Family.C45:
        from .tree import C45Model

        return C45Model.fit(X, y, p)
    if fam is Family.MLP:
        from .mlp import MLPModel

        return MLPModel.fit(X, y, p, seed)
    if fam is Family.SVM:
        from .svm import SVMModel

        return SVMModel.fit(X, y, p)
    from .. import ensembles

    return ensembles.fit_ensemble(spec, X, y, seed)


def predict(model: BaseModel, x):
    """Label for one feature vector, or a 0/1 array for a matrix."""
    out = model.predict(x)
    if np.ndim(x) == 1:
        return Label(int(out[0]))
    return out


def predict_score(model: BaseModel, x):
    out = model.decision_function(x)
    if np.ndim(x) == 1:
        return float(out[0])
    return out
