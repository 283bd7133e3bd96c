from .base import (
    ALL_FAMILIES,
    ENSEMBLE_FAMILIES,
    SINGLE_FAMILIES,
    BaseModel,
    C45Params,
    ClassifierSpec,
    Family,
    KNNParams,
    MLPParams,
    NBParams,
    SVMParams,
    fit,
    make_params,
    predict,
    predict_score,
)
from .mlp import mlp_loss, mlp_loss_gradient
from .svm import svm_solve
from .tree import gain_ratio as c45_gain_ratio

__all__ = [
    "ALL_FAMILIES",
    "ENSEMBLE_FAMILIES",
    "SINGLE_FAMILIES",
    "BaseModel",
    "C45Params",
    "ClassifierSpec",
    "Family",
    "KNNParams",
    "MLPParams",
    "NBParams",
    "SVMParams",
    "c45_gain_ratio",
    "fit",
    "make_params",
    "mlp_loss",
    "mlp_loss_gradient",
    "predict",
    "predict_score",
    "svm_solve",
]
