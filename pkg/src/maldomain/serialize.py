"""Versioned JSON persistence for fitted models.

Arrays are stored with dtype and shape, and floats are written with
``repr`` precision, so a reloaded model reproduces every score bit for bit.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .classifiers.base import BaseModel, Family
from .classifiers.knn import KNNModel
from .classifiers.mlp import MLPModel
from .classifiers.naive_bayes import GaussianNBModel
from .classifiers.svm import SVMModel
from .classifiers.tree import C45Model, TreeArrays, TreeModel
from .ensembles import EnsembleModel
from .errors import DataError

FORMAT = "maldomain-model"
VERSION = 1

_TYPES = {cls.__name__: cls for cls in (
    KNNModel, GaussianNBModel, TreeModel, C45Model, MLPModel, SVMModel, EnsembleModel, TreeArrays,
)}


def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.ravel().tolist(), "dtype": obj.dtype.str, "shape": list(obj.shape)}
    if isinstance(obj, Family):
        return {"__family__": obj.value}
    if dataclasses.is_dataclass(obj) and type(obj).__name__ in _TYPES:
        return {"__type__": type(obj).__name__,
                "fields": {f.name: _encode(getattr(obj, f.name)) for f in dataclasses.fields(obj)}}
    if isinstance(obj, (list, tuple)):
        return {"__tuple__": [_encode(v) for v in obj]}
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.array(obj["__array__"], dtype=np.dtype(obj["dtype"])).reshape(obj["shape"])
        if "__family__" in obj:
            return Family(obj["__family__"])
        if "__tuple__" in obj:
            return tuple(_decode(v) for v in obj["__tuple__"])
        if "__type__" in obj:
            cls = _TYPES.get(obj["__type__"])
            if cls is None:
                raise DataError(f"unknown model type {obj['__type__']!r}")
            return cls(**{k: _decode(v) for k, v in obj["fields"].items()})
    return obj


def dumps(model: BaseModel) -> str:
    payload = {"format": FORMAT, "version": VERSION, "model": _encode(model)}
    return json.dumps(payload, sort_keys=True)


def loads(text: str) -> BaseModel:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}") from exc
    if payload.get("format") != FORMAT:
        raise DataError("not a saved model")
    if payload.get("version") != VERSION:
        raise DataError(f"unsupported model format version {payload.get('version')!r}")
    return _decode(payload["model"])


def save_model(model: BaseModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def load_model(path: str | Path) -> BaseModel:
    return loads(Path(path).read_text(encoding="utf-8"))
