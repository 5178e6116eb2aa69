"""Model files: versioned JSON text.

Layout (all numbers are JSON floats written with Python's shortest
round-trip repr, so reloading is bit-exact)::

    {
      "format": "isbor-model",
      "version": 1,
      "theta": float,            RBF width
      "r": int,                  number of categories
      "b1": float,               first cut-point
      "deltas": [float] * (r-2), positive gaps between cut-points
      "sigma": float,            noise standard deviation
      "active": [int] * M,       training-row index of each basis
      "active_points": [[float] * d] * M,   basis centres (scaled space)
      "w": [float] * M,
      "alpha": [float] * M,
      "Sigma": [[float] * M] * M,           posterior weight covariance
      "scaler": null | {"mean": [float] * d, "scale": [float] * d},
      "label_values": null | [int] * r,     original label of each category
      "converged": bool,
      "n_iter": int,
      "log_marginal_history": [float],
      "stop_reason": "min_delta" | "no_move" | "max_its" | ""
    }
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .data import Scaler
from .errors import ParseError
from .likelihood import Thresholds
from .trainer import ModelState

FORMAT = "isbor-model"
VERSION = 1


def to_dict(model: ModelState) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "theta": float(model.theta),
        "r": int(model.r),
        "b1": float(model.b.b1),
        "deltas": [float(v) for v in model.b.deltas],
        "sigma": float(model.sigma),
        "active": [int(v) for v in model.active],
        "active_points": np.asarray(model.active_points, dtype=float).tolist(),
        "w": [float(v) for v in model.w],
        "alpha": [float(v) for v in model.alpha],
        "Sigma": np.asarray(model.Sigma, dtype=float).tolist(),
        "scaler": None if model.scaler is None else model.scaler.to_dict(),
        "label_values": None if model.label_values is None else [int(v) for v in model.label_values],
        "converged": bool(model.converged),
        "n_iter": int(model.n_iter),
        "log_marginal_history": [float(v) for v in model.log_marginal_history],
        "stop_reason": model.stop_reason,
    }


def dumps(model: ModelState) -> str:
    return json.dumps(to_dict(model), indent=1)


def save(model: ModelState, path) -> None:
    Path(path).write_text(dumps(model))


def _field(d, key, source):
    if key not in d:
        raise ParseError(f"missing field {key!r}", location=source)
    return d[key]


def _floats(value, key, source, shape=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"field {key!r} is not numeric", location=source) from None
    if shape is not None and arr.shape != shape:
        raise ParseError(f"field {key!r} has shape {arr.shape}, expected {shape}", location=source)
    return arr


def from_dict(d, source="<model>") -> ModelState:
    if not isinstance(d, dict):
        raise ParseError("top level is not an object", location=source)
    if d.get("format") != FORMAT:
        raise ParseError(f"not an {FORMAT} file (format={d.get('format')!r})", location=source)
    if d.get("version") != VERSION:
        raise ParseError(f"unsupported version {d.get('version')!r}, expected {VERSION}", location=source)
    r = int(_field(d, "r", source))
    w = _floats(_field(d, "w", source), "w", source)
    m = w.size
    pts = _floats(_field(d, "active_points", source), "active_points", source)
    if pts.ndim != 2 or pts.shape[0] != m:
        raise ParseError(f"field 'active_points' must be {m} x d", location=source)
    try:
        b = Thresholds(float(_field(d, "b1", source)),
                       _floats(_field(d, "deltas", source), "deltas", source, (r - 2,)))
    except ValueError as exc:
        raise ParseError(str(exc), location=f"{source}: thresholds") from None
    scaler = d.get("scaler")
    if scaler is not None:
        try:
            scaler = Scaler.from_dict(scaler)
        except (KeyError, TypeError, ValueError):
            raise ParseError("malformed scaler", location=source) from None
    sigma = float(_field(d, "sigma", source))
    theta = float(_field(d, "theta", source))
    if not (sigma > 0 and math.isfinite(sigma) and theta > 0 and math.isfinite(theta)):
        raise ParseError("sigma and theta must be positive and finite", location=source)
    lv = d.get("label_values")
    return ModelState(
        active=np.asarray(_field(d, "active", source), dtype=int),
        w=w,
        alpha=_floats(_field(d, "alpha", source), "alpha", source, (m,)),
        Sigma=_floats(_field(d, "Sigma", source), "Sigma", source, (m, m)),
        b=b,
        sigma=sigma,
        theta=theta,
        active_points=pts,
        log_marginal_history=tuple(d.get("log_marginal_history", ())),
        converged=bool(d.get("converged", True)),
        n_iter=int(d.get("n_iter", 0)),
        scaler=scaler,
        label_values=None if lv is None else tuple(int(v) for v in lv),
        stop_reason=str(d.get("stop_reason", "")),
    )


def loads(text: str, source="<model>") -> ModelState:
    if not text.strip():
        raise ParseError("empty model file", location=source)
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", location=f"{source}, line {exc.lineno} col {exc.colno}") from None
    return from_dict(d, source)


def load(path) -> ModelState:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(str(exc), location=str(path)) from None
    return loads(text, str(path))
