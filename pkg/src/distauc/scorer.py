"""Prediction models with output in (0, 1) and exact parameter gradients.

Two families are provided: a linear model and a one-hidden-layer tanh
network, both squashed through a sigmoid so the score is bounded by
construction. Parameters live in one flat vector so that model averaging
and proximal arithmetic stay uniform across families.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "ScorerSpec",
    "init_params",
    "score",
    "score_grad",
    "score_batch",
    "lipschitz_bound",
    "smoothness_bound",
]

KINDS = ("linear_sigmoid", "mlp_sigmoid")

# open-interval clamp so the score can never round to exactly 0 or 1
_H_LO = np.nextafter(0.0, 1.0)
_H_HI = np.nextafter(1.0, 0.0)

# max |sigmoid'| and max |sigmoid''|
_SIG_D1_MAX = 0.25
_SIG_D2_MAX = 1.0 / (6.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class ScorerSpec:
    """Model family plus sizes; ``param_count`` is derived."""

    kind: str
    dim: int
    hidden: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scorer kind {self.kind!r}, expected one of {KINDS}")
        if self.dim < 1:
            raise ValueError(f"need dim >= 1, got {self.dim}")
        if self.kind == "mlp_sigmoid":
            if not self.hidden or self.hidden < 1:
                raise ValueError("mlp_sigmoid needs hidden >= 1")
        elif self.hidden is not None:
            raise ValueError("hidden is only meaningful for mlp_sigmoid")

    @property
    def param_count(self) -> int:
        if self.kind == "linear_sigmoid":
            return self.dim + 1
        return (self.dim + 1) * self.hidden + self.hidden + 1


def init_params(spec: ScorerSpec, seed: int = 0, scale: float = 0.1) -> np.ndarray:
    """Zero weights for the linear model; small random weights for the mlp.

    A zero-initialized mlp has an exactly zero gradient through the hidden
    layer, so it needs symmetry breaking.
    """
    if spec.kind == "linear_sigmoid":
        return np.zeros(spec.param_count)
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal(spec.param_count)


def _sigmoid_scalar(z: float) -> float:
    if z >= 0.0:
        s = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        s = e / (1.0 + e)
    return min(max(s, _H_LO), _H_HI)


def _sigmoid_vec(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return np.clip(out, _H_LO, _H_HI)


def _mlp_views(spec: ScorerSpec, params: np.ndarray):
    d, hdim = spec.dim, spec.hidden
    ofs = d * hdim
    W1 = params[:ofs].reshape(hdim, d)
    b1 = params[ofs:ofs + hdim]
    w2 = params[ofs + hdim:ofs + 2 * hdim]
    b2 = params[-1]
    return W1, b1, w2, b2


def _check_dims(spec: ScorerSpec, params: np.ndarray, x: np.ndarray):
    if params.shape != (spec.param_count,):
        raise ValueError(f"expected {spec.param_count} parameters, got shape {params.shape}")
    if x.shape[-1] != spec.dim:
        raise ValueError(f"expected feature dimension {spec.dim}, got {x.shape[-1]}")


def score(spec: ScorerSpec, params: np.ndarray, x: np.ndarray) -> float:
    """Model output in the open interval (0, 1)."""
    params = np.asarray(params, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    _check_dims(spec, params, x)
    if spec.kind == "linear_sigmoid":
        raw = float(params[:-1] @ x) + params[-1]
    else:
        W1, b1, w2, b2 = _mlp_views(spec, params)
        raw = float(w2 @ np.tanh(W1 @ x + b1)) + b2
    return _sigmoid_scalar(raw)


def score_grad(spec: ScorerSpec, params: np.ndarray, x: np.ndarray):
    """Score together with its exact gradient w.r.t. the flat parameter vector."""
    params = np.asarray(params, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    _check_dims(spec, params, x)
    grad = np.empty(spec.param_count)
    if spec.kind == "linear_sigmoid":
        raw = float(params[:-1] @ x) + params[-1]
        h = _sigmoid_scalar(raw)
        slope = h * (1.0 - h)
        grad[:-1] = slope * x
        grad[-1] = slope
        return h, grad
    W1, b1, w2, b2 = _mlp_views(spec, params)
    z1 = W1 @ x + b1
    a1 = np.tanh(z1)
    raw = float(w2 @ a1) + b2
    h = _sigmoid_scalar(raw)
    slope = h * (1.0 - h)
    dz1 = (slope * w2) * (1.0 - a1 * a1)
    d, hdim = spec.dim, spec.hidden
    ofs = d * hdim
    grad[:ofs] = np.outer(dz1, x).ravel()
    grad[ofs:ofs + hdim] = dz1
    grad[ofs + hdim:ofs + 2 * hdim] = slope * a1
    grad[-1] = slope
    return h, grad


def score_batch(spec: ScorerSpec, params: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Vectorized scores for a feature matrix, one value per row."""
    params = np.asarray(params, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    _check_dims(spec, params, X)
    if spec.kind == "linear_sigmoid":
        raw = X @ params[:-1] + params[-1]
    else:
        W1, b1, w2, b2 = _mlp_views(spec, params)
        raw = np.tanh(X @ W1.T + b1) @ w2 + b2
    return _sigmoid_vec(raw)


def _max_sq_radius(dataset) -> float:
    """max over samples of ||x||^2 + 1 (the +1 covers the bias input)."""
    return float(np.max(np.einsum("ij,ij->i", dataset.X, dataset.X))) + 1.0


def lipschitz_bound(spec: ScorerSpec, dataset, params: np.ndarray | None = None) -> float:
    """Uniform bound on the parameter-gradient norm over the dataset.

    For the linear model the bound 0.25 * max sqrt(||x||^2 + 1) holds for
    every parameter value. For the mlp it depends on the current second-layer
    weights and is only a diagnostic, not a uniform guarantee.
    """
    r2 = _max_sq_radius(dataset)
    if spec.kind == "linear_sigmoid":
        return _SIG_D1_MAX * math.sqrt(r2)
    if params is None:
        raise ValueError("mlp_sigmoid gradient bound needs the current parameters")
    _, _, w2, _ = _mlp_views(spec, np.asarray(params, dtype=np.float64))
    w2sq = float(w2 @ w2)
    bound = _SIG_D1_MAX * math.sqrt(w2sq * r2 + spec.hidden + 1.0)
    log.info("mlp gradient bound %.4g is parameter-dependent (non-uniform)", bound)
    return bound


def smoothness_bound(spec: ScorerSpec, dataset, params: np.ndarray | None = None) -> float:
    """Bound on the parameter-Hessian norm of the score over the dataset.

    Exact for the linear model; a coarse product-of-norms heuristic for the
    mlp, reported for diagnostics only.
    """
    r2 = _max_sq_radius(dataset)
    if spec.kind == "linear_sigmoid":
        return _SIG_D2_MAX * r2
    if params is None:
        raise ValueError("mlp_sigmoid smoothness bound needs the current parameters")
    _, _, w2, _ = _mlp_views(spec, np.asarray(params, dtype=np.float64))
    w2n = math.sqrt(float(w2 @ w2))
    bound = _SIG_D2_MAX * (w2n * w2n * r2 + spec.hidden + 1.0) \
        + _SIG_D1_MAX * (w2n + 2.0) * (r2 + math.sqrt(spec.hidden))
    log.info("mlp smoothness bound %.4g is a parameter-dependent heuristic", bound)
    return bound
