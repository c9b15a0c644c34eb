"""Per-sample minimax objective for squared-surrogate AUC maximization.

The primal variable packs the scorer parameters together with two scalar
class-mean surrogates: ``v = [w..., a, b]``. The dual variable is a single
scalar whose optimum equals the negative-class mean score minus the
positive-class mean score. The per-sample objective for ``(x, y)`` with
positive ratio ``p`` and score ``h`` is

    (1-p) (h-a)^2 [y=+1] + p (h-b)^2 [y=-1]
      + 2 (1+alpha) (p h [y=-1] - (1-p) h [y=+1]) - p (1-p) alpha^2,

which is concave in alpha with curvature exactly -2 p (1-p).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .scorer import ScorerSpec, score, score_batch, score_grad

log = logging.getLogger(__name__)

__all__ = [
    "make_primal",
    "split_primal",
    "zero_primal",
    "primal_dim",
    "sample_objective",
    "sample_grads",
    "primal_grad",
    "dual_grad",
    "dual_argmax",
    "empirical_objective_at",
    "primal_objective",
    "eta_cap",
    "restart_tail_constant",
    "default_l_v",
    "dual_bound",
    "ProblemConstants",
]


def primal_dim(spec: ScorerSpec) -> int:
    return spec.param_count + 2


def make_primal(w: np.ndarray, a: float = 0.0, b: float = 0.0) -> np.ndarray:
    return np.concatenate([np.asarray(w, dtype=np.float64), [a, b]])


def split_primal(v: np.ndarray):
    """Return (scorer params, a, b) views of a packed primal vector."""
    return v[:-2], float(v[-2]), float(v[-1])


def zero_primal(spec: ScorerSpec) -> np.ndarray:
    return np.zeros(primal_dim(spec))


def _check_p(p: float):
    if not 0.0 < p < 1.0:
        raise ValueError(f"need 0 < p < 1, got {p}")


def sample_objective(spec: ScorerSpec, v: np.ndarray, alpha: float,
                     x: np.ndarray, y: int, p: float) -> float:
    """Value of the per-sample objective at one labeled example."""
    _check_p(p)
    w, a, b = split_primal(v)
    h = score(spec, w, x)
    if y == 1:
        return (1.0 - p) * (h - a) ** 2 - 2.0 * (1.0 + alpha) * (1.0 - p) * h \
            - p * (1.0 - p) * alpha * alpha
    return p * (h - b) ** 2 + 2.0 * (1.0 + alpha) * p * h - p * (1.0 - p) * alpha * alpha


def sample_grads(spec: ScorerSpec, v: np.ndarray, alpha: float,
                 x: np.ndarray, y: int, p: float):
    """Primal gradient (packed layout) and dual derivative at one example.

    The two share the score evaluation, so the solver calls this fused form.
    """
    _check_p(p)
    h, gh = score_grad(spec, v[:-2], x)
    g = np.zeros_like(v)
    if y == 1:
        resid = h - v[-2]
        g[:-2] = (2.0 * (1.0 - p) * resid - 2.0 * (1.0 + alpha) * (1.0 - p)) * gh
        g[-2] = -2.0 * (1.0 - p) * resid
        ga = -2.0 * (1.0 - p) * h - 2.0 * p * (1.0 - p) * alpha
    else:
        resid = h - v[-1]
        g[:-2] = (2.0 * p * resid + 2.0 * (1.0 + alpha) * p) * gh
        g[-1] = -2.0 * p * resid
        ga = 2.0 * p * h - 2.0 * p * (1.0 - p) * alpha
    return g, ga


def primal_grad(spec, v, alpha, x, y, p) -> np.ndarray:
    return sample_grads(spec, v, alpha, x, y, p)[0]


def dual_grad(spec, v, alpha, x, y, p) -> float:
    return sample_grads(spec, v, alpha, x, y, p)[1]


def _class_mean_terms(spec, v, X, y):
    """(sum of scores, count) per class for one block of samples."""
    h = score_batch(spec, v[:-2], X)
    neg = y == -1
    pos = y == 1
    return (float(h[neg].sum()), int(neg.sum()), float(h[pos].sum()), int(pos.sum()))


def dual_argmax(spec: ScorerSpec, v: np.ndarray, dataset, shards=None) -> float:
    """Maximizing dual value: mean score over negatives minus mean over positives.

    With ``shards`` the class means are taken per worker and then averaged
    across workers; a worker missing one class is dropped from that class
    term and the average renormalized over the contributing workers.
    """
    if not ((dataset.y == 1).any() and (dataset.y == -1).any()):
        raise ValueError("dual optimum needs both classes in the dataset")
    if shards is None:
        hs, nn, hp, np_ = _class_mean_terms(spec, v, dataset.X, dataset.y)
        return hs / nn - hp / np_
    neg_terms = []
    pos_terms = []
    for idx in shards.worker_shards:
        hs, nn, hp, np_ = _class_mean_terms(spec, v, dataset.X[idx], dataset.y[idx])
        if nn > 0:
            neg_terms.append(hs / nn)
        if np_ > 0:
            pos_terms.append(hp / np_)
    return sum(neg_terms) / len(neg_terms) - sum(pos_terms) / len(pos_terms)


def empirical_objective_at(spec: ScorerSpec, v: np.ndarray, alpha: float, dataset) -> float:
    """Average of the per-sample objective over a dataset, at a fixed dual value."""
    p = dataset.positive_ratio
    _check_p(p)
    w, a, b = split_primal(v)
    h = score_batch(spec, w, dataset.X)
    pos = dataset.y == 1
    neg = ~pos
    hp = h[pos]
    hn = h[neg]
    n = dataset.n
    total = (1.0 - p) * float(((hp - a) ** 2).sum()) \
        + p * float(((hn - b) ** 2).sum()) \
        + 2.0 * (1.0 + alpha) * (p * float(hn.sum()) - (1.0 - p) * float(hp.sum()))
    return total / n - p * (1.0 - p) * alpha * alpha


def primal_objective(spec: ScorerSpec, v: np.ndarray, dataset) -> float:
    """Exact empirical primal objective: the dual maximum of the empirical average."""
    alpha_star = dual_argmax(spec, v, dataset)
    return empirical_objective_at(spec, v, alpha_star, dataset)


def eta_cap(p: float) -> float:
    """Largest step size under which the dual and class-mean iterates stay bounded."""
    _check_p(p)
    return min(1.0 / (2.0 * p * (1.0 - p)), 1.0 / (2.0 * p), 1.0 / (2.0 * (1.0 - p)))


def dual_bound(p: float) -> float:
    """Invariant bound on |alpha| along the solver trajectory."""
    _check_p(p)
    return max(p, 1.0 - p) / (p * (1.0 - p))


def restart_tail_constant(p: float) -> float:
    """Tail constant of the dual-restart variance bound."""
    _check_p(p)
    pt = max(p, 1.0 - p)
    li = math.log(1.0 / pt)
    return 3.0 * pt ** (1.0 / li) / (2.0 * li)


def default_l_v(p: float, g_h: float, l_h: float) -> float:
    """Default curvature constant from the gradient-Lipschitz analysis, floored at 1.

    Assembled blockwise: the scorer-weight block, then the two class-mean
    scalar blocks.
    """
    _check_p(p)
    pt = max(p, 1.0 - p)
    lw = 2.0 * g_h * g_h + 4.0 * l_h + (4.0 + 2.0 * pt / (p * (1.0 - p))) * g_h
    la2 = 4.0 * (1.0 - p) ** 2 * (g_h * g_h + 1.0)
    lb2 = 4.0 * p ** 2 * (g_h * g_h + 1.0)
    return max(math.sqrt(lw * lw + la2 + lb2), 1.0)


@dataclass(frozen=True)
class ProblemConstants:
    """Every constant the objective, the solver bounds and the schedules use.

    All fields are determined by the positive ratio ``p``, the scorer
    gradient bound ``g_h``, the curvature constant ``l_v`` and the growth
    constant ``mu``.
    """

    p: float
    g_h: float
    l_v: float
    mu: float
    mu_alpha: float
    l_alpha: float
    g_alpha: float
    g_v: float
    b_v: float
    b_alpha: float
    sigma_v: float
    sigma_alpha: float
    b: float
    gamma: float
    h_agg: float
    p_tilde: float
    c_tail: float
    eta_cap: float
    alpha_bound: float

    @classmethod
    def from_problem(cls, p: float, g_h: float, l_v: float, mu: float) -> "ProblemConstants":
        _check_p(p)
        if l_v <= 0.0:
            raise ValueError(f"need l_v > 0, got {l_v}")
        if not 0.0 < mu <= 1.0:
            raise ValueError(f"need 0 < mu <= 1, got {mu}")
        pt = max(p, 1.0 - p)
        mu_alpha = 2.0 * p * (1.0 - p)
        l_alpha = 2.0 * p * (1.0 - p)
        g_alpha = 2.0 * pt
        g_v = 2.0 * pt * g_h
        b_v = math.sqrt((6.0 + 2.0 * pt / (p * (1.0 - p))) ** 2 * g_h * g_h
                        + 16.0 * (1.0 - p) ** 2 + 16.0 * p ** 2)
        b_alpha = 2.0 + 4.0 * pt
        h_agg = 6.0 * g_v * g_v / mu_alpha + 6.0 * l_v \
            + 6.0 * g_alpha * g_alpha / l_v + 6.0 * l_alpha * l_alpha / mu_alpha
        return cls(
            p=p, g_h=g_h, l_v=l_v, mu=mu,
            mu_alpha=mu_alpha, l_alpha=l_alpha, g_alpha=g_alpha, g_v=g_v,
            b_v=b_v, b_alpha=b_alpha,
            sigma_v=2.0 * b_v, sigma_alpha=2.0 * b_alpha,
            b=max(b_v, b_alpha),
            gamma=1.0 / (2.0 * l_v),
            h_agg=h_agg,
            p_tilde=pt,
            c_tail=restart_tail_constant(p),
            eta_cap=eta_cap(p),
            alpha_bound=dual_bound(p),
        )

    def full_eta_bound(self) -> float:
        """Tightest step-size bound used by the one-stage convergence argument."""
        return min(
            1.0 / (self.l_v + 3.0 * self.g_alpha ** 2 / self.mu_alpha),
            1.0 / (self.l_alpha + 3.0 * self.g_v ** 2 / self.l_v),
            3.0 / (2.0 * self.mu_alpha),
            self.eta_cap,
        )
