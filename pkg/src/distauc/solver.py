"""Inner distributed solver: local primal-dual steps with periodic averaging.

Every worker repeatedly draws one sample from its own shard, takes a
proximal gradient step on the primal variable (anchored at the stage
reference point) and an ascent step on the dual scalar. Every
``comm_interval`` iterations the cluster averages both variables; the
returned solution is the average over workers of the per-worker time
averages of the post-update iterates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .cluster import ClusterSim
from .objective import eta_cap, sample_grads
from .scorer import ScorerSpec

log = logging.getLogger(__name__)

__all__ = ["DsgConfig", "prox_primal_step", "dual_step", "run_dsg"]


@dataclass
class DsgConfig:
    """One inner-solver call: step size, horizon, averaging cadence, anchor.

    The step size must respect the cap min{1/(2p(1-p)), 1/(2p), 1/(2(1-p))};
    that cap is what keeps the dual scalar and the two class-mean surrogates
    inside their invariant boxes, so it is enforced at construction.
    """

    eta: float
    num_steps: int
    comm_interval: int
    gamma: float
    anchor_v0: np.ndarray
    alpha0: float
    p: float
    batch: int = 1

    def __post_init__(self):
        self.anchor_v0 = np.asarray(self.anchor_v0, dtype=np.float64)
        cap = eta_cap(self.p)
        if not 0.0 < self.eta <= cap:
            raise ValueError(f"step size {self.eta:g} outside (0, {cap:g}] for p={self.p:g}")
        if self.num_steps < 1:
            raise ValueError(f"need num_steps >= 1, got {self.num_steps}")
        if self.comm_interval < 1:
            raise ValueError(f"need comm_interval >= 1, got {self.comm_interval}")
        if self.gamma <= 0.0:
            raise ValueError(f"need gamma > 0, got {self.gamma}")
        if self.batch < 1:
            raise ValueError(f"need batch >= 1, got {self.batch}")
        if not np.all(np.isfinite(self.anchor_v0)) or not np.isfinite(self.alpha0):
            raise ValueError("non-finite anchor state")

    def step_bound_ok(self, constants) -> bool:
        """Whether eta also satisfies the tighter one-stage convergence bound.

        The boundedness cap is enforced above; this stricter bound is only
        reported, since useful step sizes often exceed it in practice.
        """
        return self.eta <= constants.full_eta_bound()


def prox_primal_step(v: np.ndarray, g: np.ndarray, cfg: DsgConfig) -> np.ndarray:
    """Exact minimizer of  g.v + ||v - v_t||^2/(2 eta) + ||v - v_0||^2/(2 gamma).

    Closed form (gamma*v_t + eta*v_0 - eta*gamma*g) / (eta + gamma); affine
    in g, which is what makes post-step averaging equal an averaged-gradient
    step.
    """
    return (cfg.gamma * v + cfg.eta * cfg.anchor_v0 - cfg.eta * cfg.gamma * g) \
        / (cfg.eta + cfg.gamma)


def dual_step(alpha: float, g_alpha: float, eta: float) -> float:
    """Plain ascent step on the dual scalar."""
    return alpha + eta * g_alpha


def _worker_grads(spec, wk, cfg):
    """Stochastic gradients from one worker's shard: one draw, or a minibatch mean."""
    n = wk.shard_size
    if cfg.batch == 1:
        i = int(wk.rng.integers(0, n))
        return sample_grads(spec, wk.v, wk.alpha, wk.X[i], int(wk.y[i]), cfg.p)
    idx = wk.rng.integers(0, n, size=cfg.batch)
    gv = np.zeros_like(wk.v)
    ga = 0.0
    for i in idx:
        gi, gai = sample_grads(spec, wk.v, wk.alpha, wk.X[i], int(wk.y[i]), cfg.p)
        gv += gi
        ga += gai
    return gv / cfg.batch, ga / cfg.batch


def run_dsg(cluster: ClusterSim, spec: ScorerSpec, cfg: DsgConfig,
            stage: int = 1, observer=None):
    """Run the inner solver for ``cfg.num_steps`` iterations.

    Returns the across-worker average of the per-worker time averages and
    the final worker states (their dual scalars are kept for diagnostics).
    ``observer(t, workers)`` is called after every iteration, once averaging
    and the running sums have been applied; it must not mutate state.
    """
    cluster.reset_workers(cfg.anchor_v0, cfg.alpha0, stage)
    workers = cluster.workers
    for t in range(cfg.num_steps):
        for wk in workers:
            gv, ga = _worker_grads(spec, wk, cfg)
            wk.v = prox_primal_step(wk.v, gv, cfg)
            wk.alpha = dual_step(wk.alpha, ga, cfg.eta)
            wk.local_iter = t + 1
            if not np.isfinite(wk.alpha) or not np.all(np.isfinite(wk.v)):
                raise FloatingPointError(
                    f"non-finite iterate at iteration {t + 1} on worker {wk.worker_id}")
        if (t + 1) % cfg.comm_interval == 0:
            cluster.average_primal_dual()
        for wk in workers:
            wk.running_v_sum += wk.v
        if observer is not None:
            observer(t + 1, workers)
    v_tilde = np.mean(np.stack([wk.running_v_sum for wk in workers]), axis=0) / cfg.num_steps
    return v_tilde, workers
