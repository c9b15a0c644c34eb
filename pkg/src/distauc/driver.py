"""Stagewise outer loop: schedules, inner-solver calls, and dual restarts.

Each stage solves a quadratically anchored subproblem with the inner solver,
then re-estimates the dual scalar from a fresh distributed minibatch. Two
schedule modes are provided: ``theorem`` derives per-stage step sizes,
horizons and averaging cadences from the problem constants; ``geometric3``
triples the horizon and divides the step size by three per stage, with a
fixed averaging cadence, which is the mode used for experiment sweeps.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .cluster import ClusterSim
from .metrics import RunMetrics, evaluate
from .objective import (ProblemConstants, eta_cap, restart_tail_constant,
                        split_primal, zero_primal)
from .scorer import ScorerSpec, score_batch
from .solver import DsgConfig, run_dsg

log = logging.getLogger(__name__)

__all__ = ["StageSchedule", "CodaConfig", "build_schedule", "restart_alpha", "run_coda"]

SCHEDULE_MODES = ("theorem", "geometric3")

# largest restart minibatch, as a multiple of the local shard size
RESTART_CAP_FACTOR = 10

# redraws allowed before a worker is dropped from a missing class term
RESTART_MAX_REDRAWS = 100


@dataclass(frozen=True)
class StageSchedule:
    """Per-stage hyperparameters: step size, horizon, cadence, restart size."""

    stage: int
    eta: float
    num_steps: int
    comm_interval: int
    restart_batch: int


@dataclass
class CodaConfig:
    """Outer-loop configuration; ``c`` is the per-stage geometric decay rate."""

    workers: int
    stages: int
    eta0: float
    l_v: float
    mu: float
    g_h: float
    p: float
    seed: int
    schedule_mode: str = "geometric3"
    t0: int = 2000
    comm_interval_override: int | None = None
    eta_max: float | None = None
    batch: int = 1
    v0: np.ndarray | None = None

    def __post_init__(self):
        if self.schedule_mode not in SCHEDULE_MODES:
            raise ValueError(f"unknown schedule mode {self.schedule_mode!r}")
        if self.workers < 1 or self.stages < 1:
            raise ValueError("need workers >= 1 and stages >= 1")
        if self.eta0 <= 0.0 or self.l_v <= 0.0 or self.g_h <= 0.0 or self.t0 < 1:
            raise ValueError("eta0, l_v, g_h must be positive and t0 >= 1")
        if not 0.0 < self.mu <= 1.0:
            raise ValueError(f"need 0 < mu <= 1, got {self.mu}")
        cap = eta_cap(self.p)
        if self.eta_max is None:
            self.eta_max = cap
        elif self.eta_max > cap:
            raise ValueError(f"eta_max {self.eta_max:g} exceeds the boundedness cap {cap:g}")
        c = self.c
        if not 0.0 < c <= 1.0 / 6.0:
            raise ValueError(f"decay rate c={c:g} outside (0, 1/6]; need mu <= l_v")
        if self.comm_interval_override is not None and self.comm_interval_override < 1:
            raise ValueError("comm_interval_override must be >= 1")

    @property
    def c(self) -> float:
        r = self.mu / self.l_v
        return r / (5.0 + r)


def _stage_eta_steps(cfg: CodaConfig, s: int):
    """(step size, horizon) for stage s under the configured mode."""
    if cfg.schedule_mode == "theorem":
        c = cfg.c
        eta = min(cfg.eta0 * cfg.workers * math.exp(-(s - 1) * c), cfg.eta_max)
        steps = math.ceil(max(8.0, 8.0 * cfg.g_h * cfg.g_h)
                          / (cfg.l_v * cfg.eta0 * cfg.workers) * math.exp((s - 1) * c))
        return eta, int(steps)
    eta = cfg.eta0 / 3.0 ** (s - 1)
    return eta, int(cfg.t0 * 3 ** (s - 1))


def build_schedule(cfg: CodaConfig, s: int, shard_size: int | None = None) -> StageSchedule:
    """Hyperparameters for stage ``s`` (1-based).

    The restart minibatch size uses the next stage's step size and horizon;
    when the local shard size is known it is clamped to a small multiple of
    it, since the nominal value can exceed any desk-scale shard.
    """
    if s < 1:
        raise ValueError(f"stage index must be >= 1, got {s}")
    eta, steps = _stage_eta_steps(cfg, s)
    if cfg.comm_interval_override is not None:
        interval = cfg.comm_interval_override
    elif cfg.schedule_mode == "theorem":
        interval = max(1, int(round(1.0 / math.sqrt(cfg.workers * eta))))
    else:
        interval = 1
    eta_next, steps_next = _stage_eta_steps(cfg, s + 1)
    p = cfg.p
    c_tail = restart_tail_constant(p)
    pt = max(p, 1.0 - p)
    m = math.ceil((1.0 + c_tail) / (eta_next * eta_next * steps_next * p * p * (1.0 - p) ** 2))
    m = max(m, math.ceil(math.log(cfg.workers) / math.log(1.0 / pt)))
    if shard_size is not None:
        m = min(m, RESTART_CAP_FACTOR * shard_size)
    return StageSchedule(stage=s, eta=eta, num_steps=steps,
                         comm_interval=interval, restart_batch=int(m))


def restart_alpha(cluster: ClusterSim, spec: ScorerSpec, v: np.ndarray, m: int) -> float:
    """Distributed minibatch estimate of the dual optimum at ``v``.

    Each worker draws ``m`` samples from its shard (the whole shard, exactly
    once, when ``m`` covers it) and reports per-class score sums and counts;
    the server averages the per-worker class means. A worker whose draw
    misses a class redraws a bounded number of times before being dropped
    from that class term.
    """
    if m < 1:
        raise ValueError(f"need restart minibatch >= 1, got {m}")
    w, _, _ = split_primal(v)
    per_worker = []
    for wk in cluster.workers:
        n = wk.shard_size
        if m >= n:
            Xb, yb = wk.X, wk.y
        else:
            has_pos = bool((wk.y == 1).any())
            has_neg = bool((wk.y == -1).any())
            idx = wk.rng.integers(0, n, size=m)
            yb = wk.y[idx]
            redraws = 0
            while redraws < RESTART_MAX_REDRAWS and (
                    (has_pos and not (yb == 1).any()) or (has_neg and not (yb == -1).any())):
                idx = wk.rng.integers(0, n, size=m)
                yb = wk.y[idx]
                redraws += 1
            Xb = wk.X[idx]
        h = score_batch(spec, w, Xb)
        neg = yb == -1
        pos = yb == 1
        if not neg.any() or not pos.any():
            log.warning("worker %d restart minibatch is missing a class", wk.worker_id)
        per_worker.append((float(h[neg].sum()), int(neg.sum()),
                           float(h[pos].sum()), int(pos.sum())))
    return cluster.aggregate_restart(per_worker)


def run_coda(cfg: CodaConfig, cluster: ClusterSim, spec: ScorerSpec,
             test_ds=None, eval_every: int = 0, track_phi: bool = False,
             sink=None):
    """Run the full stagewise algorithm on a cluster.

    Returns the final primal point and the list of metric records. A record
    is emitted at the end of every stage and, when ``eval_every`` > 0 and a
    test set is given, every ``eval_every`` inner iterations (evaluating the
    across-worker mean of the current iterates). ``sink`` is called with
    each record as it is produced.
    """
    if abs(cfg.p - cluster.p) > 1e-12:
        raise ValueError(f"config p={cfg.p:g} does not match cluster data p={cluster.p:g}")
    if cfg.workers != cluster.k:
        raise ValueError(f"config workers={cfg.workers} does not match cluster k={cluster.k}")
    constants = ProblemConstants.from_problem(cfg.p, cfg.g_h, cfg.l_v, cfg.mu)
    v = np.array(cfg.v0, dtype=np.float64) if cfg.v0 is not None else zero_primal(spec)
    alpha = 0.0
    metrics: list[RunMetrics] = []
    t_start = time.perf_counter()
    iters_done = 0

    def emit(stage, it, point):
        vals = evaluate(spec, point, test_ds, phi_ds=cluster.dataset if track_phi else None)
        rec = RunMetrics(
            stage=stage,
            cumulative_iterations=it,
            cumulative_rounds=cluster.ledger.rounds,
            scalars_moved=cluster.ledger.scalars_up + cluster.ledger.scalars_down,
            test_auc=vals["test_auc"],
            empirical_phi=vals.get("empirical_phi"),
            wall_seconds=time.perf_counter() - t_start,
        )
        metrics.append(rec)
        if sink is not None:
            sink(rec)

    for s in range(1, cfg.stages + 1):
        sched = build_schedule(cfg, s, shard_size=cluster.min_shard_size)
        dsg_cfg = DsgConfig(
            eta=sched.eta, num_steps=sched.num_steps,
            comm_interval=sched.comm_interval, gamma=constants.gamma,
            anchor_v0=v, alpha0=alpha, p=cfg.p, batch=cfg.batch,
        )
        log.info("stage %d: eta=%.4g steps=%d interval=%d restart=%d "
                 "(one-stage step bound %s)", s, sched.eta, sched.num_steps,
                 sched.comm_interval, sched.restart_batch,
                 "satisfied" if dsg_cfg.step_bound_ok(constants) else "violated")
        observer = None
        if eval_every > 0 and test_ds is not None:
            base = iters_done

            def observer(t, workers, _stage=s, _base=base):
                if t % eval_every == 0:
                    v_bar = np.mean(np.stack([w.v for w in workers]), axis=0)
                    emit(_stage, _base + t, v_bar)

        v, _ = run_dsg(cluster, spec, dsg_cfg, stage=s, observer=observer)
        iters_done += sched.num_steps
        alpha = restart_alpha(cluster, spec, v, sched.restart_batch)
        if test_ds is not None:
            emit(s, iters_done, v)
    return v, metrics
