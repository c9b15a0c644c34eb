"""Deterministic simulator for communication-efficient distributed AUC maximization."""

from .cluster import ClusterSim, CommLedger, WorkerState
from .data import (Dataset, Sample, ShardAssignment, load_csv, load_libsvm,
                   rebalance, shard, synth_gaussians, train_test_split)
from .driver import CodaConfig, StageSchedule, build_schedule, restart_alpha, run_coda
from .metrics import RunMetrics, auc, evaluate
from .objective import (ProblemConstants, default_l_v, dual_argmax, dual_bound,
                        dual_grad, empirical_objective_at, eta_cap, make_primal,
                        primal_grad, primal_objective, restart_tail_constant,
                        sample_grads, sample_objective, split_primal, zero_primal)
from .scorer import (ScorerSpec, init_params, lipschitz_bound, score,
                     score_batch, score_grad, smoothness_bound)
from .solver import DsgConfig, dual_step, prox_primal_step, run_dsg

__version__ = "0.1.0"

__all__ = [
    "ClusterSim", "CommLedger", "WorkerState",
    "Dataset", "Sample", "ShardAssignment",
    "load_csv", "load_libsvm", "rebalance", "shard", "synth_gaussians", "train_test_split",
    "CodaConfig", "StageSchedule", "build_schedule", "restart_alpha", "run_coda",
    "RunMetrics", "auc", "evaluate",
    "ProblemConstants", "default_l_v", "dual_argmax", "dual_bound", "dual_grad",
    "empirical_objective_at", "eta_cap", "make_primal", "primal_grad",
    "primal_objective", "restart_tail_constant", "sample_grads",
    "sample_objective", "split_primal", "zero_primal",
    "ScorerSpec", "init_params", "lipschitz_bound", "score", "score_batch",
    "score_grad", "smoothness_bound",
    "DsgConfig", "dual_step", "prox_primal_step", "run_dsg",
]
