"""Simulated star-topology cluster: workers, RNG streams, averaging, ledger.

Each worker owns one shard of the training data and an independent RNG
stream seeded by (global seed, stage, worker id), so results cannot depend
on scheduling order. The ledger counts one round per barrier-synchronized
reduce-and-broadcast, regardless of payload size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import Dataset, ShardAssignment, shard

log = logging.getLogger(__name__)

__all__ = ["CommLedger", "WorkerState", "ClusterSim"]


@dataclass
class CommLedger:
    """Exact count of synchronization rounds and scalars transferred."""

    rounds: int = 0
    scalars_up: int = 0
    scalars_down: int = 0

    def as_dict(self) -> dict:
        return {"rounds": self.rounds, "scalars_up": self.scalars_up,
                "scalars_down": self.scalars_down}


@dataclass
class WorkerState:
    """Mutable per-worker solver state plus its private data shard and RNG."""

    worker_id: int
    v: np.ndarray
    alpha: float
    running_v_sum: np.ndarray
    rng: np.random.Generator
    X: np.ndarray
    y: np.ndarray
    local_iter: int = 0

    @property
    def shard_size(self) -> int:
        return self.y.shape[0]


class ClusterSim:
    """K simulated workers around a parameter server.

    Shards are fixed at construction; worker solver states are re-created
    per stage via :meth:`reset_workers` so stage RNG streams never overlap.
    """

    topology = "star"

    def __init__(self, dataset: Dataset, shards: ShardAssignment, seed: int):
        if shards.k > dataset.n:
            raise ValueError("more workers than samples")
        self.dataset = dataset
        self.shards = shards
        self.seed = int(seed)
        self.ledger = CommLedger()
        self.workers: list[WorkerState] = []
        self._shard_X = []
        self._shard_y = []
        for idx in shards.worker_shards:
            if idx.size == 0:
                raise ValueError("empty shard")
            Xk = np.ascontiguousarray(dataset.X[idx])
            yk = dataset.y[idx].copy()
            Xk.flags.writeable = False
            yk.flags.writeable = False
            self._shard_X.append(Xk)
            self._shard_y.append(yk)

    @classmethod
    def build(cls, dataset: Dataset, k: int, seed: int) -> "ClusterSim":
        return cls(dataset, shard(dataset, k, seed), seed)

    @property
    def k(self) -> int:
        return self.shards.k

    @property
    def p(self) -> float:
        """Empirical positive ratio of the full training set (frozen)."""
        return self.dataset.positive_ratio

    @property
    def min_shard_size(self) -> int:
        return min(self.shards.sizes())

    def reset_workers(self, v0: np.ndarray, alpha0: float, stage: int):
        """Fresh worker states all starting from (v0, alpha0)."""
        self.workers = [
            WorkerState(
                worker_id=wid,
                v=np.array(v0, dtype=np.float64),
                alpha=float(alpha0),
                running_v_sum=np.zeros_like(v0, dtype=np.float64),
                rng=np.random.default_rng((self.seed, stage, wid)),
                X=self._shard_X[wid],
                y=self._shard_y[wid],
            )
            for wid in range(self.k)
        ]

    def average_primal_dual(self):
        """Replace every worker's (v, alpha) by the across-worker means.

        Summation runs in worker-id order so replays are bit-identical.
        Counts one round; the payload is the primal vector plus the dual
        scalar per worker, both directions.
        """
        if not self.workers:
            raise RuntimeError("no workers initialized")
        iters = {w.local_iter for w in self.workers}
        if len(iters) != 1:
            raise RuntimeError(f"averaging barrier violated: local iterations {sorted(iters)}")
        v_bar = np.mean(np.stack([w.v for w in self.workers]), axis=0)
        alpha_bar = float(np.mean([w.alpha for w in self.workers]))
        for w in self.workers:
            w.v = v_bar.copy()
            w.alpha = alpha_bar
        payload = self.k * (v_bar.shape[0] + 1)
        self.ledger.rounds += 1
        self.ledger.scalars_up += payload
        self.ledger.scalars_down += payload

    def aggregate_restart(self, per_worker) -> float:
        """Combine per-worker (neg sum, neg count, pos sum, pos count) tuples.

        Workers with a zero count for a class are dropped from that class
        term and the average renormalized over the contributing workers.
        Counts one round: four scalars up per worker, one scalar broadcast.
        """
        if len(per_worker) != self.k:
            raise ValueError(f"expected {self.k} tuples, got {len(per_worker)}")
        neg_terms = [hs / nn for hs, nn, _, _ in per_worker if nn > 0]
        pos_terms = [hp / np_ for _, _, hp, np_ in per_worker if np_ > 0]
        if not neg_terms or not pos_terms:
            missing = "negative" if not neg_terms else "positive"
            raise ValueError(f"every worker minibatch is missing the {missing} class; "
                             "dataset too degenerate for a dual restart")
        if len(neg_terms) < self.k or len(pos_terms) < self.k:
            log.warning("dual restart renormalized: %d/%d workers contributed negatives, "
                        "%d/%d positives", len(neg_terms), self.k, len(pos_terms), self.k)
        self.ledger.rounds += 1
        self.ledger.scalars_up += 4 * self.k
        self.ledger.scalars_down += self.k
        return float(np.mean(neg_terms) - np.mean(pos_terms))
