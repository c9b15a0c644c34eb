"""Dataset loading, synthesis, rebalancing and sharding for binary classification.

Labels are always stored as {+1, -1}. Feature storage is dense even for
sparse input formats: dimensions stay small at simulation scale and dense
vectors keep the gradient code simple.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

# distinct stream tag per randomized operation: the same master seed can
# then feed synthesis, rebalancing, sharding and splitting without any two
# of them replaying the same draws; tags must be nonzero because trailing
# zeros do not change a SeedSequence entropy pool
_SYNTH_STREAM, _REBALANCE_STREAM, _SHARD_STREAM, _SPLIT_STREAM = 1, 2, 3, 4


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


__all__ = [
    "Sample",
    "Dataset",
    "ShardAssignment",
    "LibsvmParseError",
    "load_libsvm",
    "load_csv",
    "synth_gaussians",
    "rebalance",
    "shard",
    "train_test_split",
]


@dataclass(frozen=True)
class Sample:
    """One labeled example: dense feature vector and a label in {+1, -1}."""

    features: np.ndarray
    label: int


class LibsvmParseError(ValueError):
    """Parse failure in a sparse text file, with line and column location."""

    def __init__(self, path, line, column, message):
        self.path = str(path)
        self.line = line
        self.column = column
        super().__init__(f"{path}:{line}:{column}: {message}")


class Dataset:
    """Immutable dense dataset with binary labels.

    ``positive_ratio`` is always the exact empirical fraction of +1 labels;
    it is recomputed from the label array so it can never drift.
    """

    def __init__(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64).copy()
        if X.ndim != 2:
            raise ValueError(f"features must be a 2-d array, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"labels shape {y.shape} does not match {X.shape[0]} rows")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("dataset needs at least one sample and one feature")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite feature values")
        bad = np.setdiff1d(np.unique(y), [-1, 1])
        if bad.size:
            raise ValueError(f"labels must be +1/-1, found {bad.tolist()}")
        if not ((y == 1).any() and (y == -1).any()):
            raise ValueError("dataset must contain at least one sample of each class")
        X.flags.writeable = False
        y.flags.writeable = False
        self._X = X
        self._y = y

    @property
    def X(self) -> np.ndarray:
        return self._X

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def n(self) -> int:
        return self._X.shape[0]

    @property
    def dim(self) -> int:
        return self._X.shape[1]

    @property
    def positive_ratio(self) -> float:
        return int((self._y == 1).sum()) / self.n

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> Sample:
        return Sample(features=self._X[i], label=int(self._y[i]))

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self._X[idx], self._y[idx])

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, dim={self.dim}, positive_ratio={self.positive_ratio:.4f})"


@dataclass(frozen=True)
class ShardAssignment:
    """Partition of sample indices into per-worker shards.

    Shard sizes differ by at most one and the assignment is a pure function
    of (dataset size, worker count, seed).
    """

    worker_shards: tuple
    seed: int

    def __post_init__(self):
        shards = tuple(np.asarray(s, dtype=np.int64).copy() for s in self.worker_shards)
        for s in shards:
            s.flags.writeable = False
        object.__setattr__(self, "worker_shards", shards)
        sizes = [s.size for s in shards]
        if max(sizes) - min(sizes) > 1:
            raise ValueError(f"shard sizes differ by more than one: {sizes}")
        merged = np.sort(np.concatenate(shards))
        if not np.array_equal(merged, np.arange(merged.size)):
            raise ValueError("shards do not partition the index range")

    @property
    def k(self) -> int:
        return len(self.worker_shards)

    def sizes(self):
        return [int(s.size) for s in self.worker_shards]


def _map_labels(raw: np.ndarray, context: str) -> np.ndarray:
    """Map two raw label values onto {-1, +1}; 0/1 maps to -1/+1."""
    vals = np.unique(raw)
    if vals.size == 1:
        raise ValueError(f"{context}: only one label class present ({vals[0]:g})")
    if vals.size > 2:
        raise ValueError(f"{context}: expected two label classes, found {vals.size}")
    lo, hi = float(vals[0]), float(vals[1])
    if not (lo == -1.0 and hi == 1.0) and not (lo == 0.0 and hi == 1.0):
        log.info("%s: mapping labels %g -> -1, %g -> +1", context, lo, hi)
    return np.where(raw == hi, 1, -1).astype(np.int64)


_TOKEN = re.compile(r"\S+")


def load_libsvm(path, dim_hint: int | None = None) -> Dataset:
    """Load a sparse text file: ``label idx:val idx:val ...`` with 1-based indices.

    The feature dimension is the larger of the maximum observed index and
    ``dim_hint``. Malformed tokens raise LibsvmParseError with the exact
    line and column.
    """
    labels_raw = []
    rows = []
    max_idx = 0
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            body = line.rstrip("\n")
            if not body.strip():
                continue
            toks = list(_TOKEN.finditer(body))
            lab_tok = toks[0]
            try:
                labels_raw.append(float(lab_tok.group()))
            except ValueError:
                raise LibsvmParseError(path, ln, lab_tok.start() + 1,
                                       f"bad label {lab_tok.group()!r}") from None
            feats = []
            for tok in toks[1:]:
                col = tok.start() + 1
                idx_s, sep, val_s = tok.group().partition(":")
                if not sep:
                    raise LibsvmParseError(path, ln, col, f"expected index:value, got {tok.group()!r}")
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise LibsvmParseError(path, ln, col, f"bad feature index {idx_s!r}") from None
                if idx < 1:
                    raise LibsvmParseError(path, ln, col, f"feature index must be >= 1, got {idx}")
                try:
                    val = float(val_s)
                except ValueError:
                    raise LibsvmParseError(path, ln, col + len(idx_s) + 1,
                                           f"bad feature value {val_s!r}") from None
                feats.append((idx, val))
                if idx > max_idx:
                    max_idx = idx
            rows.append(feats)
    if not rows:
        raise ValueError(f"{path}: no samples found")
    dim = max(max_idx, int(dim_hint or 0))
    if dim < 1:
        raise ValueError(f"{path}: no feature indices and no dim_hint given")
    X = np.zeros((len(rows), dim))
    for r, feats in enumerate(rows):
        for idx, val in feats:
            X[r, idx - 1] = val
    return Dataset(X, _map_labels(np.asarray(labels_raw), str(path)))


def load_csv(path) -> Dataset:
    """Load a dense CSV file: header row, last column is the label."""
    feats = []
    labels_raw = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        ncol = len(header)
        if ncol < 2:
            raise ValueError(f"{path}: need at least one feature column and a label column")
        for ln, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != ncol:
                raise ValueError(f"{path}:{ln}: expected {ncol} columns, got {len(row)}")
            vals = []
            for ci, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValueError(f"{path}:{ln}: column {ci}: non-numeric cell {cell!r}") from None
            feats.append(vals[:-1])
            labels_raw.append(vals[-1])
    if not feats:
        raise ValueError(f"{path}: no samples found")
    return Dataset(np.asarray(feats), _map_labels(np.asarray(labels_raw), str(path)))


def synth_gaussians(n: int, d: int, p: float, separation: float, seed: int) -> Dataset:
    """Two isotropic Gaussian classes with mean +/- separation/sqrt(d) per coordinate.

    Exactly round(n*p) samples are positive; the draw is a pure function of
    the seed.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"need 0 < p < 1, got {p}")
    n_pos = int(round(n * p))
    if n_pos in (0, n):
        raise ValueError(f"positive count round({n}*{p}) = {n_pos} leaves a class empty")
    rng = _stream(seed, _SYNTH_STREAM)
    y = np.full(n, -1, dtype=np.int64)
    y[rng.permutation(n)[:n_pos]] = 1
    mean = (separation / np.sqrt(d)) * np.ones(d)
    X = rng.standard_normal((n, d)) + y[:, None] * mean[None, :]
    return Dataset(X, y)


def rebalance(ds: Dataset, target_p: float, seed: int) -> Dataset:
    """Raise the positive ratio by uniformly dropping negatives.

    All positives are kept. The number of retained negatives is chosen so
    the resulting ratio is within one-sample granularity of ``target_p``.
    """
    p = ds.positive_ratio
    if target_p <= p:
        raise ValueError(
            f"target positive ratio {target_p:g} <= current ratio {p:g}; "
            "rebalancing only drops negatives, so the target must be larger")
    if target_p >= 1.0:
        raise ValueError(f"target positive ratio must be < 1, got {target_p:g}")
    pos_idx = np.flatnonzero(ds.y == 1)
    neg_idx = np.flatnonzero(ds.y == -1)
    m = int(round(pos_idx.size * (1.0 - target_p) / target_p))
    if m < 1:
        raise ValueError(f"target positive ratio {target_p:g} would drop every negative sample")
    if m >= neg_idx.size:
        return ds  # already within one sample of the target
    rng = _stream(seed, _REBALANCE_STREAM)
    keep_neg = rng.choice(neg_idx, size=m, replace=False)
    keep = np.sort(np.concatenate([pos_idx, keep_neg]))
    return ds.take(keep)


def shard(ds: Dataset, k: int, seed: int) -> ShardAssignment:
    """Randomly permute sample indices and split into k near-equal shards."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    if k > ds.n:
        raise ValueError(f"cannot split {ds.n} samples across {k} workers")
    perm = _stream(seed, _SHARD_STREAM).permutation(ds.n)
    parts = np.array_split(perm, k)
    return ShardAssignment(worker_shards=tuple(parts), seed=seed)


def train_test_split(ds: Dataset, test_fraction: float, seed: int):
    """Deterministic shuffled split; both parts must keep both classes."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n_test = int(round(ds.n * test_fraction))
    if n_test < 1 or n_test > ds.n - 1:
        raise ValueError(f"test_fraction {test_fraction} leaves an empty split for n={ds.n}")
    perm = _stream(seed, _SPLIT_STREAM).permutation(ds.n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    try:
        return ds.take(train_idx), ds.take(test_idx)
    except ValueError as e:
        raise ValueError(f"train/test split left a single-class part: {e}") from None
