import numpy as np
import pytest

from distauc.data import (Dataset, LibsvmParseError, load_csv, load_libsvm,
                          rebalance, shard, synth_gaussians, train_test_split)


def test_load_libsvm_direct_readback(tmp_path):
    f = tmp_path / "tiny.svm"
    f.write_text("+1 1:0.5\n-1 2:1.0\n")
    ds = load_libsvm(f, dim_hint=2)
    assert ds.n == 2 and ds.dim == 2
    assert ds.positive_ratio == 0.5
    assert np.allclose(ds.X, [[0.5, 0.0], [0.0, 1.0]])
    assert ds.y.tolist() == [1, -1]


def test_load_libsvm_zero_one_labels(tmp_path):
    f = tmp_path / "zo.svm"
    f.write_text("0 1:1.0\n1 1:2.0\n0 2:3.0\n")
    ds = load_libsvm(f)
    assert sorted(ds.y.tolist()) == [-1, -1, 1]
    assert ds[1].label == 1  # raw label 1 maps to +1


def test_load_libsvm_dim_hint_extends(tmp_path):
    f = tmp_path / "hint.svm"
    f.write_text("+1 1:1\n-1 1:2\n")
    assert load_libsvm(f).dim == 1
    assert load_libsvm(f, dim_hint=7).dim == 7


def test_load_libsvm_reports_line_and_column(tmp_path):
    f = tmp_path / "bad.svm"
    f.write_text("+1 1:0.5\n-1 2:oops\n")
    with pytest.raises(LibsvmParseError) as ei:
        load_libsvm(f)
    assert ei.value.line == 2
    assert ei.value.column == 6  # the value part of "2:oops"

    f2 = tmp_path / "bad2.svm"
    f2.write_text("+1 1:0.5\nx 1:1\n")
    with pytest.raises(LibsvmParseError) as ei2:
        load_libsvm(f2)
    assert (ei2.value.line, ei2.value.column) == (2, 1)


def test_load_libsvm_single_class_rejected(tmp_path):
    f = tmp_path / "one.svm"
    f.write_text("+1 1:1\n+1 1:2\n")
    with pytest.raises(ValueError, match="one label class"):
        load_libsvm(f)


def test_load_libsvm_label_count_matches_independent_recount(tmp_path):
    # write 1000 lines, recount labels with a plain text scan
    rng = np.random.default_rng(11)
    lines = []
    for _ in range(1000):
        lab = "+1" if rng.random() < 0.3 else "-1"
        lines.append(f"{lab} 1:{rng.random():.6f} 3:{rng.random():.6f}")
    f = tmp_path / "big.svm"
    f.write_text("\n".join(lines) + "\n")
    ds = load_libsvm(f)
    recount = sum(1 for ln in f.read_text().splitlines() if ln.split()[0] == "+1")
    assert ds.n == 1000
    assert ds.positive_ratio == recount / 1000


def test_load_csv(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("f1,f2,label\n0.5,1.0,1\n-0.5,0.25,0\n")
    ds = load_csv(f)
    assert ds.n == 2 and ds.dim == 2
    assert ds.y.tolist() == [1, -1]
    with pytest.raises(ValueError, match="column 2"):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,label\n1,x,0\n2,3,1\n")
        load_csv(bad)


def test_synth_exact_positive_count():
    ds = synth_gaussians(10, 3, 0.5, 1.0, seed=0)
    assert int((ds.y == 1).sum()) == 5
    ds2 = synth_gaussians(1000, 4, 0.71, 2.0, seed=5)
    assert int((ds2.y == 1).sum()) == round(1000 * 0.71)


def test_synth_rejects_empty_class():
    with pytest.raises(ValueError):
        synth_gaussians(10, 3, 0.01, 1.0, seed=0)
    with pytest.raises(ValueError):
        synth_gaussians(10, 3, 0.99, 1.0, seed=0)


def test_synth_deterministic():
    a = synth_gaussians(200, 6, 0.4, 1.5, seed=9)
    b = synth_gaussians(200, 6, 0.4, 1.5, seed=9)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    c = synth_gaussians(200, 6, 0.4, 1.5, seed=10)
    assert not np.array_equal(a.X, c.X)


def test_synth_zero_separation_gives_chance_auc():
    # with identical class distributions any fixed scorer is at chance level
    from distauc.metrics import auc
    ds = synth_gaussians(20000, 5, 0.5, 0.0, seed=3)
    w = np.random.default_rng(4).standard_normal(5)
    scores = ds.X @ w
    assert abs(auc(scores, ds.y) - 0.5) < 0.02


def test_rebalance_keep_forty_percent_negatives():
    # keeping all positives and 40% of negatives turns p=0.5 into p=5/7
    ds = synth_gaussians(2000, 3, 0.5, 1.0, seed=1)
    out = rebalance(ds, 5 / 7, seed=2)
    assert int((out.y == 1).sum()) == 1000
    assert int((out.y == -1).sum()) == 400
    assert abs(out.positive_ratio - 0.714285) < 1e-3


def test_rebalance_hand_solved_counts():
    # 500/(500+m) = 0.8  =>  m = 125
    ds = synth_gaussians(1000, 2, 0.5, 1.0, seed=7)
    out = rebalance(ds, 0.8, seed=8)
    assert int((out.y == -1).sum()) == 125
    assert out.positive_ratio == 0.8


def test_rebalance_below_granularity_is_identity():
    ds = synth_gaussians(1000, 2, 0.5, 1.0, seed=7)
    out = rebalance(ds, 0.5 + 1e-7, seed=8)
    assert out is ds


def test_rebalance_never_drops_positives():
    rng = np.random.default_rng(0)
    for seed in range(5):
        ds = synth_gaussians(500, 2, 0.3, 1.0, seed=seed)
        target = float(rng.uniform(0.35, 0.9))
        out = rebalance(ds, target, seed=seed + 1)
        assert int((out.y == 1).sum()) == int((ds.y == 1).sum())
        assert int((out.y == -1).sum()) <= int((ds.y == -1).sum())


def test_rebalance_rejects_lower_target():
    ds = synth_gaussians(100, 2, 0.5, 1.0, seed=1)
    with pytest.raises(ValueError, match="only drops negatives"):
        rebalance(ds, 0.4, seed=2)


def test_shard_sizes_and_partition():
    ds = synth_gaussians(10, 2, 0.5, 1.0, seed=0)
    sa = shard(ds, 3, seed=1)
    assert sorted(sa.sizes(), reverse=True) == [4, 3, 3]
    merged = np.sort(np.concatenate(sa.worker_shards))
    assert merged.tolist() == list(range(10))


def test_shard_partition_property_many_seeds():
    for seed in range(10):
        n = 17 + seed
        ds = synth_gaussians(n, 2, 0.4, 1.0, seed=seed)
        for k in (1, 2, 5, n):
            sa = shard(ds, k, seed=seed * 7 + k)
            merged = np.sort(np.concatenate(sa.worker_shards))
            assert np.array_equal(merged, np.arange(n))
            assert max(sa.sizes()) - min(sa.sizes()) <= 1


def test_data_primitives_use_separated_streams():
    # reusing one master seed across synthesis and sharding must not make
    # the shard permutation replay the label-placement permutation (which
    # would produce single-class shards)
    ds = synth_gaussians(4000, 5, 0.71, 2.0, seed=11)
    sa = shard(ds, 4, seed=11)
    for idx in sa.worker_shards:
        labels = ds.y[idx]
        assert (labels == 1).any() and (labels == -1).any()


def test_shard_k1_is_full_permutation():
    ds = synth_gaussians(12, 2, 0.5, 1.0, seed=0)
    sa = shard(ds, 1, seed=3)
    assert sorted(sa.worker_shards[0].tolist()) == list(range(12))


def test_shard_deterministic_and_bounds():
    ds = synth_gaussians(30, 2, 0.5, 1.0, seed=0)
    a = shard(ds, 4, seed=5)
    b = shard(ds, 4, seed=5)
    for sa, sb in zip(a.worker_shards, b.worker_shards):
        assert np.array_equal(sa, sb)
    with pytest.raises(ValueError):
        shard(ds, 31, seed=0)
    with pytest.raises(ValueError):
        shard(ds, 0, seed=0)


def test_dataset_invariants():
    with pytest.raises(ValueError, match="each class"):
        Dataset(np.ones((3, 2)), [1, 1, 1])
    with pytest.raises(ValueError, match=r"\+1/-1"):
        Dataset(np.ones((2, 2)), [1, 2])
    with pytest.raises(ValueError, match="non-finite"):
        Dataset(np.array([[np.nan, 1.0], [0.0, 1.0]]), [1, -1])
    ds = Dataset(np.eye(2), [1, -1])
    with pytest.raises(ValueError):
        ds.X[0, 0] = 5.0  # storage is read-only


def test_train_test_split_deterministic():
    ds = synth_gaussians(100, 3, 0.5, 1.0, seed=0)
    tr1, te1 = train_test_split(ds, 0.25, seed=4)
    tr2, te2 = train_test_split(ds, 0.25, seed=4)
    assert te1.n == 25 and tr1.n == 75
    assert np.array_equal(tr1.X, tr2.X) and np.array_equal(te1.X, te2.X)


def test_rebalance_deterministic():
    ds = synth_gaussians(600, 3, 0.4, 1.0, seed=2)
    a = rebalance(ds, 0.7, seed=9)
    b = rebalance(ds, 0.7, seed=9)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    c = rebalance(ds, 0.7, seed=10)
    assert not np.array_equal(a.X, c.X)
