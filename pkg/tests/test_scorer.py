import math

import numpy as np
import pytest

from distauc.data import Dataset
from distauc.scorer import (ScorerSpec, init_params, lipschitz_bound, score,
                            score_batch, score_grad, smoothness_bound)
from oracles import central_fd_grad, rel_err


def test_param_counts():
    assert ScorerSpec("linear_sigmoid", 7).param_count == 8
    spec = ScorerSpec("mlp_sigmoid", 5, hidden=4)
    assert spec.param_count == (5 + 1) * 4 + 4 + 1
    with pytest.raises(ValueError):
        ScorerSpec("mlp_sigmoid", 5)
    with pytest.raises(ValueError):
        ScorerSpec("relu_net", 5)


def test_linear_zero_params_scores_half():
    spec = ScorerSpec("linear_sigmoid", 4)
    assert score(spec, np.zeros(5), np.random.default_rng(0).standard_normal(4)) == 0.5


def test_linear_orthogonal_input_scores_half():
    spec = ScorerSpec("linear_sigmoid", 3)
    params = np.array([1.0, 0.0, 0.0, 0.0])  # weight e1, zero bias
    assert score(spec, params, np.array([0.0, 2.0, -1.0])) == 0.5


def test_linear_matches_hand_rolled_sigmoid():
    # independent 3-line reference: sigmoid(w.x + b)
    rng = np.random.default_rng(42)
    spec = ScorerSpec("linear_sigmoid", 6)
    for _ in range(50):
        params = rng.standard_normal(7)
        x = rng.standard_normal(6)
        ref = 1.0 / (1.0 + math.exp(-(float(params[:6] @ x) + params[6])))
        assert abs(score(spec, params, x) - ref) < 1e-15


def test_score_strictly_inside_unit_interval():
    spec = ScorerSpec("linear_sigmoid", 2)
    for scale in (1.0, 50.0, 1000.0):
        h = score(spec, np.array([scale, scale, scale]), np.array([1.0, 1.0]))
        assert 0.0 < h < 1.0
        h = score(spec, np.array([-scale, -scale, -scale]), np.array([1.0, 1.0]))
        assert 0.0 < h < 1.0


def test_linear_grad_at_zero_is_quarter_x1():
    spec = ScorerSpec("linear_sigmoid", 3)
    x = np.array([0.3, -1.2, 2.0])
    h, g = score_grad(spec, np.zeros(4), x)
    assert h == 0.5
    assert np.allclose(g, 0.25 * np.r_[x, 1.0], rtol=0, atol=1e-16)


@pytest.mark.parametrize("kind,hidden", [("linear_sigmoid", None), ("mlp_sigmoid", 5)])
def test_grad_matches_finite_differences(kind, hidden):
    rng = np.random.default_rng(7)
    spec = ScorerSpec(kind, 4, hidden=hidden)
    for _ in range(100):
        params = rng.standard_normal(spec.param_count)
        x = rng.standard_normal(4)
        _, g = score_grad(spec, params, x)
        g_fd = central_fd_grad(lambda p: score(spec, p, x), params, h=1e-5)
        assert rel_err(g_fd, g) <= 1e-5


def test_score_batch_matches_scalar_path():
    rng = np.random.default_rng(3)
    for kind, hidden in (("linear_sigmoid", None), ("mlp_sigmoid", 3)):
        spec = ScorerSpec(kind, 5, hidden=hidden)
        params = rng.standard_normal(spec.param_count)
        X = rng.standard_normal((40, 5))
        hb = score_batch(spec, params, X)
        hs = np.array([score(spec, params, X[i]) for i in range(40)])
        assert np.allclose(hb, hs, rtol=0, atol=1e-14)


def test_dimension_mismatch_raises():
    spec = ScorerSpec("linear_sigmoid", 4)
    with pytest.raises(ValueError):
        score(spec, np.zeros(6), np.zeros(4))
    with pytest.raises(ValueError):
        score_grad(spec, np.zeros(5), np.zeros(3))


def _unit_norm_dataset(n=32, d=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    y = np.r_[np.ones(n // 2), -np.ones(n - n // 2)].astype(int)
    return Dataset(X, y)


def test_lipschitz_bound_unit_norm_closed_form():
    ds = _unit_norm_dataset()
    spec = ScorerSpec("linear_sigmoid", 3)
    assert abs(lipschitz_bound(spec, ds) - 0.25 * math.sqrt(2.0)) < 1e-12


def test_lipschitz_bound_bias_only():
    ds = Dataset(np.zeros((2, 3)), [1, -1])
    spec = ScorerSpec("linear_sigmoid", 3)
    assert lipschitz_bound(spec, ds) == 0.25


def test_lipschitz_bound_dominates_observed_grads():
    rng = np.random.default_rng(12)
    spec = ScorerSpec("linear_sigmoid", 4)
    X = rng.standard_normal((60, 4)) * 2.0
    y = np.r_[np.ones(30), -np.ones(30)].astype(int)
    ds = Dataset(X, y)
    bound = lipschitz_bound(spec, ds)
    worst = 0.0
    for _ in range(1000):
        params = rng.standard_normal(5) * rng.uniform(0.1, 5.0)
        i = int(rng.integers(0, 60))
        _, g = score_grad(spec, params, X[i])
        worst = max(worst, float(np.linalg.norm(g)))
    assert worst <= bound + 1e-12


def test_mlp_bound_needs_params():
    ds = _unit_norm_dataset()
    spec = ScorerSpec("mlp_sigmoid", 3, hidden=4)
    with pytest.raises(ValueError):
        lipschitz_bound(spec, ds)
    params = init_params(spec, seed=1)
    assert lipschitz_bound(spec, ds, params=params) > 0.0
    assert smoothness_bound(spec, ds, params=params) > 0.0


def test_mlp_bound_dominates_observed_grads_at_those_params():
    rng = np.random.default_rng(5)
    ds = _unit_norm_dataset(n=50, d=4, seed=2)
    spec = ScorerSpec("mlp_sigmoid", 4, hidden=6)
    params = init_params(spec, seed=3, scale=0.5)
    bound = lipschitz_bound(spec, ds, params=params)
    for i in range(50):
        _, g = score_grad(spec, params, ds.X[i])
        assert float(np.linalg.norm(g)) <= bound + 1e-12


def test_init_params():
    lin = ScorerSpec("linear_sigmoid", 3)
    assert np.array_equal(init_params(lin), np.zeros(4))
    mlp = ScorerSpec("mlp_sigmoid", 3, hidden=2)
    p1 = init_params(mlp, seed=4)
    p2 = init_params(mlp, seed=4)
    assert np.array_equal(p1, p2)
    assert np.any(p1 != 0.0)
