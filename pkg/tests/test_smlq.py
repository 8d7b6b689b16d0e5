import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from privmail.exceptions import DimensionMismatch
from privmail.linalg import gaussian_kernel_laplacian, label_laplacian, normalize_rows
from privmail.smlq import (
    SMLQEmbedding,
    SmlqConfig,
    iterate_to_convergence,
    run_smlq,
    smlq_iterate,
    smlq_objective,
)

from conftest import random_system


def pairwise_sum(z, lap):
    w = -lap.copy()
    np.fill_diagonal(w, 0.0)
    total = 0.0
    for i in range(len(z)):
        for j in range(len(z)):
            total += w[i, j] * np.sum((z[i] - z[j]) ** 2)
    return total / 2.0


def random_laplacian(rng, n):
    w = rng.uniform(0, 1, (n, n))
    w = (w + w.T) / 2
    np.fill_diagonal(w, 0.0)
    lap = -w
    np.fill_diagonal(lap, w.sum(axis=1))
    return lap


def test_objective_zero_matrix(rng):
    _, _, l_x, l_y, _ = random_system(rng)
    assert smlq_objective(np.zeros((6, 2)), l_x, l_y, 0.5) == 0.0


def test_objective_alpha_zero_is_nonnegative(rng):
    _, _, l_x, l_y, z = random_system(rng)
    assert smlq_objective(z, l_x, l_y, 0.0) >= 0.0


def test_objective_matches_pairwise_sum(rng):
    z = rng.standard_normal((4, 2))
    l_x, l_y = random_laplacian(rng, 4), random_laplacian(rng, 4)
    expected = pairwise_sum(z, l_x) - 0.5 * pairwise_sum(z, l_y)
    assert smlq_objective(z, l_x, l_y, 0.5) == pytest.approx(expected, rel=1e-12)


def test_objective_dimension_mismatch(rng):
    _, _, l_x, l_y, _ = random_system(rng)
    with pytest.raises(DimensionMismatch):
        smlq_objective(np.zeros((5, 2)), l_x, l_y, 0.5)
    with pytest.raises(DimensionMismatch):
        smlq_iterate(np.zeros((6, 2)), l_x, l_y[:5, :5], 0.5)


def test_iterate_fixed_point_when_bracket_vanishes(rng):
    l_x = random_laplacian(rng, 5)
    x = rng.standard_normal((5, 2))
    out = smlq_iterate(x, l_x, 2.0 * l_x, 0.5)
    np.testing.assert_array_equal(out, x)


def test_iterate_fixed_point_on_null_space(rng):
    _, _, l_x, l_y, _ = random_system(rng)
    x = np.ones((6, 2)) * 3.0
    np.testing.assert_allclose(smlq_iterate(x, l_x, l_y, 0.7), x, atol=1e-14)


def test_iterate_of_zero_is_zero(rng):
    _, _, l_x, l_y, _ = random_system(rng)
    np.testing.assert_array_equal(smlq_iterate(np.zeros((6, 2)), l_x, l_y, 0.5), 0.0)


def test_iterate_formula(rng):
    _, _, l_x, l_y, x = random_system(rng)
    expected = 0.5 * np.linalg.inv(np.diag(np.diag(l_x))) @ (0.5 * l_y - l_x) @ x + x
    np.testing.assert_allclose(smlq_iterate(x, l_x, l_y, 0.5), expected, rtol=1e-12, atol=1e-14)


def test_single_iterate_does_not_increase_objective(rng):
    _, _, l_x, l_y, x = random_system(rng, n=6, k=2)
    before = smlq_objective(x, l_x, l_y, 0.5)
    after = smlq_objective(smlq_iterate(x, l_x, l_y, 0.5), l_x, l_y, 0.5)
    assert after <= before + 1e-9 * max(1.0, abs(before))


@settings(max_examples=50, deadline=None)
@given(
    st.integers(2, 20), st.integers(1, 6), st.floats(0, 1), st.floats(0.3, 6),
    st.integers(0, 2**32 - 1),
)
def test_monotone_objective(n, d, alpha, sigma, seed):
    r = np.random.default_rng(seed)
    x = normalize_rows(r.standard_normal((n, d)))
    y = r.integers(0, 4, size=n)
    cfg = SmlqConfig(alpha=alpha, kernel_bandwidth=sigma, init_stddev=1.0, max_iterations=30,
                     rel_tolerance=0.0)
    trace = np.array(run_smlq(x, y, cfg, random_state=r).objective_trace)
    slack = 1e-9 * np.maximum(1.0, np.abs(trace[:-1]))
    assert np.all(np.diff(trace) <= slack)


@settings(max_examples=30, deadline=None)
@given(st.floats(-100, 100, allow_nan=False), st.integers(0, 2**32 - 1))
def test_iterate_is_linear_in_scale(c, seed):
    _, _, l_x, l_y, x = random_system(np.random.default_rng(seed))
    np.testing.assert_allclose(
        smlq_iterate(c * x, l_x, l_y, 0.5), c * smlq_iterate(x, l_x, l_y, 0.5),
        rtol=1e-12, atol=1e-12,
    )


def test_permutation_equivariance(rng):
    x, y, _, _, z0 = random_system(rng, n=9, d=4)
    perm = rng.permutation(9)
    cfg = SmlqConfig(kernel_bandwidth=1.0, max_iterations=10, rel_tolerance=0.0)
    base = run_smlq(x, y, cfg, init=z0).matrix
    permuted = run_smlq(x[perm], y[perm], cfg, init=z0[perm]).matrix
    np.testing.assert_allclose(permuted, base[perm], rtol=1e-10, atol=1e-14)


def test_one_iteration_trace_length(rng):
    x, y, _, _, _ = random_system(rng)
    out = run_smlq(x, y, SmlqConfig(max_iterations=1), random_state=0)
    assert out.iterations_run == 1
    assert len(out.objective_trace) == 2
    assert out.matrix.shape == (6, 2)


def three_clusters(seed, n=60, d=8):
    r = np.random.default_rng(seed)
    centers = r.standard_normal((3, d))
    y = np.repeat(np.arange(3), n // 3)
    return normalize_rows(centers[y] + 0.3 * r.standard_normal((n, d))), y


def test_three_cluster_trace_non_increasing():
    x, y = three_clusters(0)
    cfg = SmlqConfig(alpha=0.5, kernel_bandwidth=1.0, init_stddev=1.0, max_iterations=50,
                     rel_tolerance=0.0)
    trace = np.array(run_smlq(x, y, cfg, random_state=1).objective_trace)
    assert np.all(np.diff(trace) <= 1e-9 * np.maximum(1.0, np.abs(trace[:-1])))


def test_stopping_rule_uses_relative_change(rng):
    x, y, l_x, l_y, _ = random_system(rng)
    z0 = rng.standard_normal((6, 2))
    out = iterate_to_convergence(z0, l_x, l_y, 0.5, max_iterations=500, rel_tolerance=1e-3)
    t = out.objective_trace
    changes = [abs(b - a) / max(1.0, abs(a)) for a, b in zip(t[:-1], t[1:])]
    assert changes[-1] < 1e-3
    assert all(c >= 1e-3 for c in changes[:-1])


def test_init_shape_checked(rng):
    x, y, _, _, _ = random_system(rng)
    with pytest.raises(DimensionMismatch):
        run_smlq(x, y, SmlqConfig(), init=np.zeros((6, 3)))


@pytest.mark.parametrize("kwargs", [
    {"alpha": -0.1}, {"kernel_bandwidth": 0.0}, {"embed_dim": 0}, {"init_stddev": 0.0},
    {"max_iterations": 0}, {"rel_tolerance": -1.0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SmlqConfig(**kwargs)


def test_estimator_api(rng):
    x = rng.standard_normal((12, 4))
    y = np.repeat([0, 1, 2], 4)
    est = SMLQEmbedding(n_components=3, kernel_bandwidth=1.0, init_stddev=1.0, random_state=0)
    emb = est.fit_transform(x, y)
    assert emb.shape == (12, 3)
    assert est.n_features_in_ == 4
    assert est.objective() == est.objective_trace_[-1]
    again = clone(est).fit_transform(x, y)
    np.testing.assert_array_equal(emb, again)
    assert clone(est).get_params() == est.get_params()
