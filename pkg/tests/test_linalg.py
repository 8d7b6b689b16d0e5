import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from privmail.exceptions import InvalidBandwidth, TooFewRows, ZeroRow
from privmail.linalg import (
    diag_pseudo_inverse,
    gaussian_kernel_laplacian,
    is_laplacian,
    label_laplacian,
    normalize_rows,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_normalize_3_4_5():
    np.testing.assert_allclose(normalize_rows([[3.0, 4.0]]), [[0.6, 0.8]], rtol=0, atol=1e-15)


def test_normalize_identity_unchanged():
    np.testing.assert_array_equal(normalize_rows(np.eye(2)), np.eye(2))


def test_normalize_random_norms(rng):
    out = normalize_rows(rng.standard_normal((10, 5)))
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)


def test_normalize_zero_row_names_index():
    with pytest.raises(ZeroRow) as err:
        normalize_rows([[1.0, 0.0], [0.0, 0.0]])
    assert err.value.index == 1


def test_normalize_rejects_nonfinite():
    with pytest.raises(ValueError):
        normalize_rows([[np.nan, 1.0]])


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 8), st.integers(1, 5)), elements=finite))
def test_normalize_idempotent_and_direction_preserving(m):
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms < 1e-6):
        return
    once = normalize_rows(m)
    np.testing.assert_allclose(normalize_rows(once), once, atol=1e-12)
    np.testing.assert_allclose(once * norms[:, None], m, atol=1e-9)


def test_identical_points_laplacian():
    lap = gaussian_kernel_laplacian([[0.3, 0.4], [0.3, 0.4]], 0.7)
    np.testing.assert_array_equal(lap, [[1.0, -1.0], [-1.0, 1.0]])


def test_kernel_value_at_sqrt_two_sigma():
    sigma = 1.3
    lap = gaussian_kernel_laplacian([[0.0], [np.sqrt(2 * sigma**2)]], sigma)
    assert lap[0, 1] == pytest.approx(-np.exp(-1.0), rel=1e-14)
    assert lap[0, 0] == pytest.approx(np.exp(-1.0), rel=1e-14)
    assert lap[0, 1] == pytest.approx(-0.3679, abs=1e-4)


def test_random_laplacian_structure(rng):
    lap = gaussian_kernel_laplacian(rng.standard_normal((5, 3)), 0.9)
    np.testing.assert_allclose(lap.sum(axis=1), 0.0, atol=1e-9)
    assert is_laplacian(lap)


def test_invalid_bandwidth_and_too_few_rows():
    with pytest.raises(InvalidBandwidth):
        gaussian_kernel_laplacian(np.zeros((2, 2)), 0.0)
    with pytest.raises(InvalidBandwidth):
        gaussian_kernel_laplacian(np.zeros((2, 2)), -1.0)
    with pytest.raises(TooFewRows):
        gaussian_kernel_laplacian(np.zeros((1, 2)), 1.0)


def test_label_laplacian_examples():
    np.testing.assert_array_equal(label_laplacian([0, 0], 1.0), [[1.0, -1.0], [-1.0, 1.0]])
    assert label_laplacian([0, 1], 1.0)[0, 1] == pytest.approx(-np.exp(-0.5), rel=1e-14)
    lap = label_laplacian([0, 1, 2], 2.0)
    np.testing.assert_array_equal(lap, lap.T)
    np.testing.assert_allclose(lap.sum(axis=1), 0.0, atol=1e-12)


def test_label_laplacian_rejects_negative_labels():
    with pytest.raises(ValueError):
        label_laplacian([0, -1], 1.0)


@settings(max_examples=60, deadline=None)
@given(
    arrays(float, st.tuples(st.integers(2, 9), st.integers(1, 4)), elements=finite),
    st.floats(0.05, 20),
)
def test_laplacian_contract_holds(points, sigma):
    assert is_laplacian(gaussian_kernel_laplacian(points, sigma))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1), st.floats(0.1, 5))
def test_laplacian_permutation_equivariant(n, seed, sigma):
    r = np.random.default_rng(seed)
    x = r.standard_normal((n, 3))
    perm = r.permutation(n)
    lap = gaussian_kernel_laplacian(x, sigma)
    np.testing.assert_allclose(
        gaussian_kernel_laplacian(x[perm], sigma), lap[np.ix_(perm, perm)], atol=1e-12
    )


def test_kernel_decreases_with_distance():
    x = np.array([[0.0], [0.5], [1.0], [2.0], [4.0]])
    weights = -gaussian_kernel_laplacian(x, 1.0)[0, 1:]
    assert np.all(np.diff(weights) < 0)


def test_diag_pseudo_inverse_examples():
    np.testing.assert_array_equal(diag_pseudo_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))
    np.testing.assert_array_equal(diag_pseudo_inverse(np.diag([0.0, 4.0])), np.diag([0.0, 0.25]))
    np.testing.assert_array_equal(diag_pseudo_inverse(np.diag([1e-13, 1.0])), np.diag([0.0, 1.0]))


def test_diag_pseudo_inverse_multiplies_back(rng):
    lap = gaussian_kernel_laplacian(rng.standard_normal((6, 2)), 1.0)
    prod = diag_pseudo_inverse(lap) @ np.diag(np.diag(lap))
    np.testing.assert_allclose(prod, np.eye(6), atol=1e-14)
