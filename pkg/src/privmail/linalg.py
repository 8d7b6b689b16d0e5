"""Dense matrix primitives and Gaussian-kernel graph Laplacians.

Kernel convention throughout the package::

    w(a, b) = exp(-||a - b||^2 / (2 * sigma^2))

The Laplacian is ``L = D - W`` with ``W`` the kernel adjacency (zero
diagonal) and ``D`` its row sums.
"""

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import InvalidBandwidth, TooFewRows, ZeroRow
from .validation import check_labels, check_matrix

PINV_TOL = 1e-12
ZERO_ROW_TOL = 1e-300


def normalize_rows(m):
    """Scale each row of ``m`` to unit Euclidean norm.

    Raises
    ------
    ZeroRow
        If some row has norm below 1e-300.
    """
    m = check_matrix(m)
    norms = np.linalg.norm(m, axis=1)
    bad = np.flatnonzero(norms < ZERO_ROW_TOL)
    if bad.size:
        raise ZeroRow(int(bad[0]))
    return m / norms[:, None]


def gaussian_affinity(points, kernel_bandwidth):
    """Kernel adjacency matrix with a zero diagonal."""
    if not kernel_bandwidth > 0:
        raise InvalidBandwidth(kernel_bandwidth)
    sq = cdist(points, points, "sqeuclidean")
    w = np.exp(-sq / (2.0 * kernel_bandwidth**2))
    np.fill_diagonal(w, 0.0)
    return w


def laplacian_from_affinity(w):
    lap = -w
    np.fill_diagonal(lap, w.sum(axis=1))
    return lap


def gaussian_kernel_laplacian(points, kernel_bandwidth):
    """Graph Laplacian of the Gaussian-kernel graph over the rows of ``points``.

    Off-diagonal entries are ``-exp(-||x_i - x_k||^2 / (2 sigma^2))`` and each
    diagonal entry is the negated sum of its row's off-diagonals, so every
    row sums to zero.
    """
    points = check_matrix(points, name="points")
    if not kernel_bandwidth > 0:
        raise InvalidBandwidth(kernel_bandwidth)
    if points.shape[0] < 2:
        raise TooFewRows(points.shape[0])
    return laplacian_from_affinity(gaussian_affinity(points, kernel_bandwidth))


def label_laplacian(labels, kernel_bandwidth):
    """Gaussian-kernel Laplacian over integer labels treated as 1-D points."""
    labels = check_labels(labels)
    return gaussian_kernel_laplacian(labels.astype(float)[:, None], kernel_bandwidth)


def diag_pseudo_inverse(lap, tol=PINV_TOL):
    """Pseudo-inverse of ``Diag(lap)``: ``1/L_ii`` where ``L_ii > tol``, else 0."""
    d = np.diag(np.asarray(lap, dtype=float))
    return np.diag(diag_pseudo_inverse_vector(d, tol))


def diag_pseudo_inverse_vector(d, tol=PINV_TOL):
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    mask = d > tol
    out[mask] = 1.0 / d[mask]
    return out


def is_laplacian(lap, sym_tol=1e-12, rowsum_tol=1e-9):
    """Structural check used by tests and debug assertions."""
    lap = np.asarray(lap, dtype=float)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        return False
    asym = np.abs(lap - lap.T)
    if np.any(asym > sym_tol * np.maximum(1.0, np.abs(lap))):
        return False
    if np.any(np.abs(lap.sum(axis=1)) > rowsum_tol):
        return False
    off = lap[~np.eye(lap.shape[0], dtype=bool)]
    return bool(np.all(off >= -1.0) and np.all(off <= 0.0) and np.all(np.diag(lap) >= 0))
