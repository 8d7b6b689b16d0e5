"""Global sensitivity of the first SMLQ iterate.

For unit-norm rows ``X`` (padded with a zero row) and a neighbour ``X~`` with
one extra unit-norm row, the first iterate from a shared start ``Q`` is::

    f(X) = 1/2 Diag(L_X)^+ (alpha L_Y - L_X) Q + Q

and ``f(X) - f(X~) = 1/2 M Q``. The closed-form constant ``M`` bounds every
row of that difference operator, which gives::

    Delta <= M * sqrt(n + 1) * ||Q||_F / 2
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .exceptions import NonPositiveBound
from .rng import spawn
from .linalg import diag_pseudo_inverse_vector, gaussian_affinity, laplacian_from_affinity
from .validation import check_count, check_positive, ValidationError


class BoundPremiseWarning(UserWarning):
    """The closed-form constant was derived from diagonal lower bounds that
    are nonpositive for these parameters, so it may not bound the true
    sensitivity."""


@dataclass(frozen=True)
class SensitivityParams:
    """Inputs of the closed-form bound.

    ``num_classes_minus_one`` is ``c``, the largest label value; labels live
    in ``{0, ..., c}``.
    """

    n: int
    alpha: float
    kernel_bandwidth: float
    num_classes_minus_one: int
    q_frobenius: float = 1.0

    def __post_init__(self):
        check_count(self.n, "n", minimum=2)
        check_count(self.num_classes_minus_one, "num_classes_minus_one", minimum=1)
        check_positive(self.kernel_bandwidth, "kernel_bandwidth")
        check_positive(self.alpha, "alpha", strict=False)
        check_positive(self.q_frobenius, "q_frobenius", strict=False)


@dataclass(frozen=True)
class SensitivityBound:
    m_ii: float
    m_ij: float
    m_composite: float
    delta: float

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValidationError(f"sensitivity must be nonnegative, got {self.delta!r}")


def _terms(p):
    n, s2 = p.n, p.kernel_bandwidth**2
    e_half = math.exp(-1.0 / (2.0 * s2))
    e_two = math.exp(-2.0 / s2)
    lx_min = n * e_two + e_half - 1.0  # lower bound of Diag(L_X)
    lxt_min = (n + 1) * e_two - 1.0  # lower bound of Diag(L_X~)
    lx_max = n + e_half - 1.0  # upper bound of Diag(L_X)
    return n, s2, lx_min, lxt_min, lx_max


def bound_premises_hold(params):
    """True when both diagonal lower bounds used by the constants are positive."""
    _, _, lx_min, lxt_min, _ = _terms(params)
    return lx_min > 0 and lxt_min > 0


def compute_m_ii(params):
    """Bound on the squared diagonal entry of the difference operator."""
    n, s2, lx_min, lxt_min, lx_max = _terms(params)
    c2 = params.num_classes_minus_one**2
    ly_min = (n + 1) * math.exp(-c2 / (2.0 * s2)) - 1.0
    bracket = (
        (n / lx_min) ** 2
        + (n / lxt_min) ** 2
        - 2.0 * ly_min**2 / (n * lx_max)
    )
    return params.alpha**2 * bracket


def compute_m_ij(params):
    """Bound on a squared off-diagonal entry of the difference operator."""
    n, s2, lx_min, lxt_min, lx_max = _terms(params)
    a = params.alpha
    c2 = params.num_classes_minus_one**2
    cross = math.exp(-(c2 + 4.0) / (2.0 * s2))
    return (
        (a**2 + 1.0) / lx_min**2
        - 2.0 * a * cross / lx_max**2
        + (a**2 + 1.0) / lxt_min**2
        - 2.0 * a * cross / n**2
        - 2.0 * (a**2 * math.exp(-c2 / s2) + math.exp(-4.0 / s2)) / (n * lx_max)
        + 4.0 * a / (lx_min * lxt_min)
    )


def compute_delta(params):
    """Closed-form global sensitivity ``M sqrt(n+1) ||Q||_F / 2``.

    Raises
    ------
    NonPositiveBound
        When ``M = n M_ij + M_ii`` is not a finite positive number; a
        nonpositive "upper bound" cannot calibrate noise.
    """
    try:
        m_ii = compute_m_ii(params)
        m_ij = compute_m_ij(params)
    except ZeroDivisionError:
        raise NonPositiveBound(float("nan")) from None
    m = params.n * m_ij + m_ii
    if not (math.isfinite(m) and m > 0):
        raise NonPositiveBound(m)
    if not bound_premises_hold(params):
        warnings.warn(
            f"diagonal lower bounds are nonpositive for {params}; "
            "the sensitivity constant is not guaranteed to be an upper bound",
            BoundPremiseWarning,
            stacklevel=2,
        )
    delta = m * math.sqrt(params.n + 1) * params.q_frobenius / 2.0
    return SensitivityBound(m_ii=m_ii, m_ij=m_ij, m_composite=m, delta=delta)


def sensitivity_params_for(n, labels, alpha, kernel_bandwidth, q):
    """Params for a concrete client dataset and realized start ``Q``.

    ``c`` is the largest label present (at least 1).
    """
    c = max(1, int(np.max(labels)))
    return SensitivityParams(
        n=int(n),
        alpha=float(alpha),
        kernel_bandwidth=float(kernel_bandwidth),
        num_classes_minus_one=c,
        q_frobenius=float(np.linalg.norm(q)),
    )


# --- brute-force verification -------------------------------------------------


def first_iterate_operator(points, labels, alpha, kernel_bandwidth):
    """``Diag(L_X)^+ (alpha L_Y - L_X)`` for the given rows and labels."""
    l_x = laplacian_from_affinity(gaussian_affinity(points, kernel_bandwidth))
    y = np.asarray(labels, dtype=float)[:, None]
    l_y = laplacian_from_affinity(gaussian_affinity(y, kernel_bandwidth))
    d_inv = diag_pseudo_inverse_vector(np.diag(l_x))
    return d_inv[:, None] * (alpha * l_y - l_x)


def neighbour_difference(x, y, extra_row, extra_label, q, alpha, kernel_bandwidth):
    """``||f(X) - f(X~)||_F`` with ``X`` and ``Y`` padded by a zero row."""
    x_pad = np.vstack([x, np.zeros((1, x.shape[1]))])
    y_pad = np.append(y, 0)
    x_nb = np.vstack([x, extra_row[None, :]])
    y_nb = np.append(y, extra_label)
    op = first_iterate_operator(x_pad, y_pad, alpha, kernel_bandwidth)
    op_nb = first_iterate_operator(x_nb, y_nb, alpha, kernel_bandwidth)
    return float(np.linalg.norm(0.5 * (op - op_nb) @ q))


def _unit_rows(rng, n, dim):
    v = rng.standard_normal((n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _sample_pair(rng, n, dim, c, mode):
    """Draw a neighbouring pair; ``mode`` varies the geometry that is probed."""
    if mode == 0:
        x = _unit_rows(rng, n, dim)
        extra = _unit_rows(rng, 1, dim)[0]
    elif mode == 1:
        # extra row duplicates an existing row
        x = _unit_rows(rng, n, dim)
        extra = x[rng.integers(n)].copy()
    elif mode == 2:
        # all rows coincide, extra row antipodal
        u = _unit_rows(rng, 1, dim)[0]
        x = np.tile(u, (n, 1))
        extra = -u
    else:
        # rows split between a point and its antipode
        u = _unit_rows(rng, 1, dim)[0]
        signs = rng.choice([-1.0, 1.0], size=n)
        x = signs[:, None] * u
        extra = rng.choice([-1.0, 1.0]) * u
    if mode >= 2:
        y = rng.choice([0, c], size=n)
    else:
        y = rng.integers(0, c + 1, size=n)
    extra_label = int(rng.integers(0, c + 1))
    return x, y, extra, extra_label


def _trial_block(params, q, dim, seeds):
    best = 0.0
    for i, ss in seeds:
        rng = np.random.default_rng(ss)
        x, y, extra, extra_label = _sample_pair(
            rng, params.n, dim, params.num_classes_minus_one, i % 4
        )
        diff = neighbour_difference(
            x, y, extra, extra_label, q, params.alpha, params.kernel_bandwidth
        )
        best = max(best, diff)
    return best


def fixed_start(params, embed_dim, seed):
    """A start matrix of shape ``(n+1, embed_dim)`` with ``||Q||_F = q_frobenius``."""
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((params.n + 1, embed_dim))
    return q * (params.q_frobenius / np.linalg.norm(q))


def verify_bound_empirically(
    params, trials, seed, embed_dim=2, feature_dim=None, delta=None, n_jobs=None
):
    """Brute-force check of the closed-form sensitivity bound.

    Samples ``trials`` neighbouring pairs (unit-norm rows, labels in
    ``{0, ..., c}``), evaluates the exact first-iterate difference for a
    fixed start ``Q`` with the requested Frobenius norm, and compares the
    largest observed difference with ``delta`` (the closed-form value when
    not given).

    Each trial draws from its own child of ``SeedSequence(seed)``, so the
    result does not depend on ``n_jobs``.
    """
    trials = check_count(trials, "trials")
    dim = feature_dim or embed_dim
    if delta is None:
        delta = compute_delta(params).delta
    q_seed, *trial_seeds = spawn(seed, trials + 1)
    q = fixed_start(params, embed_dim, q_seed)
    indexed = list(enumerate(trial_seeds))
    if n_jobs in (None, 1):
        observed = _trial_block(params, q, dim, indexed)
    else:
        chunks = [indexed[i::8] for i in range(8)]
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_trial_block)(params, q, dim, chunk) for chunk in chunks if chunk
        )
        observed = max(parts)
    return {
        "max_observed": observed,
        "delta": float(delta),
        "satisfied": bool(observed <= delta),
        "trials": trials,
    }
