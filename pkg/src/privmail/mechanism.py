"""Gaussian mechanism and the single-release private embedding protocol."""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import InvalidBudget
from .linalg import normalize_rows
from .rng import spawn
from .sensitivity import compute_delta, sensitivity_params_for
from .smlq import (
    DEFAULT_ALPHA,
    DEFAULT_EMBED_DIM,
    DEFAULT_INIT_STDDEV,
    DEFAULT_KERNEL_BANDWIDTH,
    SmlqConfig,
    build_laplacians,
    iterate_to_convergence,
    random_init,
)
from .validation import check_labels, check_matrix

DEFAULT_EPSILON = 0.1
DEFAULT_DELTA = 1e-5


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float = DEFAULT_EPSILON
    delta_dp: float = DEFAULT_DELTA

    def __post_init__(self):
        eps, dlt = self.epsilon, self.delta_dp
        if not (isinstance(eps, (int, float)) and math.isfinite(eps) and eps > 0):
            raise InvalidBudget(f"epsilon must be a finite positive number, got {eps!r}")
        if not (isinstance(dlt, (int, float)) and 0 < dlt < 1):
            raise InvalidBudget(f"delta must lie in (0, 1), got {dlt!r}")


@dataclass(frozen=True)
class NoiseCalibration:
    sensitivity: float
    noise_stddev: float


def gaussian_noise_multiplier(delta_dp):
    """``sqrt(2 ln(1.25 / delta))``."""
    return math.sqrt(2.0 * math.log(1.25 / delta_dp))


def calibrate_noise(sensitivity, budget):
    """Smallest Gaussian-mechanism stddev for ``(epsilon, delta)``-DP.

    ``sigma = sqrt(2 ln(1.25/delta)) * sensitivity / epsilon``.
    """
    if not isinstance(budget, PrivacyBudget):
        raise InvalidBudget(f"expected a PrivacyBudget, got {type(budget).__name__}")
    if not (math.isfinite(sensitivity) and sensitivity >= 0):
        raise InvalidBudget(f"sensitivity must be finite and >= 0, got {sensitivity!r}")
    stddev = gaussian_noise_multiplier(budget.delta_dp) * sensitivity / budget.epsilon
    return NoiseCalibration(sensitivity=float(sensitivity), noise_stddev=stddev)


def gaussian_mechanism(values, calib, seed=None):
    """Add i.i.d. ``N(0, noise_stddev^2)`` noise to every entry of ``values``.

    ``seed`` may be an int, a SeedSequence or a Generator.
    """
    values = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    return values + calib.noise_stddev * rng.standard_normal(values.shape)


def rng_streams(seed):
    """Independent generators for the start matrix and for the noise."""
    q_ss, noise_ss = spawn(seed, 2)
    return np.random.default_rng(q_ss), np.random.default_rng(noise_ss)


@dataclass
class PrivateRelease:
    """Output of one private embedding release.

    ``embedding`` is the only field safe to publish.
    """

    embedding: np.ndarray
    bound: object
    calib: NoiseCalibration
    start: np.ndarray


def private_mail(features, labels, config=None, budget=None, seed=None, noise_seed=None):
    """One private SMLQ release.

    Draws ``Q ~ N(0, sigma_q^2)``, runs exactly one SMLQ step from it, bounds
    the sensitivity of that step from ``(n, alpha, sigma, c, ||Q||_F)`` and
    adds calibrated Gaussian noise. ``features`` must already have unit-norm
    rows.

    The start matrix and the noise come from separate streams derived from
    ``seed``; ``noise_seed`` overrides the noise stream alone.
    """
    config = config or SmlqConfig()
    budget = budget or PrivacyBudget()
    features = check_matrix(features, name="features", min_rows=2)
    labels = check_labels(labels, n_rows=features.shape[0])
    n = features.shape[0]

    q_rng, noise_rng = rng_streams(seed)
    if noise_seed is not None:
        noise_rng = np.random.default_rng(noise_seed)
    q = random_init(n, config.embed_dim, config.init_stddev, q_rng)

    l_x, l_y = build_laplacians(features, labels, config.kernel_bandwidth)
    clean = iterate_to_convergence(q, l_x, l_y, config.alpha, max_iterations=1).matrix
    del l_x

    params = sensitivity_params_for(n, labels, config.alpha, config.kernel_bandwidth, q)
    bound = compute_delta(params)
    calib = calibrate_noise(bound.delta, budget)
    released = gaussian_mechanism(clean, calib, noise_rng)
    return PrivateRelease(embedding=released, bound=bound, calib=calib, start=q)


class PrivateMailEmbedding(TransformerMixin, BaseEstimator):
    """Differentially private supervised embedding (one private iteration).

    ``fit`` releases the noised first iterate and stores it as
    ``embedding_``; ``sensitivity_`` and ``noise_stddev_`` record the
    calibration. Row-normalizes ``X`` unless ``normalize=False``.
    """

    def __init__(
        self,
        n_components=DEFAULT_EMBED_DIM,
        alpha=DEFAULT_ALPHA,
        kernel_bandwidth=DEFAULT_KERNEL_BANDWIDTH,
        init_stddev=DEFAULT_INIT_STDDEV,
        epsilon=DEFAULT_EPSILON,
        delta=DEFAULT_DELTA,
        normalize=True,
        random_state=None,
    ):
        self.n_components = n_components
        self.alpha = alpha
        self.kernel_bandwidth = kernel_bandwidth
        self.init_stddev = init_stddev
        self.epsilon = epsilon
        self.delta = delta
        self.normalize = normalize
        self.random_state = random_state

    def fit(self, X, y):
        X = check_matrix(X, name="X", min_rows=2)
        if self.normalize:
            X = normalize_rows(X)
        config = SmlqConfig(
            alpha=self.alpha,
            kernel_bandwidth=self.kernel_bandwidth,
            embed_dim=self.n_components,
            init_stddev=self.init_stddev,
            max_iterations=1,
        )
        release = private_mail(
            X, y, config, PrivacyBudget(self.epsilon, self.delta), seed=self.random_state
        )
        self.embedding_ = release.embedding
        self.bound_ = release.bound
        self.sensitivity_ = release.bound.delta
        self.noise_stddev_ = release.calib.noise_stddev
        self.n_features_in_ = X.shape[1]
        return self

    def fit_transform(self, X, y):
        return self.fit(X, y).embedding_
