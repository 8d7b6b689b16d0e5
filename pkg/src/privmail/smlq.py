"""Supervised manifold learning query (SMLQ).

The embedding ``Z`` (n x k) minimises the difference of two Laplacian
quadratic forms::

    v(Z) = Tr(Z^T L_X Z) - alpha * Tr(Z^T L_Y Z)

with a majorization-minimization step that needs neither a matrix inverse
nor a step size::

    Z_t = 1/2 * Diag(L_X)^+ (alpha L_Y - L_X) Z_{t-1} + Z_{t-1}

Each step is guaranteed not to increase ``v``.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DimensionMismatch
from .rng import as_generator
from .linalg import (
    diag_pseudo_inverse_vector,
    gaussian_kernel_laplacian,
    label_laplacian,
    normalize_rows,
)
from .validation import (
    check_count,
    check_labels,
    check_matrix,
    check_positive,
    check_square,
)

# Per-dataset defaults (CUB-200-2011 column for sigma and alpha).
DEFAULT_ALPHA = 0.5
DEFAULT_KERNEL_BANDWIDTH = 5.0
DEFAULT_EMBED_DIM = 2
DEFAULT_INIT_STDDEV = 1e-8
DEFAULT_POST_ITERATIONS = 5


@dataclass(frozen=True)
class SmlqConfig:
    alpha: float = DEFAULT_ALPHA
    kernel_bandwidth: float = DEFAULT_KERNEL_BANDWIDTH
    embed_dim: int = DEFAULT_EMBED_DIM
    init_stddev: float = DEFAULT_INIT_STDDEV
    max_iterations: int = 100
    rel_tolerance: float = 1e-6

    def __post_init__(self):
        check_positive(self.alpha, "alpha", strict=False)
        check_positive(self.kernel_bandwidth, "kernel_bandwidth")
        check_count(self.embed_dim, "embed_dim")
        check_positive(self.init_stddev, "init_stddev")
        check_count(self.max_iterations, "max_iterations")
        check_positive(self.rel_tolerance, "rel_tolerance", strict=False)


@dataclass
class Embedding:
    matrix: np.ndarray
    iterations_run: int
    objective_trace: list = field(default_factory=list)

    @property
    def converged_objective(self):
        return self.objective_trace[-1]


def _check_system(z, l_x, l_y):
    z = check_matrix(z, name="embedding")
    n = z.shape[0]
    l_x = check_square(l_x, n, name="L_X")
    l_y = check_square(l_y, n, name="L_Y")
    return z, l_x, l_y


def smlq_objective(z, l_x, l_y, alpha):
    """``Tr(z^T L_X z) - alpha * Tr(z^T L_Y z)``."""
    z, l_x, l_y = _check_system(z, l_x, l_y)
    return float(np.sum(z * (l_x @ z)) - alpha * np.sum(z * (l_y @ z)))


def smlq_iterate(x_prev, l_x, l_y, alpha):
    """One majorization-minimization step of the SMLQ objective."""
    x_prev, l_x, l_y = _check_system(x_prev, l_x, l_y)
    return _step(x_prev, l_x, l_y, alpha, diag_pseudo_inverse_vector(np.diag(l_x)))


def _step(x, l_x, l_y, alpha, d_inv):
    return 0.5 * d_inv[:, None] * ((alpha * l_y - l_x) @ x) + x


def relative_change(current, previous):
    return abs(current - previous) / max(1.0, abs(previous))


def iterate_to_convergence(init, l_x, l_y, alpha, max_iterations, rel_tolerance=0.0):
    """Run SMLQ steps from ``init`` with fixed Laplacians.

    Stops after ``max_iterations`` steps, or earlier once the objective's
    relative change ``|v_t - v_{t-1}| / max(1, |v_{t-1}|)`` drops below
    ``rel_tolerance``. The returned trace starts with the objective at
    ``init``.
    """
    z, l_x, l_y = _check_system(init, l_x, l_y)
    max_iterations = check_count(max_iterations, "max_iterations", minimum=0)
    d_inv = diag_pseudo_inverse_vector(np.diag(l_x))
    trace = [smlq_objective(z, l_x, l_y, alpha)]
    it = 0
    while it < max_iterations:
        z = _step(z, l_x, l_y, alpha, d_inv)
        trace.append(smlq_objective(z, l_x, l_y, alpha))
        it += 1
        if relative_change(trace[-1], trace[-2]) < rel_tolerance:
            break
    return Embedding(matrix=z, iterations_run=it, objective_trace=trace)


def random_init(n_rows, embed_dim, init_stddev, random_state=None):
    """Initial embedding with i.i.d. ``N(0, init_stddev^2)`` entries."""
    return as_generator(random_state).normal(0.0, init_stddev, size=(n_rows, embed_dim))



def build_laplacians(features, labels, kernel_bandwidth):
    features = check_matrix(features, name="features")
    labels = check_labels(labels, n_rows=features.shape[0])
    return (
        gaussian_kernel_laplacian(features, kernel_bandwidth),
        label_laplacian(labels, kernel_bandwidth),
    )


def run_smlq(features, labels, config=None, init=None, random_state=None):
    """Embed ``features`` with SMLQ.

    ``features`` are expected to be row-normalized already. When ``init`` is
    None a fresh ``N(0, sigma_q^2)`` start is drawn from ``random_state``.
    """
    config = config or SmlqConfig()
    l_x, l_y = build_laplacians(features, labels, config.kernel_bandwidth)
    n = l_x.shape[0]
    if init is None:
        init = random_init(n, config.embed_dim, config.init_stddev, random_state)
    else:
        init = check_matrix(init, name="init")
        if init.shape != (n, config.embed_dim):
            raise DimensionMismatch(
                f"init has shape {init.shape}, expected {(n, config.embed_dim)}"
            )
    return iterate_to_convergence(
        init, l_x, l_y, config.alpha, config.max_iterations, config.rel_tolerance
    )


class SMLQEmbedding(TransformerMixin, BaseEstimator):
    """Supervised manifold embedding estimator.

    Transductive like :class:`sklearn.manifold.SpectralEmbedding`: the
    embedding exists only for the training rows, so there is ``fit`` and
    ``fit_transform`` but no out-of-sample ``transform``.

    Parameters
    ----------
    n_components : int
        Embedding dimension.
    alpha : float
        Weight of the label-Laplacian term.
    kernel_bandwidth : float
        Gaussian kernel bandwidth shared by the feature and label graphs.
    init_stddev : float
        Standard deviation of the random initial embedding.
    max_iter, tol
        Iteration cap and relative objective-change stopping threshold.
    normalize : bool
        Row-normalize features before building the feature graph.
    random_state : int, RandomState or None
    """

    def __init__(
        self,
        n_components=DEFAULT_EMBED_DIM,
        alpha=DEFAULT_ALPHA,
        kernel_bandwidth=DEFAULT_KERNEL_BANDWIDTH,
        init_stddev=DEFAULT_INIT_STDDEV,
        max_iter=100,
        tol=1e-6,
        normalize=True,
        random_state=None,
    ):
        self.n_components = n_components
        self.alpha = alpha
        self.kernel_bandwidth = kernel_bandwidth
        self.init_stddev = init_stddev
        self.max_iter = max_iter
        self.tol = tol
        self.normalize = normalize
        self.random_state = random_state

    def _config(self):
        return SmlqConfig(
            alpha=self.alpha,
            kernel_bandwidth=self.kernel_bandwidth,
            embed_dim=self.n_components,
            init_stddev=self.init_stddev,
            max_iterations=self.max_iter,
            rel_tolerance=self.tol,
        )

    def fit(self, X, y, init=None):
        X = check_matrix(X, name="X", min_rows=2)
        y = check_labels(y, n_rows=X.shape[0])
        if self.normalize:
            X = normalize_rows(X)
        result = run_smlq(X, y, self._config(), init=init, random_state=self.random_state)
        self.embedding_ = result.matrix
        self.n_iter_ = result.iterations_run
        self.objective_trace_ = np.asarray(result.objective_trace)
        self.n_features_in_ = X.shape[1]
        return self

    def fit_transform(self, X, y, init=None):
        return self.fit(X, y, init=init).embedding_

    def objective(self):
        check_is_fitted(self, "embedding_")
        return float(self.objective_trace_[-1])
