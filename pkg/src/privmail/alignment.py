"""Least-squares similarity alignment (Kabsch with Umeyama's scale)."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DegenerateAnchors, DimensionMismatch
from .validation import check_matrix

RANK_TOL = 1e-12


@dataclass(frozen=True)
class RigidTransform:
    """``x -> scale * rotation @ x + translation``."""

    rotation: np.ndarray
    scale: float
    translation: np.ndarray

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), 1.0, np.zeros(dim))

    @property
    def dim(self):
        return self.rotation.shape[0]


def estimate_transform(source_anchors, target_anchors):
    """Similarity transform minimising ``sum ||s R src_i + t - tgt_i||^2``.

    Umeyama's closed form: SVD of the cross-covariance, with the sign of the
    last singular direction flipped when needed so ``det(R) = +1``.

    Raises
    ------
    DegenerateAnchors
        Fewer than ``k + 1`` anchors, or source anchors spanning fewer than
        ``k - 1`` dimensions (the rotation is then not determined).
    """
    src = check_matrix(source_anchors, name="source_anchors")
    tgt = check_matrix(target_anchors, name="target_anchors")
    if src.shape != tgt.shape:
        raise DimensionMismatch(f"anchor shapes differ: {src.shape} vs {tgt.shape}")
    m, k = src.shape
    if m < k + 1:
        raise DegenerateAnchors(f"need at least {k + 1} anchors in {k}-D, got {m}")

    mu_src = src.mean(axis=0)
    mu_tgt = tgt.mean(axis=0)
    src_c = src - mu_src
    tgt_c = tgt - mu_tgt
    var_src = np.sum(src_c**2) / m

    src_sv = np.linalg.svd(src_c, compute_uv=False)
    rank = int(np.sum(src_sv > RANK_TOL * src_sv[0])) if src_sv[0] > 0 else 0
    if not var_src > 0 or rank < max(k - 1, 1):
        raise DegenerateAnchors(
            f"source anchors span {rank} of {k} dimensions; rotation is undetermined"
        )

    cov = tgt_c.T @ src_c / m
    u, d, vt = np.linalg.svd(cov)
    s = np.ones(k)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[-1] = -1.0
    rotation = (u * s) @ vt
    scale = float(np.sum(d * s) / var_src)
    translation = mu_tgt - scale * rotation @ mu_src
    return RigidTransform(rotation=rotation, scale=scale, translation=translation)


def apply_transform(t, points):
    points = check_matrix(points, name="points")
    if points.shape[1] != t.dim:
        raise DimensionMismatch(f"points have {points.shape[1]} columns, transform is {t.dim}-D")
    return t.scale * points @ t.rotation.T + t.translation


def rmsd(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


class SimilarityAligner(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit(source, target)`` then ``transform(points)``."""

    def fit(self, X, y):
        self.transform_ = estimate_transform(X, y)
        self.rotation_ = self.transform_.rotation
        self.scale_ = self.transform_.scale
        self.translation_ = self.transform_.translation
        self.n_features_in_ = self.rotation_.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        return apply_transform(self.transform_, X)

    def score(self, X, y):
        """Negative RMSD between transformed ``X`` and ``y``."""
        return -rmsd(self.transform(X), y)
