"""Desk-scale synthetic stand-ins for extracted image features."""

import numpy as np

from .retrieval import FeatureDataset
from .validation import check_count, check_positive


def class_centers(classes, dim, rng):
    """Unit-norm, mutually separated class centers.

    Orthonormal when ``dim >= classes`` (pairwise distance sqrt(2)); otherwise
    the best of a few random draws by minimum pairwise distance.
    """
    if dim >= classes:
        q, _ = np.linalg.qr(rng.standard_normal((dim, classes)))
        return q.T.copy()
    best, best_gap = None, -1.0
    for _ in range(64):
        c = rng.standard_normal((classes, dim))
        c /= np.linalg.norm(c, axis=1, keepdims=True)
        d = np.linalg.norm(c[:, None] - c[None], axis=-1)
        gap = d[~np.eye(classes, dtype=bool)].min() if classes > 1 else np.inf
        if gap > best_gap:
            best, best_gap = c, gap
    return best


def generate_synthetic(classes, per_class, dim, cluster_spread=0.05, seed=0):
    """Gaussian clusters around unit-norm class centers (rows not normalized)."""
    classes = check_count(classes, "classes")
    per_class = check_count(per_class, "per_class")
    dim = check_count(dim, "dim")
    check_positive(cluster_spread, "cluster_spread", strict=False)
    rng = np.random.default_rng(seed)
    centers = class_centers(classes, dim, rng)
    labels = np.repeat(np.arange(classes), per_class)
    feats = centers[labels] + cluster_spread * rng.standard_normal((labels.size, dim))
    ids = [f"x{i:05d}" for i in range(labels.size)]
    return FeatureDataset(ids, feats, labels, role="public")


def split_roles(dataset, public_per_class, query_per_class, seed=0):
    """Partition each class into query, public and server rows.

    Returns ``(queries, public, server)``; the server gets whatever is left
    of each class.
    """
    rng = np.random.default_rng(seed)
    q_idx, p_idx, s_idx = [], [], []
    for c in np.unique(dataset.labels):
        members = rng.permutation(np.flatnonzero(dataset.labels == c))
        q_idx.extend(members[:query_per_class])
        p_idx.extend(members[query_per_class:query_per_class + public_per_class])
        s_idx.extend(members[query_per_class + public_per_class:])
    return (
        dataset.subset(sorted(q_idx), role="query"),
        dataset.subset(sorted(p_idx), role="public"),
        dataset.subset(sorted(s_idx), role="server"),
    )
