"""Differentially private supervised manifold embeddings for image retrieval."""

__version__ = "0.1.0"

from .alignment import RigidTransform, SimilarityAligner, apply_transform, estimate_transform
from .exceptions import (
    DegenerateAnchors,
    DimensionMismatch,
    DuplicateId,
    InvalidBandwidth,
    InvalidBudget,
    MissingClass,
    NonPositiveBound,
    ParseError,
    PrivMailError,
    TooFewRows,
    ValidationError,
    ZeroRow,
)
from .linalg import (
    diag_pseudo_inverse,
    gaussian_kernel_laplacian,
    label_laplacian,
    normalize_rows,
)
from .mechanism import (
    NoiseCalibration,
    PrivacyBudget,
    PrivateMailEmbedding,
    calibrate_noise,
    gaussian_mechanism,
    private_mail,
)
from .retrieval import (
    FeatureDataset,
    PrivateRetriever,
    RetrievalConfig,
    build_dummy_targets,
    client_pipeline,
    privacy_utility_sweep,
    recall_at_k,
    retrieve,
    server_pipeline,
)
from .sensitivity import (
    SensitivityBound,
    SensitivityParams,
    compute_delta,
    compute_m_ii,
    compute_m_ij,
    verify_bound_empirically,
)
from .smlq import SMLQEmbedding, SmlqConfig, run_smlq, smlq_iterate, smlq_objective
