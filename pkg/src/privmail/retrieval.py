"""Private content-based retrieval over precomputed features.

Client side: the query row is hidden among dummy queries (one public
exemplar for every other class) and the shared public set, the
concatenation is shuffled, and a single private SMLQ release is made. All
further client iterations rebuild the feature graph from the released
embedding, so they are post-processing and never touch raw features.

Server side: its database plus the same public set are embedded without
noise. Public rows act as anchors for a similarity alignment of the client
embedding into the server frame, after which the server answers a k-NN
request for every query/dummy row and the client keeps only its own list.
"""

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .alignment import apply_transform, estimate_transform
from .exceptions import DimensionMismatch, MissingClass, PrivMailError, ValidationError
from .linalg import gaussian_kernel_laplacian, label_laplacian, normalize_rows
from .rng import seed_int, spawn
from .mechanism import DEFAULT_DELTA, DEFAULT_EPSILON, PrivacyBudget, private_mail
from .smlq import (
    DEFAULT_ALPHA,
    DEFAULT_EMBED_DIM,
    DEFAULT_INIT_STDDEV,
    DEFAULT_KERNEL_BANDWIDTH,
    DEFAULT_POST_ITERATIONS,
    SmlqConfig,
    iterate_to_convergence,
    run_smlq,
)
from .validation import check_count, check_labels, check_matrix

ROLES = ("query", "public", "server", "dummy")

DEFAULT_TOP_K = 8


class PostProcessingViolation(PrivMailError, RuntimeError):
    pass


@dataclass
class FeatureDataset:
    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    role: str = "public"

    def __post_init__(self):
        self.features = check_matrix(self.features, name="features")
        n = self.features.shape[0]
        self.labels = check_labels(self.labels, n_rows=n)
        self.ids = np.asarray([str(i) for i in self.ids], dtype=object)
        if self.ids.shape[0] != n:
            raise DimensionMismatch(f"{self.ids.shape[0]} ids for {n} rows")
        if len(set(self.ids)) != n:
            raise ValidationError("ids must be unique within a dataset")
        if self.role not in ROLES:
            raise ValidationError(f"role must be one of {ROLES}, got {self.role!r}")

    def __len__(self):
        return self.features.shape[0]

    def subset(self, index, role=None):
        index = np.asarray(index)
        return FeatureDataset(
            self.ids[index], self.features[index], self.labels[index], role or self.role
        )

    def with_role(self, role):
        return FeatureDataset(self.ids, self.features, self.labels, role)


@dataclass(frozen=True)
class RetrievalConfig:
    smlq: SmlqConfig = field(default_factory=SmlqConfig)
    budget: PrivacyBudget = field(default_factory=PrivacyBudget)
    top_k: int = DEFAULT_TOP_K
    post_iterations: int = DEFAULT_POST_ITERATIONS
    seed: int = 0

    def __post_init__(self):
        check_count(self.top_k, "top_k")
        check_count(self.post_iterations, "post_iterations", minimum=0)


class RawFeatureStore:
    """Holds the client's raw feature matrix and counts every read.

    ``seal()`` marks the point after which the pipeline is post-processing;
    any later read raises :class:`PostProcessingViolation`.
    """

    def __init__(self, features):
        self._features = features
        self.reads = 0
        self.reads_after_seal = 0
        self.sealed = False

    def read(self):
        if self.sealed:
            self.reads_after_seal += 1
            raise PostProcessingViolation("raw features read after the private release")
        self.reads += 1
        return self._features

    def seal(self):
        self.sealed = True


@dataclass
class ClientOutput:
    """What the client holds after the private phase.

    ``private_embedding`` and ``row_ids`` of public rows are sent to the
    server; ``row_roles`` for non-public rows stays on the client.
    """

    private_embedding: np.ndarray
    row_roles: list
    row_ids: list
    row_labels: np.ndarray
    bound: object = None
    calib: object = None
    store: RawFeatureStore = None

    @property
    def query_index(self):
        return self.row_roles.index("query")


@dataclass
class ServerOutput:
    embedding: np.ndarray
    row_roles: list
    row_ids: list
    row_labels: np.ndarray
    objective_trace: list = field(default_factory=list)


@dataclass
class RetrievalResult:
    per_query: list
    recall_at_k: float = float("nan")
    epsilon_used: float = float("nan")
    served: list = field(default_factory=list)
    calibrations: list = field(default_factory=list)


def _child_seeds(seed, count):
    return spawn(seed, count)


def build_dummy_targets(public, target_label, seed=None, classes=None):
    """One uniformly chosen public row for every class other than ``target_label``.

    ``classes`` defaults to ``0 .. max(label)`` over the public labels and the
    target, so a class with no public exemplar is reported rather than
    silently skipped.
    """
    target_label = int(target_label)
    if classes is None:
        top = max(int(public.labels.max()), target_label)
        classes = range(top + 1)
    rng = np.random.default_rng(seed)
    picks = []
    for c in sorted(int(c) for c in classes):
        if c == target_label:
            continue
        members = np.flatnonzero(public.labels == c)
        if members.size == 0:
            raise MissingClass(c)
        picks.append(int(rng.choice(members)))
    dummies = public.subset(picks, role="dummy")
    dummies.ids = np.asarray([f"dummy:{i}" for i in dummies.ids], dtype=object)
    return dummies


def _concat(parts):
    widths = {ds.features.shape[1] for ds in parts}
    if len(widths) > 1:
        detail = ", ".join(f"{ds.role}={ds.features.shape[1]}" for ds in parts)
        raise DimensionMismatch(f"feature dimensions differ: {detail}")
    ids, feats, labels, roles = [], [], [], []
    for ds in parts:
        ids.extend(ds.ids)
        feats.append(ds.features)
        labels.append(ds.labels)
        roles.extend([ds.role] * len(ds))
    return list(ids), np.vstack(feats), np.concatenate(labels), roles


def _post_process(released, labels, smlq_config, iterations):
    """SMLQ steps driven by a feature graph rebuilt from the release."""
    l_x = gaussian_kernel_laplacian(released, smlq_config.kernel_bandwidth)
    l_y = label_laplacian(labels, smlq_config.kernel_bandwidth)
    return iterate_to_convergence(released, l_x, l_y, smlq_config.alpha, iterations).matrix


def client_pipeline(query, public, config, private=True, store_factory=RawFeatureStore):
    """Client half of private retrieval for a single query row.

    With ``private=False`` the client runs ``1 + post_iterations`` ordinary
    SMLQ steps on its raw features instead (the non-private reference).
    """
    if len(query) != 1:
        raise ValidationError(f"query must hold exactly one row, got {len(query)}")
    query = query.with_role("query")
    public = public.with_role("public")
    dummy_ss, shuffle_ss, mail_ss = _child_seeds(config.seed, 3)

    dummies = build_dummy_targets(public, query.labels[0], dummy_ss)
    ids, feats, labels, roles = _concat([query, dummies, public])
    order = np.random.default_rng(shuffle_ss).permutation(len(ids))
    ids = [ids[i] for i in order]
    roles = [roles[i] for i in order]
    labels = labels[order]
    store = store_factory(normalize_rows(feats[order]))

    if not private:
        emb = run_smlq(
            store.read(),
            labels,
            _fixed_iterations(config.smlq, 1 + config.post_iterations),
            random_state=np.random.default_rng(mail_ss),
        ).matrix
        return ClientOutput(emb, roles, ids, labels, store=store)

    release = private_mail(store.read(), labels, config.smlq, config.budget, seed=mail_ss)
    store.seal()
    emb = release.embedding
    if config.post_iterations:
        emb = _post_process(emb, labels, config.smlq, config.post_iterations)
    return ClientOutput(
        emb, roles, ids, labels, bound=release.bound, calib=release.calib, store=store
    )


def _fixed_iterations(smlq_config, iterations):
    return SmlqConfig(
        alpha=smlq_config.alpha,
        kernel_bandwidth=smlq_config.kernel_bandwidth,
        embed_dim=smlq_config.embed_dim,
        init_stddev=smlq_config.init_stddev,
        max_iterations=iterations,
        rel_tolerance=0.0,
    )


def server_pipeline(server_db, public, config):
    """Non-private embedding of the server database concatenated with public rows."""
    if len(server_db) == 0:
        raise ValidationError("server database is empty")
    server_db = server_db.with_role("server")
    public = public.with_role("public")
    ids, feats, labels, roles = _concat([server_db, public])
    (init_ss,) = _child_seeds(config.seed, 1)
    result = run_smlq(
        normalize_rows(feats),
        labels,
        _fixed_iterations(config.smlq, 1 + config.post_iterations),
        random_state=np.random.default_rng(init_ss),
    )
    return ServerOutput(result.matrix, roles, ids, labels, result.objective_trace)


def rank_candidates(point, candidates, candidate_ids, top_k):
    """Nearest ``top_k`` candidates by Euclidean distance, ties broken by id."""
    dist = cdist(point[None, :], candidates)[0]
    order = sorted(range(len(dist)), key=lambda i: (dist[i], candidate_ids[i]))
    return [(candidate_ids[i], float(dist[i])) for i in order[:top_k]]


def retrieve(client_out, server_out, top_k):
    """Align the client embedding onto the server frame and answer k-NN requests.

    ``served`` holds one list per query/dummy row (what the server returns);
    ``per_query`` keeps only the true query's list after client-side parsing.
    """
    top_k = check_count(top_k, "top_k")
    if client_out.private_embedding.shape[1] != server_out.embedding.shape[1]:
        raise DimensionMismatch("client and server embeddings differ in dimension")
    server_public = {
        rid: i for i, (rid, role) in enumerate(zip(server_out.row_ids, server_out.row_roles))
        if role == "public"
    }
    client_idx, server_idx = [], []
    for i, (rid, role) in enumerate(zip(client_out.row_ids, client_out.row_roles)):
        if role == "public":
            if rid not in server_public:
                raise ValidationError(f"public anchor {rid!r} missing on the server")
            client_idx.append(i)
            server_idx.append(server_public[rid])
    transform = estimate_transform(
        client_out.private_embedding[client_idx], server_out.embedding[server_idx]
    )
    aligned = apply_transform(transform, client_out.private_embedding)

    cand = [i for i, role in enumerate(server_out.row_roles) if role == "server"]
    cand_points = server_out.embedding[cand]
    cand_ids = [server_out.row_ids[i] for i in cand]

    served, per_query = [], []
    for i, role in enumerate(client_out.row_roles):
        if role not in ("query", "dummy"):
            continue
        entry = (client_out.row_ids[i], rank_candidates(aligned[i], cand_points, cand_ids, top_k))
        served.append(entry)
        if role == "query":
            per_query.append(entry)
    return RetrievalResult(per_query=per_query, served=served)


def recall_at_k(results, server_labels, query_labels, k=None):
    """Fraction of queries with at least one same-class item in their top ``k``.

    ``results`` is a list of ``(query_id, [(server_id, distance), ...])``;
    ``server_labels`` and ``query_labels`` map ids to classes.
    """
    if not results:
        return float("nan")
    hits = 0
    for qid, ranked in results:
        if not ranked:
            raise ValidationError(f"empty result list for query {qid!r}")
        top = ranked if k is None else ranked[:k]
        target = query_labels[qid]
        hits += any(server_labels[sid] == target for sid, _ in top)
    return hits / len(results)


def run_queries(queries, public, server_db, config, private=True, server_out=None):
    """Retrieve for every row of ``queries``; returns ``(RetrievalResult, ServerOutput)``."""
    if server_out is None:
        server_out = server_pipeline(server_db, public, config)
    per_query, calibrations = [], []
    seeds = _child_seeds(config.seed, len(queries))
    for i in range(len(queries)):
        cfg = _with_seed(config, seeds[i])
        client = client_pipeline(queries.subset([i]), public, cfg, private=private)
        per_query.extend(retrieve(client, server_out, config.top_k).per_query)
        if private:
            calibrations.append((client.bound.delta, client.calib.noise_stddev))
    server_labels = dict(zip(server_db.ids, server_db.labels))
    query_labels = dict(zip(queries.ids, queries.labels))
    recall = recall_at_k(per_query, server_labels, query_labels, config.top_k)
    eps = config.budget.epsilon if private else float("inf")
    result = RetrievalResult(
        per_query=per_query, recall_at_k=recall, epsilon_used=eps, calibrations=calibrations
    )
    return result, server_out


def _with_seed(config, seed):
    if isinstance(seed, np.random.SeedSequence):
        seed = seed_int(seed)
    return RetrievalConfig(config.smlq, config.budget, config.top_k, config.post_iterations, seed)


def _with_epsilon(config, epsilon):
    budget = PrivacyBudget(float(epsilon), config.budget.delta_dp)
    return RetrievalConfig(config.smlq, budget, config.top_k, config.post_iterations, config.seed)


@dataclass
class SweepRow:
    epsilon: float
    mean_recall: float
    std_recall: float
    trials: int
    delta_sensitivity: float
    noise_stddev: float


def privacy_utility_sweep(
    queries, public, server_db, epsilons, trials, config, n_jobs=None, private=True
):
    """Mean and std of Recall@k over ``trials`` noise draws for each epsilon.

    Trial ``t`` uses the same derived seed for every epsilon, so noise draws
    are common across the sweep and only their scale changes. The server
    embedding does not depend on epsilon and is computed once.

    ``private=False`` runs the noise-free client over the same trial seeds;
    its rows report NaN sensitivity and noise.
    """
    trials = check_count(trials, "trials")
    epsilons = [float(e) for e in epsilons]
    if not epsilons:
        raise ValidationError("epsilon list is empty")
    server_out = server_pipeline(server_db, public, config)
    trial_seeds = [_with_seed(config, ss).seed for ss in _child_seeds(config.seed, trials)]

    tasks = [(e, s) for e in epsilons for s in trial_seeds]
    runner = Parallel(n_jobs=n_jobs) if n_jobs not in (None, 1) else None
    job = delayed(_sweep_task) if runner else _sweep_task
    args = [
        (queries, public, server_db, _with_seed(_with_epsilon(config, e), s), server_out, private)
        for e, s in tasks
    ]
    outputs = runner(job(*a) for a in args) if runner else [job(*a) for a in args]

    rows = []
    for j, eps in enumerate(epsilons):
        chunk = outputs[j * trials:(j + 1) * trials]
        recalls = np.array([r for r, _, _ in chunk])
        rows.append(SweepRow(
            epsilon=eps,
            mean_recall=float(recalls.mean()),
            std_recall=float(recalls.std()),
            trials=trials,
            delta_sensitivity=float(np.mean([d for _, d, _ in chunk])),
            noise_stddev=float(np.mean([s for _, _, s in chunk])),
        ))
    return rows


def _sweep_task(queries, public, server_db, config, server_out, private=True):
    result, _ = run_queries(
        queries, public, server_db, config, private=private, server_out=server_out
    )
    if not private:
        return result.recall_at_k, float("nan"), float("nan")
    deltas, stddevs = zip(*result.calibrations)
    return result.recall_at_k, float(np.mean(deltas)), float(np.mean(stddevs))


class PrivateRetriever(BaseEstimator):
    """Estimator facade over the private retrieval protocol.

    ``fit`` embeds the server database together with the public anchors;
    ``kneighbors`` runs the client side for each query row and returns the
    aligned top-k server rows; ``score`` is Recall@k.

    Defaults: ``n_components=2``, ``init_stddev=1e-8``,
    ``post_iterations=5``, ``epsilon=0.1``, ``delta=1e-5``. Set ``private=False`` for the noise-free reference
    pipeline.
    """

    def __init__(
        self,
        n_neighbors=DEFAULT_TOP_K,
        n_components=DEFAULT_EMBED_DIM,
        alpha=DEFAULT_ALPHA,
        kernel_bandwidth=DEFAULT_KERNEL_BANDWIDTH,
        init_stddev=DEFAULT_INIT_STDDEV,
        post_iterations=DEFAULT_POST_ITERATIONS,
        epsilon=DEFAULT_EPSILON,
        delta=DEFAULT_DELTA,
        private=True,
        random_state=0,
    ):
        self.n_neighbors = n_neighbors
        self.n_components = n_components
        self.alpha = alpha
        self.kernel_bandwidth = kernel_bandwidth
        self.init_stddev = init_stddev
        self.post_iterations = post_iterations
        self.epsilon = epsilon
        self.delta = delta
        self.private = private
        self.random_state = random_state

    def _config(self):
        return RetrievalConfig(
            smlq=SmlqConfig(
                alpha=self.alpha,
                kernel_bandwidth=self.kernel_bandwidth,
                embed_dim=self.n_components,
                init_stddev=self.init_stddev,
            ),
            budget=PrivacyBudget(self.epsilon, self.delta),
            top_k=self.n_neighbors,
            post_iterations=self.post_iterations,
            seed=self.random_state if self.random_state is not None else 0,
        )

    @staticmethod
    def _as_dataset(X, y, ids, role, prefix):
        X = check_matrix(X, name="X")
        if ids is None:
            ids = [f"{prefix}{i}" for i in range(X.shape[0])]
        return FeatureDataset(ids, X, y, role=role)

    def fit(self, X, y, X_public, y_public, ids=None, public_ids=None):
        self.server_ = self._as_dataset(X, y, ids, "server", "s")
        self.public_ = self._as_dataset(X_public, y_public, public_ids, "public", "p")
        self.server_out_ = server_pipeline(self.server_, self.public_, self._config())
        self.n_features_in_ = self.server_.features.shape[1]
        return self

    def _run(self, X, y, ids=None):
        check_is_fitted(self, "server_out_")
        queries = self._as_dataset(X, y, ids, "query", "q")
        result, _ = run_queries(
            queries, self.public_, self.server_, self._config(),
            private=self.private, server_out=self.server_out_,
        )
        return queries, result

    def kneighbors(self, X, y, ids=None):
        """Distances and server-row indices of each query's neighbours.

        ``y`` is required: the client needs its own class to pick dummies.
        """
        _, result = self._run(X, y, ids)
        index = {rid: i for i, rid in enumerate(self.server_.ids)}
        dist = np.array([[d for _, d in ranked] for _, ranked in result.per_query])
        ind = np.array([[index[s] for s, _ in ranked] for _, ranked in result.per_query])
        return dist, ind

    def score(self, X, y, ids=None):
        _, result = self._run(X, y, ids)
        return result.recall_at_k
