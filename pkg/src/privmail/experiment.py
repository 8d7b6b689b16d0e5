"""Experiment configuration and the privacy-utility sweep runner."""

import dataclasses
import datetime
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .exceptions import ConfigError
from .io import load_features, write_results
from .mechanism import DEFAULT_DELTA, PrivacyBudget
from .retrieval import DEFAULT_TOP_K, RetrievalConfig, privacy_utility_sweep
from .smlq import (
    DEFAULT_ALPHA,
    DEFAULT_EMBED_DIM,
    DEFAULT_INIT_STDDEV,
    DEFAULT_KERNEL_BANDWIDTH,
    DEFAULT_POST_ITERATIONS,
    SmlqConfig,
)

log = logging.getLogger(__name__)

DEFAULT_EPSILONS = (0.01, 0.1, 1.0, 10.0)


@dataclass
class ExperimentConfig:
    query: str = None
    public: str = None
    server: str = None
    output: str = "results.csv"
    alpha: float = DEFAULT_ALPHA
    sigma: float = DEFAULT_KERNEL_BANDWIDTH
    sigma_q: float = DEFAULT_INIT_STDDEV
    embed_dim: int = DEFAULT_EMBED_DIM
    iterations: int = 100
    post_iterations: int = DEFAULT_POST_ITERATIONS
    top_k: int = DEFAULT_TOP_K
    delta: float = DEFAULT_DELTA
    epsilons: tuple = field(default=DEFAULT_EPSILONS)
    trials: int = 1
    seed: int = 0

    def validate(self):
        for name in ("query", "public", "server"):
            value = getattr(self, name)
            if not value:
                raise ConfigError(f"missing required path '{name}'")
            if not Path(value).is_file():
                raise ConfigError(f"{name} file not found: {value}")
        if not self.epsilons or any(e <= 0 for e in self.epsilons):
            raise ConfigError("epsilon list must be non-empty and positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        self.retrieval_config()
        return self

    def smlq_config(self):
        return SmlqConfig(
            alpha=self.alpha,
            kernel_bandwidth=self.sigma,
            embed_dim=self.embed_dim,
            init_stddev=self.sigma_q,
            max_iterations=self.iterations,
        )

    def retrieval_config(self, epsilon=None):
        epsilon = self.epsilons[0] if epsilon is None else epsilon
        return RetrievalConfig(
            smlq=self.smlq_config(),
            budget=PrivacyBudget(float(epsilon), self.delta),
            top_k=self.top_k,
            post_iterations=self.post_iterations,
            seed=self.seed,
        )

    def metadata(self):
        meta = {"artifact": f"privmail {__version__}"}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "epsilons":
                value = ",".join(repr(float(e)) for e in value)
            meta[f.name] = value
        return meta


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
_ALIASES = {"epsilon": "epsilons", "sigma-q": "sigma_q", "embed-dim": "embed_dim",
            "post-iterations": "post_iterations", "top-k": "top_k"}


def parse_epsilons(value):
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    try:
        return tuple(float(tok) for tok in str(value).split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"bad epsilon list {value!r}") from None


def coerce(key, value):
    key = _ALIASES.get(key, key)
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _FIELD_TYPES[key]
    try:
        if key == "epsilons":
            return key, parse_epsilons(value)
        if kind is int:
            return key, int(value)
        if kind is float:
            return key, float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return key, str(value)


def read_config_file(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        k, v = coerce(key, value)
        values[k] = v
    base = Path(path).parent
    for name in ("query", "public", "server"):
        if name in values and not Path(values[name]).is_absolute():
            values[name] = str(base / values[name])
    return values


def build_config(file_values=None, overrides=None):
    """Defaults, then the config file, then explicit overrides."""
    merged = {}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            k, v = coerce(key, value)
            merged[k] = v
    return ExperimentConfig(**merged)


def run_sweep(config, n_jobs=None):
    config.validate()
    queries = load_features(config.query, role="query")
    public = load_features(config.public, role="public")
    server = load_features(config.server, role="server")
    log.info(
        "sweep: %d queries, %d public, %d server rows; eps=%s trials=%d",
        len(queries), len(public), len(server), config.epsilons, config.trials,
    )
    return privacy_utility_sweep(
        queries, public, server, config.epsilons, config.trials,
        config.retrieval_config(), n_jobs=n_jobs,
    )


def run_experiment(config, n_jobs=None, timestamp=True):
    """Run the sweep and write the results table; returns 0 on success."""
    rows = run_sweep(config, n_jobs=n_jobs)
    meta = config.metadata()
    if timestamp:
        meta["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    write_results(config.output, rows, meta)
    return 0
