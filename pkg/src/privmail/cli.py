"""Command-line interface: ``privmail <command> [options]``."""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .exceptions import ConfigError, PrivMailError
from .experiment import build_config, read_config_file, run_experiment
from .io import (
    atomic_write_text,
    format_matrix_table,
    format_metadata,
    load_features,
    save_embedding,
    save_features,
)
from .linalg import normalize_rows
from .mechanism import PrivacyBudget, private_mail
from .retrieval import run_queries
from .sensitivity import SensitivityParams, compute_delta, verify_bound_empirically
from .smlq import run_smlq
from .synthetic import generate_synthetic, split_roles

log = logging.getLogger("privmail")

SEED_ENV = "PRIVMAIL_SEED"


def _common(p, *, privacy=True, retrieval=False):
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--output", "-o", help="output path")
    p.add_argument("--seed", type=int, help=f"random seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("--alpha", type=float, help="label-Laplacian weight")
    p.add_argument("--sigma", type=float, help="Gaussian kernel bandwidth")
    p.add_argument("--sigma-q", dest="sigma_q", type=float, help="stddev of the random start")
    p.add_argument("--embed-dim", dest="embed_dim", type=int, help="embedding dimension")
    p.add_argument("--iterations", type=int, help="maximum SMLQ iterations")
    if privacy:
        p.add_argument("--epsilon", help="privacy epsilon (comma list for sweep)")
        p.add_argument("--delta", type=float, help="privacy delta")
    if retrieval:
        p.add_argument("--post-iterations", dest="post_iterations", type=int,
                       help="post-processing iterations after the private release")
        p.add_argument("--top-k", dest="top_k", type=int, help="neighbours to retrieve")
        p.add_argument("--trials", type=int, help="noise draws per epsilon")


def build_parser():
    parser = argparse.ArgumentParser(prog="privmail", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="non-private SMLQ embedding of a feature file")
    p.add_argument("input")
    _common(p, privacy=False)

    p = sub.add_parser("privatize", help="one private release of a feature file")
    p.add_argument("input")
    _common(p)

    p = sub.add_parser("retrieve", help="private retrieval for every query row")
    p.add_argument("--query")
    p.add_argument("--public")
    p.add_argument("--server")
    p.add_argument("--non-private", action="store_true", help="skip noise (reference run)")
    _common(p, retrieval=True)

    p = sub.add_parser("sweep", help="privacy-utility table over epsilons")
    p.add_argument("--query")
    p.add_argument("--public")
    p.add_argument("--server")
    p.add_argument("--jobs", type=int, default=None, help="parallel workers")
    _common(p, retrieval=True)

    p = sub.add_parser("synth", help="write synthetic clustered features")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--spread", type=float, default=0.05)
    p.add_argument("--split", nargs=2, type=int, metavar=("PUBLIC", "QUERY"),
                   help="also write <stem>_{query,public,server}.csv with PUBLIC and "
                        "QUERY rows per class")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", "-o", default="synthetic.csv")

    p = sub.add_parser("verify-bound", help="brute-force check of the sensitivity bound")
    p.add_argument("--n", type=int, default=4, help="rows in the smaller dataset")
    p.add_argument("--classes-minus-one", "-c", dest="c", type=int, default=1)
    p.add_argument("--q-frobenius", type=float, default=1.0)
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=None)
    return parser


def resolve_seed(flag):
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None


_CONFIG_KEYS = ("query", "public", "server", "output", "alpha", "sigma", "sigma_q", "embed_dim",
                "iterations", "post_iterations", "top_k", "delta", "epsilon", "trials")


def experiment_config(args):
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    if getattr(args, "seed", None) is not None or "seed" not in file_values:
        overrides["seed"] = resolve_seed(getattr(args, "seed", None))
    return build_config(file_values, overrides)


def cmd_embed(args):
    cfg = experiment_config(args)
    ds = load_features(args.input)
    smlq = cfg.smlq_config()
    result = run_smlq(normalize_rows(ds.features), ds.labels, smlq, random_state=cfg.seed)
    meta = {"iterations_run": result.iterations_run, "objective": repr(result.objective_trace[-1])}
    _emit_embedding(args.output, ds, result.matrix, meta)
    return 0


def cmd_privatize(args):
    cfg = experiment_config(args)
    ds = load_features(args.input)
    release = private_mail(
        normalize_rows(ds.features), ds.labels, cfg.smlq_config(),
        PrivacyBudget(cfg.epsilons[0], cfg.delta), seed=cfg.seed,
    )
    meta = {
        "epsilon": cfg.epsilons[0], "delta": cfg.delta,
        "m_ii": repr(release.bound.m_ii), "m_ij": repr(release.bound.m_ij),
        "m": repr(release.bound.m_composite),
        "sensitivity": repr(release.calib.sensitivity),
        "noise_stddev": repr(release.calib.noise_stddev),
    }
    _emit_embedding(args.output, ds, release.embedding, meta)
    print(f"sensitivity {release.calib.sensitivity!r}", file=sys.stderr)
    print(f"noise_stddev {release.calib.noise_stddev!r}", file=sys.stderr)
    return 0


def _emit_embedding(output, ds, matrix, meta):
    if output:
        save_embedding(output, ds.ids, ds.labels, matrix, meta)
    else:
        sys.stdout.write(format_metadata(meta) + format_matrix_table(ds.ids, ds.labels, matrix, "e"))


def cmd_retrieve(args):
    cfg = experiment_config(args)
    cfg.validate()
    queries = load_features(cfg.query, role="query")
    public = load_features(cfg.public, role="public")
    server = load_features(cfg.server, role="server")
    result, _ = run_queries(queries, public, server, cfg.retrieval_config(), private=not args.non_private)
    payload = {
        "epsilon": None if args.non_private else cfg.epsilons[0],
        "top_k": cfg.top_k,
        "recall_at_k": result.recall_at_k,
        "queries": [
            {"id": qid, "matches": [{"id": sid, "distance": d} for sid, d in ranked]}
            for qid, ranked in result.per_query
        ],
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.output:
        atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_sweep(args):
    cfg = experiment_config(args)
    status = run_experiment(cfg, n_jobs=args.jobs)
    print(Path(cfg.output).read_text(), end="")
    return status


def cmd_synth(args):
    seed = resolve_seed(args.seed)
    ds = generate_synthetic(args.classes, args.per_class, args.dim, args.spread, seed)
    out = Path(args.output)
    save_features(ds, out)
    if args.split:
        n_public, n_query = args.split
        parts = split_roles(ds, n_public, n_query, seed=seed + 1)
        for name, part in zip(("query", "public", "server"), parts):
            save_features(part, out.with_name(f"{out.stem}_{name}{out.suffix}"))
    return 0


def cmd_verify_bound(args):
    params = SensitivityParams(
        n=args.n, alpha=args.alpha, kernel_bandwidth=args.sigma,
        num_classes_minus_one=args.c, q_frobenius=args.q_frobenius,
    )
    bound = compute_delta(params)
    report = verify_bound_empirically(
        params, args.trials, resolve_seed(args.seed), embed_dim=args.embed_dim, n_jobs=args.jobs
    )
    report.update(m_ii=bound.m_ii, m_ij=bound.m_ij, m=bound.m_composite)
    print(json.dumps(report, indent=2))
    return 0 if report["satisfied"] else 8


COMMANDS = {
    "embed": cmd_embed,
    "privatize": cmd_privatize,
    "retrieve": cmd_retrieve,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "verify-bound": cmd_verify_bound,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except PrivMailError as exc:
        print(f"privmail: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
