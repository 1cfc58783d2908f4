"""Command-line entry point: ``dpexplain {cluster,explain,experiment,oracle}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .core import ClusteringParams, brute_force_opt, exact_partition_opt
from .errors import ClusteringError, ParseError
from .harness import ExperimentConfig, _to_json, emit, ingest_csv, run_experiment, synthetic_dataset
from .pipeline import PipelineConfig, private_clustering, private_explanations

log = logging.getLogger("dpexplain")

LOG_ENV = "DPEXPLAIN_LOG_LEVEL"
BANNER = "*** NON-PRIVATE TEST MODE: noise disabled, outputs are NOT differentially private ***"


def _grid(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad epsilon grid {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="CSV with a header row; omit for synthetic data")
    common.add_argument("--id-column", help="CSV column holding row ids")
    common.add_argument("--n", type=int, default=100, help="synthetic dataset size")
    common.add_argument("--d", type=int, default=2, help="synthetic dataset dimension")
    common.add_argument("--k", type=int, required=True)
    common.add_argument("--p", type=int, choices=(1, 2), default=1)
    common.add_argument("--epsilon", type=float, default=1.0)
    common.add_argument("--beta", type=float, default=0.1)
    common.add_argument("--alpha", type=float, default=1.0)
    common.add_argument("--gamma", type=float, default=0.5)
    common.add_argument("--dprime", type=int, default=None, help="projected dimension (default: d)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--no-noise", action="store_true", help="disable all noise (test mode)")
    common.add_argument("--workers", type=int, default=1)

    ap = argparse.ArgumentParser(prog="dpexplain", description="Private clustering with contrastive explanations.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("cluster", parents=[common], help="private centers and cost")
    ex = sub.add_parser("explain", parents=[common], help="private centers plus per-agent explanations")
    ex.add_argument("--agents", type=lambda s: [int(t) for t in s.split(",")],
                    help="comma-separated 0-based agent indices")
    ex.add_argument("--sample", type=int, default=None, help="sample this many agents instead")
    er = sub.add_parser("experiment", parents=[common], help="epsilon sweep with PO/RO/PC/RC metrics")
    er.add_argument("--eps-grid", type=_grid, default=(0.5, 1.0, 2.0, 4.0))
    er.add_argument("--reps", type=int, default=25)
    er.add_argument("--sample", type=int, default=100)
    orc = sub.add_parser("oracle", parents=[common], help="exact optimum for small inputs")
    orc.add_argument("--fixed", type=int, default=None, help="index of the point to fix as a center")
    return ap


def _dataset(args):
    if args.input:
        return ingest_csv(args.input, args.id_column)[0]
    return synthetic_dataset(args.n, args.d, np.random.default_rng(args.seed))


def _pipeline_cfg(args) -> PipelineConfig:
    return PipelineConfig(
        k=args.k, p=args.p, epsilon=args.epsilon, beta=args.beta, alpha=args.alpha,
        d_prime=args.dprime, gamma=args.gamma, seed=args.seed, noise_disabled=args.no_noise,
    )


def _write(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def cmd_cluster(args) -> int:
    X = _dataset(args)
    res = private_clustering(X, _pipeline_cfg(args))
    _write(_to_json({"centers": res.centers.tolist(), "cost": res.cost_S_eps,
                     "coreset_size": len(res.coreset), "ledger": res.ledger}), args.out)
    return 0


def cmd_explain(args) -> int:
    X = _dataset(args)
    cfg = _pipeline_cfg(args)
    res = private_clustering(X, cfg)
    if args.agents is not None:
        agents = args.agents
    elif args.sample is not None:
        agents = sorted(np.random.default_rng(args.seed).choice(X.n, args.sample, replace=False).tolist())
    else:
        agents = list(range(X.n))
    bad = [i for i in agents if not 0 <= i < X.n]
    if bad:
        raise ValueError(f"agent indices out of range: {bad}")
    recs = private_explanations(res.coreset, res.cost_S_eps, [(i, res.X_low.points[i]) for i in agents],
                                cfg, X.n, workers=args.workers)
    doc = {
        "cost": res.cost_S_eps,
        "ledger": res.ledger,
        "explanations": [
            {"agent": r.agent_index, "cost_fixed": r.cost_S_i_eps, "explanation": r.explanation, "error": r.error}
            for r in recs
        ],
    }
    _write(_to_json(doc), args.out)
    return 2 if any(r.error for r in recs) else 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig(
        k=args.k, p=args.p, eps_grid=args.eps_grid, reps=args.reps, sample_size=args.sample,
        seed=args.seed, beta=args.beta, alpha=args.alpha, gamma=args.gamma, d_prime=args.dprime,
        input_path=args.input, n_synthetic=args.n, d_synthetic=args.d, workers=args.workers,
    )
    res = run_experiment(cfg)
    out = args.out or "/dev/stdout"
    emit(res.rows, args.format, out, res.metadata)
    return 2 if res.has_errors else 0


def cmd_oracle(args) -> int:
    X = _dataset(args)
    fixed = None if args.fixed is None else X.points[args.fixed]
    try:
        opt = brute_force_opt(X.points, X.points, ClusteringParams(args.k, args.p), fixed=fixed)
        kind = "locations"
    except ClusteringError:
        if args.p != 2:
            raise
        opt = exact_partition_opt(X.points, args.k, 2, fixed=fixed)
        kind = "continuous"
    _write(_to_json({"cost": opt.cost, "centers": opt.centers.tolist(), "candidates": kind}), args.out)
    return 0


COMMANDS = {"cluster": cmd_cluster, "explain": cmd_explain, "experiment": cmd_experiment, "oracle": cmd_oracle}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.no_noise:
        print(BANNER, file=sys.stderr)
    if args.command == "experiment" and args.no_noise:
        log.warning("--no-noise has no effect on experiments")
    try:
        return COMMANDS[args.command](args)
    except (ClusteringError, ParseError, ValueError, OSError) as exc:
        print(f"dpexplain: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
