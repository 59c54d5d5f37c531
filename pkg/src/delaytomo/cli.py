"""Command-line front end.

Subcommands: gen-matrix, encode, decode, recover, plan, sweep,
steiner-stats.  All randomness flows from --seed; when omitted a seed is
drawn from entropy and echoed on stderr so any run can be replayed.  Flag
values override config-file values, which override defaults.  Outputs are
written atomically (temp file + rename) and are byte-reproducible for a
fixed seed.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
import tempfile
from fractions import Fraction

import numpy as np

from . import harness, sensing, steiner, tomography, topology
from .peeling import decode as peel_decode
from .sensing import DelayVector, GroupedOutput

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _log(args, message):
    if not getattr(args, "quiet", False):
        print(message, file=sys.stderr)


def _atomic_write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _ensure_seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(32)
        _log(args, f"seed drawn from entropy: {args.seed}")
    return args.seed


def _dump_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _value_out(v):
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return v


def _value_in(v):
    if isinstance(v, str):
        return Fraction(v)
    return v


def _load_delays(path: str) -> DelayVector:
    with open(path) as fh:
        doc = json.load(fh)
    values = {int(j): _value_in(v) for j, v in doc["values"].items()}
    return DelayVector.from_sparse(doc["n"], values)


def _delays_doc(vec: DelayVector) -> dict:
    return {
        "n": len(vec),
        "values": {str(j): _value_out(v) for j, v in vec.to_sparse().items()},
    }


# -- subcommand handlers -----------------------------------------------------


def _cmd_gen_matrix(args) -> int:
    _ensure_seed(args)
    matrix = sensing.build_matrix(args.n, args.k, args.M, args.mu_factor, args.seed)
    _atomic_write(args.output, sensing.matrix_to_json(matrix))
    _log(args, f"matrix: n={matrix.n} mu={matrix.n_groups} R={matrix.group_height}")
    return 0


def _cmd_encode(args) -> int:
    with open(args.matrix) as fh:
        matrix = sensing.load_matrix(fh.read())
    delays = _load_delays(args.delays)
    out = sensing.encode(matrix, delays)
    doc = {
        "mu": out.n_groups,
        "R": out.group_height,
        "groups": [[_value_out(v) for v in g] for g in out.groups],
    }
    _atomic_write(args.output, _dump_json(doc))
    return 0


def _cmd_decode(args) -> int:
    with open(args.matrix) as fh:
        matrix = sensing.load_matrix(fh.read())
    with open(args.measurements) as fh:
        doc = json.load(fh)
    groups = tuple(tuple(_value_in(v) for v in g) for g in doc["groups"])
    result = peel_decode(
        matrix, GroupedOutput(groups), mode=args.mode, tolerance=args.tolerance
    )
    out = {
        "status": result.status,
        "estimate": _delays_doc(result.estimate),
        "iterations": result.iterations,
        "leaf_picks": result.leaf_picks,
        "false_leaf_rejections": result.false_leaf_rejections,
    }
    _atomic_write(args.output, _dump_json(out))
    return 0


def _build_instance(args):
    """Shared setup for recover/plan: network, matrix, truth."""
    _ensure_seed(args)
    topo_rng = np.random.default_rng(harness.derive_seed(args.seed, "topology"))
    net = topology.generate_topology(args.topology, topo_rng)
    n = net.n_links if args.mode == "links" else net.n_nodes
    k_eff = max(1, int(np.ceil(args.rho * args.k)))
    matrix = sensing.build_matrix(
        n, min(k_eff, n), args.M, args.mu_factor,
        seed=harness.derive_seed(args.seed, "matrix"),
    )
    if getattr(args, "truth", None):
        truth = _load_delays(args.truth)
        if len(truth) != n:
            raise ValueError(f"truth has {len(truth)} entries but the instance needs {n}")
    else:
        truth_rng = np.random.default_rng(harness.derive_seed(args.seed, "truth"))
        truth = harness.sample_truth(
            n, min(args.k, n), truth_rng, args.sampler,
            isolation=args.isolation, net=net,
        )
    return net, matrix, truth


def _cmd_recover(args) -> int:
    net, matrix, truth = _build_instance(args)
    result = tomography.recover(
        net,
        matrix,
        truth,
        mode=args.mode,
        path_builder=args.path_builder,
        loop_policy=args.loop_policy,
        tolerance=args.tolerance,
    )
    doc = {
        "status": result.status,
        "estimate": _delays_doc(result.estimate),
        "iterations": result.decode.iterations,
        "probes": result.metrics.probes,
        "max_path_links": result.metrics.max_path_links,
        "max_path_hops": result.metrics.max_path_hops,
    }
    _atomic_write(args.output, _dump_json(doc))
    _log(args, f"recover: status={result.status} probes={result.metrics.probes}")
    return 0


def _cmd_plan(args) -> int:
    net, matrix, truth = _build_instance(args)
    plan, _ = tomography.build_plan(
        net, matrix, args.mode, args.path_builder, args.loop_policy,
        truth if args.mode == "nodes" else None,
    )
    lines = [
        json.dumps(rec, sort_keys=True)
        for rec in tomography.plan_records(plan, net)
    ]
    _atomic_write(args.output, "\n".join(lines) + "\n")
    _log(args, f"plan: {len(lines)} probe records")
    return 0


def _cmd_sweep(args) -> int:
    overrides = {
        name: getattr(args, name)
        for name in (
            "topology", "k", "trials", "seed", "mode", "path_builder",
            "rho", "mu_factor", "sampler",
        )
        if getattr(args, name, None) is not None
    }
    if getattr(args, "M", None) is not None:
        overrides["weight_cap"] = args.M
    base = dict(_load_config(args.config)) if args.config else {}
    base.update(overrides)
    base.setdefault("seed", secrets.randbits(32))
    try:
        config = harness.TrialConfig(**base)
    except TypeError as exc:
        raise ValueError(f"bad sweep config: {exc}") from exc
    _log(args, f"sweep: seed={config.seed} trials={config.trials}")
    report = harness.run_experiment(config, jobs=args.jobs)
    os.makedirs(args.output, exist_ok=True)
    _atomic_write(os.path.join(args.output, "trials.csv"), report.to_csv())
    _atomic_write(os.path.join(args.output, "summary.json"), report.summary_json())
    agg = report.aggregates()
    _log(
        args,
        f"sweep done in {report.wall_seconds:.1f}s: "
        f"success {agg['successes']}/{agg['trials']}",
    )
    return 0


def _cmd_steiner_stats(args) -> int:
    _ensure_seed(args)
    topo_rng = np.random.default_rng(harness.derive_seed(args.seed, "topology"))
    net = topology.generate_topology(args.topology, topo_rng)
    stats = steiner.steiner_length_stats(net, args.s, args.trials, args.seed)
    doc = {
        "topology": args.topology,
        "s": args.s,
        "trials": args.trials,
        "worst": stats["worst"],
        "mean": stats["mean"],
    }
    _atomic_write(args.output, _dump_json(doc))
    return 0


def _load_config(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib as toml
        except ModuleNotFoundError:
            import tomli as toml
        with open(path, "rb") as fh:
            return toml.load(fh)
    with open(path) as fh:
        return json.load(fh)


# -- argument wiring ---------------------------------------------------------


def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="master RNG seed")
    p.add_argument("-o", "--output", default=None, help="output path (default stdout)")
    p.add_argument("--quiet", action="store_true", help="suppress stderr chatter")


def _add_instance_flags(p):
    p.add_argument("--topology", required=True, help="e.g. line:100, er:200:0.05, file:edges.txt")
    p.add_argument("--k", type=int, required=True, help="sparsity budget")
    p.add_argument("--M", type=int, default=4, help="per-link traversal cap")
    p.add_argument("--mu-factor", dest="mu_factor", type=float, default=4.0)
    p.add_argument("--rho", type=float, default=1.0, help="path-length/measurement tradeoff")
    p.add_argument("--mode", choices=("links", "nodes"), default="links")
    p.add_argument("--path-builder", dest="path_builder", choices=("naive", "steiner"), default="naive")
    p.add_argument("--loop-policy", dest="loop_policy",
                   choices=("first_neighbor", "oracle_noncongested"), default="first_neighbor")
    p.add_argument("--sampler", default="int:1:100", help="truth sampler, e.g. int:1:100, float:0:1")
    p.add_argument("--isolation", action="store_true",
                   help="resample node-mode truths until all congested nodes are isolated")
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--truth", default=None, help="JSON delay vector instead of sampling")


def _make_parser() -> _Parser:
    parser = _Parser(prog="delaytomo", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-matrix", help="sample a measurement matrix and dump it as JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--M", type=int, default=4)
    p.add_argument("--mu-factor", dest="mu_factor", type=float, default=4.0)
    _add_common(p)
    p.set_defaults(handler=_cmd_gen_matrix)

    p = sub.add_parser("encode", help="apply a matrix to a delay vector")
    p.add_argument("--matrix", required=True)
    p.add_argument("--delays", required=True)
    _add_common(p)
    p.set_defaults(handler=_cmd_encode)

    p = sub.add_parser("decode", help="peel a measurement vector back to delays")
    p.add_argument("--matrix", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--mode", choices=("exact", "float"), default="exact")
    p.add_argument("--tolerance", type=float, default=1e-9)
    _add_common(p)
    p.set_defaults(handler=_cmd_decode)

    p = sub.add_parser("recover", help="end-to-end delay recovery on a topology")
    _add_instance_flags(p)
    _add_common(p)
    p.set_defaults(handler=_cmd_recover)

    p = sub.add_parser("plan", help="export the probe itineraries as JSON lines")
    _add_instance_flags(p)
    _add_common(p)
    p.set_defaults(handler=_cmd_plan)

    p = sub.add_parser("sweep", help="run a Monte-Carlo experiment from a config file")
    p.add_argument("--config", default=None, help="TOML or JSON TrialConfig")
    p.add_argument("--topology", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--mu-factor", dest="mu_factor", type=float, default=None)
    p.add_argument("--mode", choices=("links", "nodes"), default=None)
    p.add_argument("--path-builder", dest="path_builder", choices=("naive", "steiner"), default=None)
    p.add_argument("--sampler", default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--output", default="sweep-out", help="output directory")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("steiner-stats", help="worst/mean Steiner length over random terminal sets")
    p.add_argument("--topology", required=True)
    p.add_argument("--s", type=int, required=True, help="terminal set size")
    p.add_argument("--trials", type=int, default=100)
    _add_common(p)
    p.set_defaults(handler=_cmd_steiner_stats)

    return parser


def main(argv=None) -> int:
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.handler(args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
