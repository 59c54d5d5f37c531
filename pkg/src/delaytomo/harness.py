"""Monte-Carlo trial runner: topologies, ground truths, reports.

Every trial derives its own seeds by hashing (master seed, trial index,
purpose), so runs are reproducible, order-independent, and safe to
parallelize.  Per-trial failures are recorded as rows, never raised out of
the sweep.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .network import Network
from .sensing import DelayVector, build_matrix
from .tomography import recover
from .topology import generate_topology

__all__ = [
    "SamplingError",
    "TrialConfig",
    "TrialReport",
    "derive_seed",
    "load_partition",
    "partitioned_recover",
    "run_experiment",
    "sample_truth",
]

CSV_FIELDS = [
    "trial",
    "seed",
    "status",
    "success",
    "n",
    "k",
    "group_height",
    "n_groups",
    "probes",
    "iterations",
    "leaf_picks",
    "mean_row_support",
    "max_path_links",
    "mean_path_links",
    "max_path_hops",
    "mean_path_hops",
    "isolation_violations",
    "exact_match",
    "error",
]


class SamplingError(RuntimeError):
    """Raised when a ground truth satisfying the constraints cannot be drawn."""


def derive_seed(master: int, *scope) -> int:
    """Stable 63-bit per-trial seed from the master seed and a scope tag."""
    tag = ":".join(str(x) for x in (master, *scope))
    digest = hashlib.sha256(tag.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def sample_truth(
    n: int,
    k: int,
    rng: np.random.Generator,
    sampler: str = "int:1:100",
    isolation: bool = False,
    net: Network | None = None,
    max_tries: int = 1000,
) -> DelayVector:
    """k-sparse ground truth with a uniform random support.

    sampler "int:LO:HI" draws integer delays (exact mode);
    "float:LO:HI" draws uniform reals from (LO, HI].  With isolation=True
    (node mode) the support is resampled until every congested node has at
    least one non-congested neighbor.
    """
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    kind, lo, hi = _parse_sampler(sampler)
    if isolation and net is None:
        raise ValueError("isolation resampling needs the network")
    for _ in range(max_tries):
        support = sorted(int(j) for j in rng.choice(n, size=k, replace=False))
        if isolation and k > 0:
            congested = set(support)
            ok = all(
                any(u not in congested for u in net.neighbors(v)) for v in support
            )
            if not ok:
                continue
        entries = [0] * n if kind == "int" else [0.0] * n
        for j in support:
            if kind == "int":
                entries[j] = int(rng.integers(lo, hi + 1))
            else:
                entries[j] = float(hi - rng.random() * (hi - lo))
        return DelayVector(tuple(entries), sparsity=k)
    raise SamplingError(
        f"no isolation-respecting support of size {k} found in {max_tries} tries"
    )


def _parse_sampler(spec: str):
    parts = spec.split(":")
    if len(parts) != 3 or parts[0] not in ("int", "float"):
        raise ValueError(f"bad sampler spec {spec!r}; want int:LO:HI or float:LO:HI")
    kind = parts[0]
    lo = int(parts[1]) if kind == "int" else float(parts[1])
    hi = int(parts[2]) if kind == "int" else float(parts[2])
    if hi < lo or (kind == "int" and lo < 1) or (kind == "float" and lo < 0):
        raise ValueError(f"bad sampler range in {spec!r}")
    return kind, lo, hi


@dataclass(frozen=True)
class TrialConfig:
    """Everything that defines one experiment; the seed fixes all randomness."""

    topology: str
    k: int
    weight_cap: int = 4
    rho: float = 1.0
    mu_factor: float = 4.0
    mode: str = "links"
    path_builder: str = "naive"
    loop_policy: str = "first_neighbor"
    trials: int = 100
    seed: int = 0
    sampler: str = "int:1:100"
    isolation: bool = False
    tolerance: float = 1e-9
    partition_file: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.weight_cap < 2:
            raise ValueError("weight_cap must be >= 2")
        if self.rho < 1:
            raise ValueError("rho must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in ("links", "nodes"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class TrialReport:
    config: TrialConfig
    rows: list[dict] = field(default_factory=list)
    wall_seconds: float = 0.0  # stderr diagnostics only; never serialized

    def aggregates(self) -> dict:
        done = [r for r in self.rows if not r.get("error")]
        succ = [r for r in done if r["success"]]
        agg = {
            "trials": len(self.rows),
            "completed": len(done),
            "successes": len(succ),
            "success_rate": len(succ) / len(self.rows) if self.rows else 0.0,
            "exact_match_rate": (
                sum(1 for r in succ if r["exact_match"]) / len(succ) if succ else 0.0
            ),
        }
        for key in (
            "probes",
            "iterations",
            "mean_row_support",
            "max_path_links",
            "mean_path_links",
            "max_path_hops",
            "mean_path_hops",
            "isolation_violations",
        ):
            vals = [r[key] for r in done if r.get(key) is not None]
            agg[f"mean_{key}"] = sum(vals) / len(vals) if vals else None
            agg[f"max_{key}"] = max(vals) if vals else None
        return agg

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row)
        return buf.getvalue()

    def summary_json(self) -> str:
        doc = {"config": asdict(self.config), "aggregates": self.aggregates()}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def run_trial(config: TrialConfig, index: int) -> dict:
    """One independent trial; errors come back as a row, not an exception."""
    row = {"trial": index, "seed": derive_seed(config.seed, index), "error": ""}
    try:
        topo_rng = np.random.default_rng(derive_seed(config.seed, index, "topology"))
        net = generate_topology(config.topology, topo_rng)
        n = net.n_links if config.mode == "links" else net.n_nodes
        k_eff = max(1, math.ceil(config.rho * config.k))
        matrix = build_matrix(
            n,
            min(k_eff, n),
            config.weight_cap,
            config.mu_factor,
            seed=derive_seed(config.seed, index, "matrix"),
        )
        truth_rng = np.random.default_rng(derive_seed(config.seed, index, "truth"))
        truth = sample_truth(
            n,
            min(config.k, n),
            truth_rng,
            config.sampler,
            isolation=config.isolation,
            net=net,
        )
        if config.partition_file:
            partition = load_partition(config.partition_file)
            outcome = partitioned_recover(
                net,
                truth,
                partition,
                k=config.k,
                weight_cap=config.weight_cap,
                rho=config.rho,
                mu_factor=config.mu_factor,
                path_builder=config.path_builder,
                seed=derive_seed(config.seed, index, "parts"),
                tolerance=config.tolerance,
            )
            row.update(outcome)
            row["exact_match"] = outcome["success"] and row.pop("estimate") == truth.entries
            row.update({"n": n, "k": config.k})
            return row
        result = recover(
            net,
            matrix,
            truth,
            mode=config.mode,
            path_builder=config.path_builder,
            loop_policy=config.loop_policy,
            tolerance=config.tolerance,
        )
        m = result.metrics
        row.update(
            {
                "status": result.status,
                "success": result.status == "success",
                "n": n,
                "k": config.k,
                "group_height": matrix.group_height,
                "n_groups": matrix.n_groups,
                "probes": m.probes,
                "iterations": result.decode.iterations,
                "leaf_picks": result.decode.leaf_picks,
                "mean_row_support": m.mean_row_support,
                "max_path_links": m.max_path_links,
                "mean_path_links": m.mean_path_links,
                "max_path_hops": m.max_path_hops,
                "mean_path_hops": m.mean_path_hops,
                "isolation_violations": m.isolation_violations,
                "exact_match": result.status == "success"
                and result.estimate.entries == truth.entries,
            }
        )
    except Exception as exc:  # per-trial failure, keep sweeping
        row.update({"status": "error", "success": False, "error": str(exc)})
    return row


def run_experiment(config: TrialConfig, jobs: int = 1) -> TrialReport:
    """Run config.trials independent trials and aggregate one report."""
    started = time.perf_counter()
    report = TrialReport(config)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_trial_job, [(config, t) for t in range(config.trials)]))
    else:
        rows = [run_trial(config, t) for t in range(config.trials)]
    report.rows = sorted(rows, key=lambda r: r["trial"])
    report.wall_seconds = time.perf_counter() - started
    return report


def _trial_job(args):
    return run_trial(*args)


# -- network decomposition -------------------------------------------------


def load_partition(path: str) -> dict[str, list[int]]:
    """Partition file: JSON object mapping part id -> list of link ids."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or not doc:
        raise ValueError(f"{path}: partition must be a non-empty JSON object")
    return {str(k): [int(e) for e in v] for k, v in doc.items()}


def partitioned_recover(
    net: Network,
    truth: DelayVector,
    partition: dict[str, list[int]],
    *,
    k: int,
    weight_cap: int,
    rho: float = 1.0,
    mu_factor: float = 4.0,
    path_builder: str = "naive",
    seed: int = 0,
    tolerance: float = 1e-9,
) -> dict:
    """Independent link-delay recovery per partition part, merged back.

    Each part must be a connected edge set; it gets its own matrix sized
    for a proportional share of the sparsity budget.  The merged estimate
    carries per-part results under "parts".
    """
    all_ids = [e for part in partition.values() for e in part]
    if sorted(all_ids) != list(range(net.n_links)):
        raise ValueError("partition must cover every link id exactly once")

    merged = [0 if truth.is_exact else 0.0] * net.n_links
    parts_out = {}
    probes = iterations = 0
    spans: list[int] = []
    hops: list[int] = []
    ok = True
    for name in sorted(partition):
        part = sorted(partition[name])
        subnet, to_global = _induced_subnetwork(net, part)
        k_part = max(1, math.ceil(k * len(part) / net.n_links))
        sub_truth = DelayVector.from_dense([truth[g] for g in to_global])
        matrix = build_matrix(
            subnet.n_links,
            min(max(1, math.ceil(rho * k_part)), subnet.n_links),
            weight_cap,
            mu_factor,
            seed=derive_seed(seed, name),
        )
        result = recover(
            subnet,
            matrix,
            sub_truth,
            mode="links",
            path_builder=path_builder,
            tolerance=tolerance,
        )
        for local, value in result.estimate.to_sparse().items():
            merged[to_global[local]] = value
        parts_out[name] = {
            "status": result.status,
            "links": len(part),
            "k_part": k_part,
            "probes": result.metrics.probes,
        }
        probes += result.metrics.probes
        iterations += result.decode.iterations
        spans.append(result.metrics.max_path_links)
        hops.append(result.metrics.max_path_hops)
        ok = ok and result.status == "success"
    return {
        "status": "success" if ok else "partial",
        "success": ok,
        "estimate": tuple(merged),
        "probes": probes,
        "iterations": iterations,
        "max_path_links": max(spans, default=0),
        "max_path_hops": max(hops, default=0),
        "isolation_violations": 0,
        "parts": parts_out,
    }


def _induced_subnetwork(net: Network, link_ids: list[int]) -> tuple[Network, list[int]]:
    """Sub-network on the given links, with local link id -> global map.

    Node remapping is monotone and global links are kept in sorted order,
    so local canonical link ids line up with sorted(link_ids) directly.
    """
    to_global = sorted(link_ids)
    nodes = sorted({x for e in to_global for x in net.links[e]})
    remap = {x: i for i, x in enumerate(nodes)}
    pairs = [(remap[u], remap[v]) for u, v in (net.links[e] for e in to_global)]
    try:
        sub = Network(len(nodes), pairs)
    except ValueError as exc:
        raise ValueError(f"partition part is not a valid sub-network: {exc}") from exc
    return sub, to_global
