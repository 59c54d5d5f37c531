"""Reduction from matrix rows to network probe paths, and full recovery.

Each matrix group yields one spanning path that visits every link (or
node) the group weighs, shared by the group's sub-rows, plus one weighted
path per sub-row that follows the spanning walk and inserts local
back-and-forth loops so that per-element visit counts exceed the spanning
path's by exactly twice the sub-row weight.  Half the difference of the
two end-to-end delays then reproduces the matrix measurement, and the
peeling decoder runs unchanged on the result.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .network import Network, ProbePath, path_delay
from .peeling import DecodeResult, decode
from .sensing import DelayVector, GroupedOutput, MeasurementMatrix
from .steiner import steiner_approx, tree_tour

__all__ = [
    "GroupPlan",
    "MeasurementPlan",
    "PlanMetrics",
    "RecoveryResult",
    "RowWeights",
    "build_node_weighted_path",
    "build_plan",
    "build_spanning_path",
    "build_weighted_path",
    "choose_loop_partners",
    "recover",
    "subtract_measurements",
]


@dataclass(frozen=True)
class RowWeights:
    """Sparse positive integer weights of one sub-row, keyed by element id."""

    group: int
    subrow: int
    weights: dict[int, int]

    def support(self) -> list[int]:
        return sorted(self.weights)


def subtract_measurements(delta_weighted, delta_spanning):
    """Half the delay difference of a weighted/spanning pair: the weighted
    sum of element delays the loops encoded."""
    diff = delta_weighted - delta_spanning
    if isinstance(diff, float):
        return diff / 2
    half = Fraction(diff) / 2
    return int(half) if half.denominator == 1 else half


def build_spanning_path(
    net: Network,
    support,
    order: str = "arbitrary",
    rng: np.random.Generator | None = None,
) -> ProbePath:
    """Walk visiting every support link at least once.

    order="arbitrary" strings the links together one by one (shuffled when
    an rng is supplied, ascending otherwise), bridging consecutive links
    with shortest paths; order="nearest" greedily picks the closest
    uncovered link instead, skipping links already covered en route.  Every
    bridge is at most the diameter, so the walk length is bounded by
    |support| * (diameter + 1).
    """
    ids = sorted(set(support))
    if not ids:
        raise ValueError("support must be non-empty")
    for e in ids:
        if not 0 <= e < net.n_links:
            raise ValueError(f"unknown link id {e}")
    if order == "arbitrary":
        if rng is not None:
            ids = [ids[t] for t in rng.permutation(len(ids))]
        sequence = ids
    elif order == "nearest":
        sequence = None
    else:
        raise ValueError(f"unknown visit order {order!r}")

    first = ids[0]
    u0, v0 = net.links[first]
    walk = [u0, v0]
    covered = {first}

    if sequence is not None:
        for e in sequence[1:]:
            _extend_to_link(net, walk, e)
            covered.add(e)
    else:
        remaining = set(ids) - covered
        while remaining:
            cur = walk[-1]
            e = min(
                remaining,
                key=lambda x: (min(net.hop_distance(cur, net.links[x][0]),
                                   net.hop_distance(cur, net.links[x][1])), x),
            )
            mark_from = len(walk) - 1
            _extend_to_link(net, walk, e)
            for a, b in zip(walk[mark_from:], walk[mark_from + 1:]):
                covered.add(net.link_id(a, b))
            remaining -= covered
    return ProbePath(tuple(walk))


def _extend_to_link(net: Network, walk: list[int], e: int) -> None:
    """Bridge from the walk's end to link e's nearer endpoint, then cross it."""
    a, b = net.links[e]
    cur = walk[-1]
    da, db = net.hop_distance(cur, a), net.hop_distance(cur, b)
    enter, leave = (a, b) if (da, a) <= (db, b) else (b, a)
    if cur != enter:
        walk.extend(net.shortest_path(cur, enter).nodes[1:])
    walk.append(leave)


def build_weighted_path(net: Network, spanning: ProbePath, weights: dict[int, int]) -> ProbePath:
    """Follow the spanning walk, looping each weighted link at first visit.

    A link with weight w is crossed 2w extra times (w forward/backward
    bounces) the first time the walk reaches it; later visits pass through
    once.  The result's per-link multiplicity is the spanning path's plus
    2w exactly, and its length grows by 2 * sum(weights).
    """
    for e, w in weights.items():
        if w < 1:
            raise ValueError(f"weight on link {e} must be a positive integer")
    walk = [spanning.nodes[0]]
    pending = dict(weights)
    for u, v in spanning.steps():
        e = net.link_id(u, v)
        w = pending.pop(e, 0)
        if w:
            walk.extend([v, u] * w)
        walk.append(v)
    if pending:
        raise ValueError(f"weights on links never visited by the spanning path: {sorted(pending)}")
    return ProbePath(tuple(walk))


def choose_loop_partners(
    net: Network,
    weighted_nodes,
    policy: str = "first_neighbor",
    truth: DelayVector | None = None,
) -> tuple[dict[int, int], int]:
    """Pick the bounce neighbor for every weighted node.

    first_neighbor takes the smallest-id neighbor; oracle_noncongested
    prefers a zero-delay neighbor from the ground truth and falls back to
    first_neighbor when every neighbor is congested.  Returns the partner
    map and the number of congested partners (isolation violations) --
    countable only when the truth is visible.
    """
    partners: dict[int, int] = {}
    violations = 0
    for v in sorted(set(weighted_nodes)):
        nbrs = net.neighbors(v)
        if not nbrs:
            raise ValueError(f"node {v} has no neighbor to loop through")
        pick = nbrs[0]
        if policy == "oracle_noncongested":
            if truth is None:
                raise ValueError("oracle_noncongested policy needs the ground truth")
            clean = [u for u in nbrs if truth[u] == 0]
            if clean:
                pick = clean[0]
        elif policy != "first_neighbor":
            raise ValueError(f"unknown loop policy {policy!r}")
        partners[v] = pick
        if truth is not None and truth[pick] != 0:
            violations += 1
    return partners, violations


def build_node_weighted_path(
    net: Network,
    spanning: ProbePath,
    weights: dict[int, int],
    partners: dict[int, int],
) -> ProbePath:
    """Node-mode weighted walk: 2w loops v->partner->v at v's first visit.

    Each loop adds one visit of v and one of the partner, so visit counts
    of both rise by exactly 2w.  Subtracting the spanning delay therefore
    yields sum_v w_v * (d_v + d_partner(v)): the partner's delay pollutes
    the measurement unless the partner is non-congested, which is why
    recovery in node mode needs every congested node to have a clean
    neighbor.
    """
    for v, w in weights.items():
        if w < 1:
            raise ValueError(f"weight on node {v} must be a positive integer")
        if v not in partners:
            raise ValueError(f"no loop partner chosen for node {v}")
    walk = []
    pending = dict(weights)
    for v in spanning.nodes:
        walk.append(v)
        w = pending.pop(v, 0)
        if w:
            walk.extend([partners[v], v] * (2 * w))
    if pending:
        raise ValueError(f"weights on nodes never visited by the spanning path: {sorted(pending)}")
    return ProbePath(tuple(walk))


def _node_spanning_path(
    net: Network,
    support,
    order: str,
    rng: np.random.Generator | None,
) -> ProbePath:
    """Walk visiting every support node at least once (node-mode analogue)."""
    ids = sorted(set(support))
    if not ids:
        raise ValueError("support must be non-empty")
    if order == "arbitrary" and rng is not None:
        ids = [ids[t] for t in rng.permutation(len(ids))]
    walk = [ids[0]]
    if order == "nearest":
        remaining = set(ids[1:])
        while remaining:
            cur = walk[-1]
            v = min(remaining, key=lambda x: (net.hop_distance(cur, x), x))
            walk.extend(net.shortest_path(cur, v).nodes[1:])
            remaining -= set(walk)
    else:
        for v in ids[1:]:
            if v != walk[-1]:
                walk.extend(net.shortest_path(walk[-1], v).nodes[1:])
    return ProbePath(tuple(walk))


@dataclass(frozen=True)
class GroupPlan:
    group: int
    spanning: ProbePath
    weighted: tuple[ProbePath, ...]          # one per sub-row
    row_weights: tuple[RowWeights, ...]
    loop_partners: dict[int, int] | None     # node mode only


@dataclass(frozen=True)
class PlanMetrics:
    probes: int
    max_path_links: int
    mean_path_links: float
    max_path_hops: int
    mean_path_hops: float
    mean_row_support: float
    isolation_violations: int


@dataclass(frozen=True)
class MeasurementPlan:
    mode: str
    path_builder: str
    groups: tuple[GroupPlan, ...]

    def metrics(self, isolation_violations: int = 0) -> PlanMetrics:
        span_lengths = [g.spanning.length for g in self.groups]
        hop_lengths = [p.length for g in self.groups for p in (g.spanning, *g.weighted)]
        supports = [len(g.row_weights[0].weights) for g in self.groups]
        probes = sum(1 + len(g.weighted) for g in self.groups)
        return PlanMetrics(
            probes=probes,
            max_path_links=max(span_lengths, default=0),
            mean_path_links=_mean(span_lengths),
            max_path_hops=max(hop_lengths, default=0),
            mean_path_hops=_mean(hop_lengths),
            mean_row_support=_mean(supports),
            isolation_violations=isolation_violations,
        )


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


def _plan_rng(matrix: MeasurementMatrix, group: int) -> np.random.Generator:
    return np.random.default_rng([matrix.seed & (2 ** 63 - 1), group, 0x5EED])


def build_plan(
    net: Network,
    matrix: MeasurementMatrix,
    mode: str = "links",
    path_builder: str = "naive",
    loop_policy: str = "first_neighbor",
    truth: DelayVector | None = None,
) -> tuple[MeasurementPlan, int]:
    """Construct all probe paths for a matrix.

    Groups with no weighted elements are skipped (their measurement is
    identically zero without probing).  Returns the plan and the number of
    isolation violations observed while choosing node-mode loop partners
    (0 in link mode or when no truth is available).

    The per-group link visit order in the naive builder is derived from the
    matrix seed, so plans are reproducible given (net, matrix).
    """
    n_expected = net.n_links if mode == "links" else net.n_nodes
    if matrix.n != n_expected:
        raise ValueError(
            f"matrix has {matrix.n} columns but the network has {n_expected} "
            f"{'links' if mode == 'links' else 'nodes'}"
        )
    if mode not in ("links", "nodes"):
        raise ValueError(f"unknown mode {mode!r}")
    if path_builder not in ("naive", "steiner"):
        raise ValueError(f"unknown path builder {path_builder!r}")

    groups = []
    violations = 0
    for i in range(matrix.n_groups):
        members = matrix.group_members(i)
        if not members:
            continue
        rows = tuple(
            RowWeights(i, r, {j: matrix.weights[(j, i)][r] for j in members})
            for r in range(matrix.group_height)
        )
        support = list(members)
        if mode == "links":
            spanning = _link_spanning(net, support, path_builder, _plan_rng(matrix, i))
            weighted = tuple(build_weighted_path(net, spanning, rw.weights) for rw in rows)
            partners = None
        else:
            spanning = _node_spanning(net, support, path_builder, _plan_rng(matrix, i))
            partners, bad = choose_loop_partners(net, support, loop_policy, truth)
            violations += bad
            weighted = tuple(
                build_node_weighted_path(net, spanning, rw.weights, partners) for rw in rows
            )
        # Structural check per plan; one sub-row per group keeps it O(plan).
        _check_multiplicity_identity(net, spanning, weighted[:1], rows[:1], mode, partners)
        groups.append(GroupPlan(i, spanning, weighted, rows, partners))
    return MeasurementPlan(mode, path_builder, tuple(groups)), violations


def _link_spanning(net, support, path_builder, rng) -> ProbePath:
    if path_builder == "steiner":
        terminals = {x for e in support for x in net.links[e]}
        tree = steiner_approx(net, terminals)
        return tree_tour(net, tree, support)
    return build_spanning_path(net, support, order="arbitrary", rng=rng)


def _node_spanning(net, support, path_builder, rng) -> ProbePath:
    if path_builder == "steiner":
        tree = steiner_approx(net, support)
        if not tree.edges:
            return ProbePath((min(support),))
        return tree_tour(net, tree, ())
    return _node_spanning_path(net, support, "arbitrary", rng)


def _check_multiplicity_identity(net, spanning, weighted, rows, mode, partners):
    """Structural check: visit counts of each weighted path exceed the
    spanning path's by exactly twice the row weight (plus the bounce visits
    booked to loop partners in node mode)."""
    base = net.multiplicities(spanning)
    for path, rw in zip(weighted, rows):
        got = net.multiplicities(path)
        if mode == "links":
            for e in set(base.links) | set(got.links):
                expect = base.links.get(e, 0) + 2 * rw.weights.get(e, 0)
                if got.links.get(e, 0) != expect:
                    raise AssertionError(
                        f"multiplicity identity broken on link {e} of group {rw.group}"
                    )
        else:
            bounce: dict[int, int] = {}
            for v, w in rw.weights.items():
                u = partners[v]
                bounce[u] = bounce.get(u, 0) + 2 * w
            for v in set(base.nodes) | set(got.nodes):
                expect = base.nodes.get(v, 0) + 2 * rw.weights.get(v, 0) + bounce.get(v, 0)
                if got.nodes.get(v, 0) != expect:
                    raise AssertionError(
                        f"visit-count identity broken on node {v} of group {rw.group}"
                    )


def simulate_outputs(
    net: Network,
    matrix: MeasurementMatrix,
    plan: MeasurementPlan,
    truth: DelayVector,
) -> GroupedOutput:
    """Measure every plan path against the ground truth and assemble the
    grouped measurement vector by pairwise subtraction."""
    exact = truth.is_exact
    zero_row = tuple([0 if exact else 0.0] * matrix.group_height)
    out = [zero_row] * matrix.n_groups
    target = plan.mode
    for g in plan.groups:
        base_delay = path_delay(net, g.spanning, truth, target)
        row = [
            subtract_measurements(path_delay(net, q, truth, target), base_delay)
            for q in g.weighted
        ]
        out[g.group] = tuple(row)
    return GroupedOutput(tuple(out))


@dataclass(frozen=True)
class RecoveryResult:
    decode: DecodeResult
    metrics: PlanMetrics
    plan: MeasurementPlan

    @property
    def estimate(self) -> DelayVector:
        return self.decode.estimate

    @property
    def status(self) -> str:
        return self.decode.status


def recover(
    net: Network,
    matrix: MeasurementMatrix,
    truth: DelayVector,
    mode: str = "links",
    path_builder: str = "naive",
    loop_policy: str = "first_neighbor",
    decode_mode: str | None = None,
    tolerance: float = 1e-9,
) -> RecoveryResult:
    """Plan probes, simulate their delays against the truth, and decode.

    decode_mode defaults to exact when the truth is exact.  The matrix is
    expected to have been built for the inflated sparsity budget (rho * k)
    when a rho > 1 tradeoff is wanted; the plan and decoder are agnostic
    to rho.
    """
    plan, violations = build_plan(net, matrix, mode, path_builder, loop_policy, truth)
    output = simulate_outputs(net, matrix, plan, truth)
    if decode_mode is None:
        decode_mode = "exact" if truth.is_exact else "float"
    result = decode(matrix, output, mode=decode_mode, tolerance=tolerance)
    return RecoveryResult(result, plan.metrics(violations), plan)


def plan_records(plan: MeasurementPlan, net: Network):
    """Flatten a plan into JSON-friendly probe records (one per path)."""
    for g in plan.groups:
        yield {
            "row": g.group,
            "subrow": None,
            "kind": "spanning",
            "walk": list(g.spanning.nodes),
            "loops": [],
        }
        for rw, q in zip(g.row_weights, g.weighted):
            if plan.mode == "links":
                loops = [
                    {"at_link": list(net.links[e]), "count": w}
                    for e, w in sorted(rw.weights.items())
                ]
            else:
                loops = [
                    {"at_node": v, "via": g.loop_partners[v], "count": w}
                    for v, w in sorted(rw.weights.items())
                ]
            yield {
                "row": g.group,
                "subrow": rw.subrow,
                "kind": "weighted",
                "walk": list(q.nodes),
                "loops": loops,
            }
