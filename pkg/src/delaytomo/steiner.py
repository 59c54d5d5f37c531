"""Steiner-tree shortening of spanning probe paths.

The classic metric-closure 2-approximation: build the complete graph on the
terminals under hop distance, take its minimum spanning tree, expand each
tree edge back into a shortest path, and prune the union down to a tree.
A doubled depth-first tour of (tree + required links) then gives a closed
walk visiting every required link, of length at most twice the union size,
so overall within a constant factor of the optimal Steiner length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Network, ProbePath

__all__ = ["SteinerTree", "steiner_approx", "steiner_length_stats", "tree_tour"]


@dataclass(frozen=True)
class SteinerTree:
    terminals: frozenset[int]
    edges: frozenset[int]  # link ids

    @property
    def length(self) -> int:
        return len(self.edges)


def steiner_approx(net: Network, terminals) -> SteinerTree:
    """Approximate minimum-edge tree spanning `terminals` (ratio <= 2)."""
    terms = sorted(set(terminals))
    if not terms:
        raise ValueError("terminals must be non-empty")
    if len(terms) == 1:
        return SteinerTree(frozenset(terms), frozenset())

    closure = _terminal_distances(net, terms)

    # Prim over the metric closure, deterministic tie-breaking.
    in_tree = {terms[0]}
    mst_pairs = []
    dist = {t: closure[terms[0]][t] for t in terms[1:]}
    attach = {t: terms[0] for t in terms[1:]}
    while len(in_tree) < len(terms):
        t = min(dist, key=lambda x: (dist[x], x))
        mst_pairs.append((attach[t], t))
        in_tree.add(t)
        del dist[t]
        row = closure[t]
        for other in dist:
            d = row[other]
            if d < dist[other]:
                dist[other] = d
                attach[other] = t

    edge_ids = set()
    for a, b in mst_pairs:
        walk = net.shortest_path(a, b)
        for u, v in walk.steps():
            edge_ids.add(net.link_id(u, v))

    tree_edges = _prune_to_tree(net, edge_ids, set(terms))
    return SteinerTree(frozenset(terms), frozenset(tree_edges))


def _terminal_distances(net: Network, terms: list[int]) -> dict[int, dict[int, int]]:
    """Pairwise hop distances among terminals: one table slice when the
    dense cache applies, one BFS per terminal otherwise."""
    table = net._dist_table()
    if table is not None:
        return {t: {o: int(table[t, o]) for o in terms} for t in terms}
    out = {}
    for t in terms:
        dist = net._bfs_distances(t)
        out[t] = {o: dist[o] for o in terms}
    return out


def _prune_to_tree(net: Network, edge_ids: set[int], terminals: set[int]) -> set[int]:
    """Spanning tree of the expanded union, then strip non-terminal leaves."""
    incident: dict[int, list[tuple[int, int]]] = {}
    for e in sorted(edge_ids):
        u, v = net.links[e]
        incident.setdefault(u, []).append((v, e))
        incident.setdefault(v, []).append((u, e))

    root = min(terminals)
    tree = set()
    seen = {root}
    stack = [root]
    while stack:
        u = stack.pop()
        for v, e in sorted(incident.get(u, ())):
            if v not in seen:
                seen.add(v)
                tree.add(e)
                stack.append(v)
    if not terminals <= seen:
        raise ValueError("expanded closure does not reach every terminal")

    degree: dict[int, int] = {}
    for e in tree:
        for x in net.links[e]:
            degree[x] = degree.get(x, 0) + 1
    trim = [x for x, d in degree.items() if d == 1 and x not in terminals]
    link_at: dict[int, set[int]] = {}
    for e in tree:
        for x in net.links[e]:
            link_at.setdefault(x, set()).add(e)
    while trim:
        x = trim.pop()
        if degree.get(x, 0) != 1 or x in terminals:
            continue
        (e,) = [e for e in link_at[x] if e in tree]
        tree.discard(e)
        degree[x] = 0
        u, v = net.links[e]
        other = v if u == x else u
        degree[other] -= 1
        if degree[other] == 1 and other not in terminals:
            trim.append(other)
    return tree


def tree_tour(net: Network, tree: SteinerTree, support_links) -> ProbePath:
    """Closed walk visiting every support link, over tree + support edges.

    Depth-first doubling: every edge of the union is traversed exactly
    twice (descend/return for tree edges, an immediate bounce for the
    rest), so the walk length is exactly 2 * |tree union support|.
    """
    union = set(tree.edges) | set(support_links)
    if not union:
        raise ValueError("nothing to tour: tree and support are both empty")
    incident: dict[int, list[tuple[int, int]]] = {}
    for e in sorted(union):
        u, v = net.links[e]
        incident.setdefault(u, []).append((v, e))
        incident.setdefault(v, []).append((u, e))
    for row in incident.values():
        row.sort()

    start = min(incident)
    walk = [start]
    visited_nodes = {start}
    traversed: set[int] = set()
    stack = [(start, iter(incident[start]))]
    while stack:
        u, edges = stack[-1]
        for v, e in edges:
            if e in traversed:
                continue
            traversed.add(e)
            if v in visited_nodes:
                walk.append(v)  # bounce over a non-tree edge
                walk.append(u)
            else:
                visited_nodes.add(v)
                walk.append(v)
                stack.append((v, iter(incident[v])))
            break
        else:
            stack.pop()
            if stack:
                walk.append(stack[-1][0])  # return along the tree edge
    if traversed != union:
        raise ValueError("support links are not connected through the tree")
    return ProbePath(tuple(walk))


def steiner_length_stats(net: Network, s: int, trials: int, seed: int | None = None):
    """Worst and mean approximate Steiner length over uniform size-s
    terminal sets."""
    if not 1 <= s <= net.n_nodes:
        raise ValueError(f"terminal count must be in [1, {net.n_nodes}], got {s}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    lengths = []
    for _ in range(trials):
        terminals = rng.choice(net.n_nodes, size=s, replace=False)
        lengths.append(steiner_approx(net, (int(t) for t in terminals)).length)
    return {"worst": max(lengths), "mean": sum(lengths) / len(lengths)}
