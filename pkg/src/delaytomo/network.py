"""Undirected network model and probe-path (walk) semantics.

Nodes are dense integers 0..n-1.  Links are unordered node pairs, stored
canonically as (min, max) and indexed in sorted order; delay vectors over
links use these indices.  A probe path is a walk: a node sequence whose
consecutive pairs are links, with length = number of link traversals.  The
walk may revisit links and nodes; per-link multiplicities and per-node
visit counts are what the measurement model consumes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path as _csgraph_shortest_path

__all__ = ["MultiplicityMap", "Network", "ProbePath", "concatenate", "path_delay"]

# Above this many nodes the dense hop-distance table is not cached and the
# diameter falls back to a flagged double-sweep estimate.
DENSE_CACHE_MAX = 3000


@dataclass(frozen=True)
class ProbePath:
    """A walk v_1..v_{T+1}; a single node is the empty walk of length 0."""

    nodes: tuple[int, ...]

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("a probe path needs at least one node")

    @property
    def length(self) -> int:
        return len(self.nodes) - 1

    def steps(self):
        """Consecutive (u, v) node pairs."""
        return zip(self.nodes, self.nodes[1:])

    def reversed_path(self) -> "ProbePath":
        return ProbePath(tuple(reversed(self.nodes)))


@dataclass(frozen=True)
class MultiplicityMap:
    """Per-link traversal counts and per-node visit counts of one walk."""

    links: dict[int, int]
    nodes: dict[int, int]


def concatenate(first: ProbePath, second: ProbePath) -> ProbePath:
    if first.nodes[-1] != second.nodes[0]:
        raise ValueError("paths can only be concatenated where they meet")
    return ProbePath(first.nodes + second.nodes[1:])


class Network:
    """Connected undirected graph with indexed links.

    Immutable after construction; the hop-distance table is filled lazily
    and shared by all readers.
    """

    def __init__(self, n_nodes: int, links):
        if n_nodes < 1:
            raise ValueError("a network needs at least one node")
        canon = []
        seen = set()
        for u, v in links:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise ValueError(f"link ({u},{v}) references an unknown node")
            e = (min(u, v), max(u, v))
            if e in seen:
                raise ValueError(f"duplicate link {e}")
            seen.add(e)
            canon.append(e)
        self.n_nodes = n_nodes
        self.links: tuple[tuple[int, int], ...] = tuple(sorted(canon))
        self.link_index = {e: idx for idx, e in enumerate(self.links)}
        self.adjacency: list[list[tuple[int, int]]] = [[] for _ in range(n_nodes)]
        for idx, (u, v) in enumerate(self.links):
            self.adjacency[u].append((v, idx))
            self.adjacency[v].append((u, idx))
        for row in self.adjacency:
            row.sort()
        self._dist = None
        self._diameter = None
        self.diameter_is_estimate = False
        if not self._is_connected():
            raise ValueError("network must be connected")

    @property
    def n_links(self) -> int:
        return len(self.links)

    def link_id(self, u: int, v: int) -> int:
        return self.link_index[(min(u, v), max(u, v))]

    def neighbors(self, v: int) -> list[int]:
        return [w for w, _ in self.adjacency[v]]

    def _is_connected(self) -> bool:
        if self.n_nodes == 1:
            return True
        seen = bytearray(self.n_nodes)
        seen[0] = 1
        queue = deque([0])
        count = 1
        while queue:
            u = queue.popleft()
            for w, _ in self.adjacency[u]:
                if not seen[w]:
                    seen[w] = 1
                    count += 1
                    queue.append(w)
        return count == self.n_nodes

    # -- distances ---------------------------------------------------------

    def _bfs_distances(self, source: int) -> list[int]:
        dist = [-1] * self.n_nodes
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            du = dist[u]
            for w, _ in self.adjacency[u]:
                if dist[w] < 0:
                    dist[w] = du + 1
                    queue.append(w)
        return dist

    def _dist_table(self):
        if self._dist is None and self.n_nodes <= DENSE_CACHE_MAX:
            n = self.n_nodes
            rows = np.fromiter((u for u, _ in self.links), dtype=np.int32, count=self.n_links)
            cols = np.fromiter((v for _, v in self.links), dtype=np.int32, count=self.n_links)
            data = np.ones(self.n_links, dtype=np.int8)
            graph = csr_matrix((data, (rows, cols)), shape=(n, n))
            table = _csgraph_shortest_path(graph, method="D", directed=False, unweighted=True)
            self._dist = table.astype(np.int32)
        return self._dist

    def hop_distance(self, a: int, b: int) -> int:
        table = self._dist_table()
        if table is not None:
            return int(table[a, b])
        return self._bfs_distances(a)[b]

    def shortest_path(self, a: int, b: int) -> ProbePath:
        """Minimum-hop walk from a to b (empty walk when a == b).

        Deterministic: among equal-length paths the lexicographically
        smallest next node is taken at every step.
        """
        if a == b:
            return ProbePath((a,))
        table = self._dist_table()
        if table is not None:
            row = table[b]
            if row[a] < 0:
                raise ValueError(f"no path between {a} and {b}")
            walk = [a]
            cur = a
            while cur != b:
                step = int(row[cur]) - 1
                cur = next(w for w, _ in self.adjacency[cur] if row[w] == step)
                walk.append(cur)
            return ProbePath(tuple(walk))
        # No cached table: plain BFS with parent pointers.
        parent = [-1] * self.n_nodes
        parent[a] = a
        queue = deque([a])
        while queue:
            u = queue.popleft()
            if u == b:
                break
            for w, _ in self.adjacency[u]:
                if parent[w] < 0:
                    parent[w] = u
                    queue.append(w)
        if parent[b] < 0:
            raise ValueError(f"no path between {a} and {b}")
        walk = [b]
        while walk[-1] != a:
            walk.append(parent[walk[-1]])
        return ProbePath(tuple(reversed(walk)))

    def diameter(self) -> int:
        """Max hop distance over node pairs.

        Exact while the dense table is cached; beyond that a double-sweep
        upper-bound estimate is returned and diameter_is_estimate is set.
        """
        if self._diameter is not None:
            return self._diameter
        table = self._dist_table()
        if table is not None:
            self._diameter = int(table.max())
            self.diameter_is_estimate = False
        else:
            # Upper bound: diameter <= 2 * ecc(x) for every x.  Two sweeps
            # locate a fairly central root among the visited extremes.
            best = None
            root = 0
            for _ in range(3):
                dist = self._bfs_distances(root)
                ecc = max(dist)
                bound = 2 * ecc
                best = bound if best is None else min(best, bound)
                root = max(range(self.n_nodes), key=lambda v: (dist[v], -v))
            self._diameter = best
            self.diameter_is_estimate = True
        return self._diameter

    # -- walks -------------------------------------------------------------

    def make_path(self, nodes, validate: bool = True) -> ProbePath:
        walk = tuple(int(v) for v in nodes)
        if validate:
            for u, v in zip(walk, walk[1:]):
                if (min(u, v), max(u, v)) not in self.link_index:
                    raise ValueError(f"walk step ({u},{v}) is not a link")
        return ProbePath(walk)

    def multiplicities(self, path: ProbePath) -> MultiplicityMap:
        links: dict[int, int] = {}
        nodes: dict[int, int] = {}
        for v in path.nodes:
            nodes[v] = nodes.get(v, 0) + 1
        for u, v in path.steps():
            e = self.link_id(u, v)
            links[e] = links.get(e, 0) + 1
        return MultiplicityMap(links, nodes)


def path_delay(net: Network, path: ProbePath, delays, target: str = "links"):
    """End-to-end delay of a walk: sum of per-element delay x visit count.

    target="links" weighs each link by its traversal count; target="nodes"
    weighs each node by its appearance count in the walk.  `delays` is a
    DelayVector or plain sequence indexed by link id or node id.
    """
    values = getattr(delays, "entries", delays)
    if target == "links":
        if len(values) != net.n_links:
            raise ValueError(f"expected {net.n_links} link delays, got {len(values)}")
        total = 0
        for u, v in path.steps():
            total += values[net.link_id(u, v)]
        return total
    if target == "nodes":
        if len(values) != net.n_nodes:
            raise ValueError(f"expected {net.n_nodes} node delays, got {len(values)}")
        total = 0
        for v in path.nodes:
            total += values[v]
        return total
    raise ValueError(f"unknown target {target!r}")
