"""Topology generators and edge-list I/O.

Generator spec strings (used by the CLI and the trial harness):

    complete:N            complete graph on N nodes
    line:N                path graph on N nodes
    er:N:P                Erdos-Renyi G(N, P), resampled until connected
    clique_plus_line:L    skewed graph sized so total links ~ L: one clique
                          plus a pendant line of ~L**0.4 nodes
    two_cliques_line:L    two cliques of ~sqrt(L) nodes joined by a line of
                          ~L**0.6 nodes (decomposition demo)
    file:PATH             whitespace-separated edge list
"""

from __future__ import annotations

import math

import numpy as np

from .network import Network

__all__ = [
    "clique_plus_line",
    "clique_plus_line_sizes",
    "complete_graph",
    "erdos_renyi",
    "generate_topology",
    "line_graph",
    "load_edge_list",
    "two_cliques_line",
]


class GenerationError(RuntimeError):
    """Raised when a random topology cannot be realized (e.g. stays disconnected)."""


def complete_graph(n_nodes: int) -> Network:
    links = [(u, v) for u in range(n_nodes) for v in range(u + 1, n_nodes)]
    return Network(n_nodes, links)


def line_graph(n_nodes: int) -> Network:
    return Network(n_nodes, [(v, v + 1) for v in range(n_nodes - 1)])


def erdos_renyi(
    n_nodes: int,
    p: float,
    rng: np.random.Generator | None = None,
    max_tries: int = 200,
) -> Network:
    """G(n, p) conditioned on connectivity by resampling."""
    if not 0 < p <= 1:
        raise GenerationError(f"edge probability must be in (0, 1], got {p}")
    rng = np.random.default_rng() if rng is None else rng
    rows, cols = np.triu_indices(n_nodes, k=1)
    for _ in range(max_tries):
        keep = rng.random(len(rows)) < p
        links = list(zip(rows[keep].tolist(), cols[keep].tolist()))
        try:
            return Network(n_nodes, links)
        except ValueError:
            continue  # disconnected draw
    raise GenerationError(
        f"no connected G({n_nodes}, {p}) draw within {max_tries} tries"
    )


def clique_plus_line_sizes(n_links: int) -> tuple[int, int]:
    """(clique nodes, line nodes) so clique links ~ n_links - n_links**0.4."""
    tail = n_links ** 0.4
    clique = round((1 + math.sqrt(1 + 8 * (n_links - tail))) / 2)
    return max(clique, 3), max(round(tail), 2)


def clique_plus_line(n_links: int) -> Network:
    """A clique with a pendant line: worst-case terminal sets straddle the
    line while uniform ones almost always stay inside the clique."""
    c, l = clique_plus_line_sizes(n_links)
    links = [(u, v) for u in range(c) for v in range(u + 1, c)]
    links.append((0, c))
    links.extend((c + t, c + t + 1) for t in range(l - 1))
    return Network(c + l, links)


def two_cliques_line(scale: int) -> Network:
    """Two ~sqrt(scale)-node cliques bridged by a ~scale**0.6-node line."""
    c = max(3, round(scale ** 0.5))
    l = max(2, round(scale ** 0.6))
    links = []
    links.extend((u, v) for u in range(c) for v in range(u + 1, c))
    second = c + l
    links.extend((second + u, second + v) for u in range(c) for v in range(u + 1, c))
    links.append((0, c))
    links.extend((c + t, c + t + 1) for t in range(l - 1))
    links.append((c + l - 1, second))
    return Network(2 * c + l, links)


def load_edge_list(path: str) -> Network:
    """Read one 'u v' pair per line; arbitrary integer ids are remapped to
    dense 0-based node indices (ascending by original id)."""
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            pairs.append((int(parts[0]), int(parts[1])))
    ids = sorted({x for pair in pairs for x in pair})
    remap = {x: i for i, x in enumerate(ids)}
    return Network(len(ids), [(remap[u], remap[v]) for u, v in pairs])


def generate_topology(spec: str, rng: np.random.Generator | None = None) -> Network:
    """Build a Network from a generator spec string (see module docstring)."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "complete":
            return complete_graph(int(rest))
        if kind == "line":
            return line_graph(int(rest))
        if kind == "er":
            n_str, _, p_str = rest.partition(":")
            return erdos_renyi(int(n_str), float(p_str), rng)
        if kind == "clique_plus_line":
            return clique_plus_line(int(rest))
        if kind == "two_cliques_line":
            return two_cliques_line(int(rest))
        if kind == "file":
            return load_edge_list(rest)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValueError) and "topology" in str(exc):
            raise
        raise ValueError(f"bad topology spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown topology kind {kind!r} in spec {spec!r}")
