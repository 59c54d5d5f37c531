"""Integer-weighted sparse measurement matrices.

A measurement matrix is a tall, grouped matrix: mu groups of group_height
consecutive rows each, over n signal coordinates.  Every coordinate touches
exactly three groups (a sparse left-regular bipartite layout), and each
(coordinate, group) edge carries a weight vector of positive integers with
unit gcd, so that a group fed by a single non-zero coordinate exposes that
coordinate's identity through proportionality.
"""

from __future__ import annotations

import json
import math
import secrets
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import zeta as _scipy_zeta

LEFT_DEGREE = 3  # groups touched by every signal coordinate

__all__ = [
    "BipartiteGraph",
    "CapacityError",
    "DelayVector",
    "GroupedOutput",
    "MeasurementMatrix",
    "build_matrix",
    "encode",
    "load_matrix",
    "matrix_to_json",
    "min_group_height",
    "riemann_zeta",
    "sample_coprime_vectors",
]


class CapacityError(RuntimeError):
    """Raised when distinct coprime weight vectors cannot be sampled."""


@lru_cache(maxsize=None)
def riemann_zeta(exponent: int) -> float:
    """Evaluate sum_{t>=1} t**-exponent for integer exponent >= 2.

    The series diverges at exponent 1, so smaller arguments are a domain
    error.  The value always lies in (1, 2].
    """
    if exponent < 2:
        raise ValueError(f"zeta series diverges for exponent {exponent} < 2")
    return float(_scipy_zeta(exponent))


def min_group_height(n: int, weight_cap: int) -> int:
    """Smallest group height R >= 2 with weight_cap**R / zeta(R) >= 3n.

    This is the height at which enough distinct unit-gcd weight vectors
    exist to label all 3n bipartite edges; it grows as ceil(log n / log M).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if weight_cap < 2:
        raise ValueError(f"weight_cap must be >= 2, got {weight_cap}")
    height = 2
    while (weight_cap ** height) / riemann_zeta(height) < 3 * n:
        height += 1
    return height


def sample_coprime_vectors(
    count: int,
    length: int,
    weight_cap: int,
    rng: np.random.Generator,
) -> list[tuple[int, ...]]:
    """Draw `count` distinct vectors in [1, weight_cap]**length with gcd 1.

    Rejection sampling: draw uniformly, discard vectors with gcd != 1 and
    duplicates, so accepted draws are uniform over the valid set.  Raises
    CapacityError if the draw budget (100 per requested vector) runs out,
    which only happens when fewer than `count` valid vectors exist.
    """
    if count == 0:
        return []
    if length < 1 or weight_cap < 2:
        raise ValueError("need length >= 1 and weight_cap >= 2")
    found: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    budget = 100 * count
    drawn = 0
    while len(found) < count:
        batch = min(max(1024, count - len(found)), budget - drawn)
        if batch <= 0:
            raise CapacityError(
                f"could not sample {count} distinct unit-gcd vectors from "
                f"[1,{weight_cap}]^{length} within {budget} draws"
            )
        draws = rng.integers(1, weight_cap + 1, size=(batch, length))
        drawn += batch
        keep = np.gcd.reduce(draws, axis=1) == 1
        for row in draws[keep]:
            vec = tuple(int(x) for x in row)
            if vec not in seen:
                seen.add(vec)
                found.append(vec)
                if len(found) == count:
                    break
    return found


@dataclass(frozen=True)
class BipartiteGraph:
    """Left-regular bipartite support: n_left coordinates, n_right groups.

    `adjacency[j]` lists the exactly-three distinct groups coordinate j
    feeds, in sampling order.
    """

    n_left: int
    n_right: int
    adjacency: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.adjacency) != self.n_left:
            raise ValueError("adjacency length must equal n_left")
        for j, groups in enumerate(self.adjacency):
            if len(groups) != LEFT_DEGREE or len(set(groups)) != LEFT_DEGREE:
                raise ValueError(f"coordinate {j} must touch exactly 3 distinct groups")
            if any(i < 0 or i >= self.n_right for i in groups):
                raise ValueError(f"coordinate {j} has a group index out of range")

    def right_neighbors(self) -> list[list[int]]:
        """Coordinates feeding each group, ascending."""
        nbrs: list[list[int]] = [[] for _ in range(self.n_right)]
        for j, groups in enumerate(self.adjacency):
            for i in groups:
                nbrs[i].append(j)
        return nbrs


@dataclass(frozen=True)
class MeasurementMatrix:
    """Grouped integer measurement matrix.

    weights maps each bipartite edge (coordinate j, group i) to its
    length-`group_height` weight vector; absent edges are all-zero blocks.
    """

    graph: BipartiteGraph
    weights: dict[tuple[int, int], tuple[int, ...]]
    group_height: int
    weight_cap: int
    seed: int
    sparsity: int
    mu_factor: float
    _right_index: list[list[int]] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        expected = LEFT_DEGREE * self.graph.n_left
        if len(self.weights) != expected:
            raise ValueError(f"expected {expected} weighted edges, got {len(self.weights)}")
        distinct = set()
        for (j, i), vec in self.weights.items():
            if i not in self.graph.adjacency[j]:
                raise ValueError(f"weight on non-edge ({j},{i})")
            if len(vec) != self.group_height:
                raise ValueError("weight vector length must equal group_height")
            if any(w < 1 or w > self.weight_cap for w in vec):
                raise ValueError("weight entries must lie in [1, weight_cap]")
            if math.gcd(*vec) != 1:
                raise ValueError(f"weight vector on edge ({j},{i}) has gcd != 1")
            distinct.add(vec)
        if len(distinct) != expected:
            raise ValueError("weight vectors must be pairwise distinct")
        object.__setattr__(self, "_right_index", self.graph.right_neighbors())

    @property
    def n(self) -> int:
        return self.graph.n_left

    @property
    def n_groups(self) -> int:
        return self.graph.n_right

    @property
    def n_rows(self) -> int:
        return self.group_height * self.n_groups

    def group_members(self, group: int) -> list[int]:
        """Coordinates with a non-zero block in `group`."""
        return self._right_index[group]

    def edge_weights(self, j: int) -> list[tuple[int, tuple[int, ...]]]:
        """(group, weight vector) pairs for coordinate j."""
        return [(i, self.weights[(j, i)]) for i in self.graph.adjacency[j]]


def build_matrix(
    n: int,
    sparsity: int,
    weight_cap: int,
    mu_factor: float = 4.0,
    seed: int | None = None,
) -> MeasurementMatrix:
    """Sample a measurement matrix for n coordinates at the given sparsity.

    Groups: mu = max(ceil(mu_factor * sparsity), 3).  Group height comes
    from min_group_height.  Construction is fully determined by `seed`
    (drawn from entropy when omitted, and recorded on the result).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 1 <= sparsity <= n:
        raise ValueError(f"sparsity must be in [1, n], got {sparsity}")
    if weight_cap < 2:
        raise ValueError(f"weight_cap must be >= 2, got {weight_cap}")
    if mu_factor <= 0:
        raise ValueError(f"mu_factor must be > 0, got {mu_factor}")
    if seed is None:
        seed = secrets.randbits(63)
    seed = int(seed)

    mu = max(math.ceil(mu_factor * sparsity), LEFT_DEGREE)
    height = min_group_height(n, weight_cap)
    rng = np.random.default_rng(seed)

    # Batched rejection: redraw rows until each holds 3 distinct groups.
    picks = rng.integers(0, mu, size=(n, LEFT_DEGREE))
    while True:
        dup = (
            (picks[:, 0] == picks[:, 1])
            | (picks[:, 0] == picks[:, 2])
            | (picks[:, 1] == picks[:, 2])
        )
        bad = int(dup.sum())
        if bad == 0:
            break
        picks[dup] = rng.integers(0, mu, size=(bad, LEFT_DEGREE))
    adjacency = tuple(tuple(int(i) for i in row) for row in picks)
    graph = BipartiteGraph(n, mu, adjacency)

    vectors = sample_coprime_vectors(LEFT_DEGREE * n, height, weight_cap, rng)
    weights = {
        (j, i): vectors[LEFT_DEGREE * j + t]
        for j, groups in enumerate(adjacency)
        for t, i in enumerate(groups)
    }
    return MeasurementMatrix(
        graph=graph,
        weights=weights,
        group_height=height,
        weight_cap=weight_cap,
        seed=seed,
        sparsity=sparsity,
        mu_factor=float(mu_factor),
    )


@dataclass(frozen=True)
class DelayVector:
    """Length-n delay vector with at most `sparsity` non-zero entries.

    Entries may be ints/Fractions (exact mode) or floats.  With
    nonneg=True, negative entries are rejected (delays are times).
    """

    entries: tuple
    sparsity: int
    nonneg: bool = False

    def __post_init__(self):
        nnz = 0
        for v in self.entries:
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError("delay entries must be finite")
            if v != 0:
                nnz += 1
            if self.nonneg and v < 0:
                raise ValueError("negative delay rejected in nonneg mode")
        if nnz > self.sparsity:
            raise ValueError(f"{nnz} non-zeros exceed sparsity bound {self.sparsity}")

    @classmethod
    def from_dense(cls, values, sparsity: int | None = None, nonneg: bool = False):
        entries = tuple(values)
        nnz = sum(1 for v in entries if v != 0)
        return cls(entries, nnz if sparsity is None else sparsity, nonneg)

    @classmethod
    def from_sparse(cls, n: int, values: dict, sparsity: int | None = None, nonneg: bool = False):
        dense = [0] * n
        for j, v in values.items():
            dense[j] = v
        return cls.from_dense(dense, sparsity, nonneg)

    @classmethod
    def zeros(cls, n: int):
        return cls((0,) * n, 0)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, j):
        return self.entries[j]

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for v in self.entries)

    def support(self) -> list[int]:
        return [j for j, v in enumerate(self.entries) if v != 0]

    def to_sparse(self) -> dict:
        return {j: self.entries[j] for j in self.support()}


@dataclass(frozen=True)
class GroupedOutput:
    """Measurement output: one length-`group_height` sub-vector per group."""

    groups: tuple[tuple, ...]

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def group_height(self) -> int:
        return len(self.groups[0]) if self.groups else 0

    def flat(self) -> tuple:
        return tuple(v for g in self.groups for v in g)

    def inf_norm(self) -> float:
        return max((abs(v) for g in self.groups for v in g), default=0)


def encode(matrix: MeasurementMatrix, delays: DelayVector) -> GroupedOutput:
    """Grouped matrix-vector product; exact when the delays are exact.

    Only the support of `delays` is touched, so encoding is
    O(sparsity * group_height).
    """
    if len(delays) != matrix.n:
        raise ValueError(f"delay vector length {len(delays)} != matrix n {matrix.n}")
    zero = 0 if delays.is_exact else 0.0
    acc = [[zero] * matrix.group_height for _ in range(matrix.n_groups)]
    for j in delays.support():
        dj = delays[j]
        for i, vec in matrix.edge_weights(j):
            row = acc[i]
            for r, w in enumerate(vec):
                row[r] += dj * w
    return GroupedOutput(tuple(tuple(row) for row in acc))


def matrix_to_json(matrix: MeasurementMatrix) -> str:
    """Audit dump.  Regeneration from (n, sparsity, weight_cap, mu_factor,
    seed) is the canonical form; this JSON mirrors the realized structure."""
    edges = [
        {"j": j, "i": i, "weights": list(matrix.weights[(j, i)])}
        for j in range(matrix.n)
        for i in matrix.graph.adjacency[j]
    ]
    doc = {
        "n": matrix.n,
        "mu": matrix.n_groups,
        "R": matrix.group_height,
        "M": matrix.weight_cap,
        "seed": matrix.seed,
        "sparsity": matrix.sparsity,
        "mu_factor": matrix.mu_factor,
        "edges": edges,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def load_matrix(text: str) -> MeasurementMatrix:
    """Rebuild a matrix from its JSON dump, re-validating all invariants."""
    doc = json.loads(text)
    n, mu = doc["n"], doc["mu"]
    per_left: dict[int, list[tuple[int, tuple[int, ...]]]] = {j: [] for j in range(n)}
    for rec in doc["edges"]:
        per_left[rec["j"]].append((rec["i"], tuple(rec["weights"])))
    adjacency = tuple(tuple(i for i, _ in per_left[j]) for j in range(n))
    weights = {(j, i): vec for j in range(n) for i, vec in per_left[j]}
    return MeasurementMatrix(
        graph=BipartiteGraph(n, mu, adjacency),
        weights=weights,
        group_height=doc["R"],
        weight_cap=doc["M"],
        seed=doc["seed"],
        sparsity=doc.get("sparsity", 1),
        mu_factor=doc.get("mu_factor", 4.0),
    )
