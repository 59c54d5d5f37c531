"""Iterative peeling reconstruction for grouped integer measurements.

The decoder repeatedly looks for a group whose residual is explained by a
single coordinate (a leaf), reads that coordinate's value off the
proportionality ratio, cancels its contribution everywhere, and continues
until the residual vanishes or no leaf can be found.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .sensing import DelayVector, GroupedOutput, MeasurementMatrix

__all__ = ["DecodeResult", "decode", "detect_leaf"]

STATUS_SUCCESS = "success"
STATUS_STALLED = "stalled"
STATUS_INCONSISTENT = "inconsistent"


@dataclass(frozen=True)
class DecodeResult:
    estimate: DelayVector
    status: str
    iterations: int            # picks of a live (non-zero) group
    leaf_picks: int            # picks that decoded a coordinate
    false_leaf_rejections: int  # picks where no unique proportional match existed
    group_updates: int         # residual sub-vector subtractions performed

    @property
    def success(self) -> bool:
        return self.status == STATUS_SUCCESS


def detect_leaf(values, candidates, tolerance: float = 0.0):
    """Test whether a non-zero group residual is a single coordinate's block.

    values: the group's residual sub-vector (not all zero).
    candidates: iterable of (coordinate, weight vector) pairs.

    Returns (coordinate, value) when exactly one candidate's weight vector
    is proportional to `values` -- the value being the common ratio -- and
    None otherwise.  With tolerance 0 the comparison is exact (use with
    int/Fraction data); otherwise ratios must agree to the given relative
    tolerance.  Weight entries are >= 1, so no division can blow up, and
    distinct unit-gcd weight vectors are never proportional to each other,
    which makes the match unique for a true leaf.
    """
    matches = []
    if tolerance == 0:
        for j, vec in candidates:
            ratio = _exact_ratio(values, vec)
            if ratio is not None:
                matches.append((j, ratio))
    else:
        pivot = max(range(len(values)), key=lambda r: abs(values[r]))
        for j, vec in candidates:
            ratio = values[pivot] / vec[pivot]
            if ratio == 0:
                continue
            ok = True
            for r, w in enumerate(vec):
                want = ratio * w
                scale = max(abs(want), abs(values[r]))
                if abs(values[r] - want) > tolerance * scale:
                    ok = False
                    break
            if ok:
                matches.append((j, ratio))
    if len(matches) == 1:
        return matches[0]
    return None


def _exact_ratio(values, vec):
    ratio = Fraction(values[0]) / vec[0]
    for r in range(1, len(vec)):
        if Fraction(values[r]) != ratio * vec[r]:
            return None
    if ratio == 0:
        return None
    return int(ratio) if ratio.denominator == 1 else ratio


def decode(
    matrix: MeasurementMatrix,
    output: GroupedOutput,
    mode: str = "exact",
    tolerance: float = 1e-9,
) -> DecodeResult:
    """Peel a grouped measurement back into a sparse delay vector.

    Live groups are visited in FIFO order with re-enqueue on a failed leaf
    test; the decode stalls once every live group has been re-examined since
    the last successful peel.  In float mode a group counts as zero when its
    entries are within tolerance * ||y||_inf, and a success additionally
    requires the recomputed global residual to meet the same bound (else the
    status is `inconsistent`).
    """
    if output.n_groups != matrix.n_groups:
        raise ValueError(f"output has {output.n_groups} groups, matrix {matrix.n_groups}")
    if output.n_groups and output.group_height != matrix.group_height:
        raise ValueError("output group height does not match matrix")
    if mode not in ("exact", "float"):
        raise ValueError(f"unknown decode mode {mode!r}")
    exact = mode == "exact"
    leaf_tol = 0.0 if exact else tolerance
    norm = output.inf_norm()
    zero_eps = 0 if exact else tolerance * norm

    residual = [list(g) for g in output.groups]

    def group_is_zero(i: int) -> bool:
        return all(abs(v) <= zero_eps for v in residual[i])

    live = {i for i in range(matrix.n_groups) if not group_is_zero(i)}
    queue = deque(sorted(live))
    decoded: dict[int, object] = {}
    iterations = leaf_picks = rejections = group_updates = 0
    idle = 0  # live groups examined since the last peel

    while live:
        if idle >= len(queue):
            status = STATUS_STALLED
            break
        i = queue.popleft()
        if i not in live:
            continue
        iterations += 1
        candidates = [
            (j, matrix.weights[(j, i)])
            for j in matrix.group_members(i)
            if j not in decoded
        ]
        hit = detect_leaf(residual[i], candidates, leaf_tol) if candidates else None
        if hit is None:
            rejections += 1
            queue.append(i)
            idle += 1
            continue
        j, value = hit
        decoded[j] = value
        leaf_picks += 1
        idle = 0
        for i2, vec in matrix.edge_weights(j):
            row = residual[i2]
            for r, w in enumerate(vec):
                row[r] -= value * w
            group_updates += 1
            was_live = i2 in live
            is_live = not group_is_zero(i2)
            if was_live and not is_live:
                live.discard(i2)
            elif is_live and not was_live:
                live.add(i2)
                queue.append(i2)
    else:
        status = STATUS_SUCCESS

    entries = [0 if exact else 0.0] * matrix.n
    for j, v in decoded.items():
        entries[j] = v
    estimate = DelayVector(tuple(entries), sparsity=len(decoded))

    if status == STATUS_SUCCESS and not exact and norm > 0:
        if _float_residual_norm(matrix, output, estimate) > tolerance * norm:
            status = STATUS_INCONSISTENT

    return DecodeResult(estimate, status, iterations, leaf_picks, rejections, group_updates)


def _float_residual_norm(matrix, output, estimate) -> float:
    """||y - A d||_inf recomputed from scratch over the estimate's support."""
    acc = {}
    for j in estimate.support():
        dj = estimate[j]
        for i, vec in matrix.edge_weights(j):
            row = acc.setdefault(i, [0.0] * matrix.group_height)
            for r, w in enumerate(vec):
                row[r] += dj * w
    worst = 0.0
    for i, g in enumerate(output.groups):
        row = acc.get(i)
        for r, y in enumerate(g):
            diff = abs(y - (row[r] if row else 0.0))
            if diff > worst:
                worst = diff
    return worst
