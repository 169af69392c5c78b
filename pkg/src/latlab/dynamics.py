"""Finite discretizations ``f_{h,q}`` of a map on ``L_{h,q} ∩ Ω``.

A :class:`DiscretizedSystem` is a successor table over the enumerated
lattice points of the domain.  Everything downstream (fixed points,
cycles, robustness) is decided structurally on that functional graph.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .exceptions import DivergenceError, InvariantViolation, PreconditionError
from .lattice import (
    DEFAULT_POINT_CAP,
    DomainSpec,
    GridContext,
    LatticeIndex,
    axis_index_range,
    enumerate_domain,
    round_indices,
)
from .maps import ConditionVerdict, MapSpec

ESCAPE = -1


@dataclass(frozen=True)
class DiscretizedSystem:
    """``successor[i]`` is the position of the image of ``points[i]``, or
    ``ESCAPE`` when the image leaves the domain; ``images`` always holds the
    image's lattice index.  ``values`` caches ``f`` at every point."""

    ctx: GridContext
    points: np.ndarray
    successor: np.ndarray
    images: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    def index_of(self, z) -> int:
        z = np.asarray(z, dtype=np.int64)
        hit = np.flatnonzero(np.all(self.points == z, axis=1))
        if len(hit) == 0:
            raise KeyError(f"{tuple(z.tolist())} is not a point of the system")
        return int(hit[0])

    def point(self, i: int) -> LatticeIndex:
        return tuple(int(v) for v in self.points[i])

    def coords(self, z) -> np.ndarray:
        return self.ctx.point(z)

    @property
    def escaped(self) -> np.ndarray:
        return self.successor == ESCAPE


class Reason(str, Enum):
    ROBUST = "unique-equilibrium-global-convergence"
    NO_EQUILIBRIUM = "no-equilibrium"
    MULTIPLE = "multiple-equilibria"
    CYCLE = "nontrivial-cycle"
    ESCAPE = "orbit-escape"


@dataclass(frozen=True)
class RobustnessVerdict:
    robust: bool
    reason: Reason
    equilibrium: Optional[LatticeIndex] = None
    equilibria: tuple[LatticeIndex, ...] = ()
    cycle: tuple[LatticeIndex, ...] = ()
    escape_witness: Optional[LatticeIndex] = None

    def __post_init__(self):
        if self.robust != (self.reason is Reason.ROBUST and self.equilibrium is not None):
            raise InvariantViolation("robust flag must match reason and equilibrium")


@dataclass(frozen=True)
class Cycle:
    period: int
    members: tuple[LatticeIndex, ...]
    basin_size: int


@dataclass(frozen=True)
class CycleReport:
    cycles: tuple[Cycle, ...]
    escaped: int
    n_points: int

    @property
    def periods(self) -> list[int]:
        return [c.period for c in self.cycles]

    @property
    def has_nontrivial_cycle(self) -> bool:
        return any(c.period > 1 for c in self.cycles)


def discretize(f: MapSpec, dom: DomainSpec, ctx: GridContext, cap: int = DEFAULT_POINT_CAP) -> DiscretizedSystem:
    """Build the successor table of ``x -> [f(x)]_{h,q}`` on the domain's lattice points."""
    if f.dimension != ctx.d:
        raise ValueError(f"map dimension {f.dimension} != lattice dimension {ctx.d}")
    z = enumerate_domain(dom, ctx, cap=cap)
    fx = f(ctx.point(z)) if len(z) else np.empty((0, ctx.d))
    img = round_indices(fx, ctx.q_array, ctx.h)
    position = {tuple(row): i for i, row in enumerate(z.tolist())}
    succ = np.array([position.get(tuple(row), ESCAPE) for row in img.tolist()], dtype=np.int64)
    for arr in (z, succ, img, fx):
        arr.setflags(write=False)
    return DiscretizedSystem(ctx, z, succ, img, fx)


def near_fixed_mask(x: np.ndarray, fx: np.ndarray, h: float) -> np.ndarray:
    """Componentwise ``x - h/2 <= f(x) < x + h/2``."""
    return np.all((x - h / 2 <= fx) & (fx < x + h / 2), axis=-1)


def fixed_points(sys: DiscretizedSystem) -> list[LatticeIndex]:
    """Points whose successor is themselves.

    Cross-checked against the direct near-fixed condition on ``f``; a
    mismatch raises :class:`InvariantViolation`.
    """
    by_successor = sys.successor == np.arange(len(sys))
    direct = near_fixed_mask(sys.ctx.point(sys.points), sys.values, sys.ctx.h)
    if not np.array_equal(by_successor, direct):
        i = int(np.flatnonzero(by_successor != direct)[0])
        raise InvariantViolation(
            f"fixed-point characterizations disagree at z={sys.point(i)}: "
            f"successor says {bool(by_successor[i])}, near-fixed test says {bool(direct[i])}"
        )
    return [sys.point(i) for i in np.flatnonzero(by_successor)]


def k_of(f: MapSpec, dom: DomainSpec, ctx: GridContext) -> int:
    """Number of lattice points of the domain that satisfy the near-fixed condition."""
    z = enumerate_domain(dom, ctx)
    if len(z) == 0:
        return 0
    x = ctx.point(z)
    return int(np.count_nonzero(near_fixed_mask(x, f(x), ctx.h)))


def analyze_cycles(sys: DiscretizedSystem) -> CycleReport:
    """Decompose the functional graph into cycles with their basins.

    Iterative three-colour walk: each point is visited once, so this is
    linear in the number of points.  Orbits that leave the domain are
    counted in ``escaped``.
    """
    n = len(sys)
    succ = sys.successor
    # label[i]: -2 unvisited, -3 on the current walk, -1 escapes, >= 0 cycle id
    label = np.full(n, -2, dtype=np.int64)
    cycles: list[list[int]] = []
    for start in range(n):
        if label[start] != -2:
            continue
        path = []
        i = start
        while i != ESCAPE and label[i] == -2:
            label[i] = -3
            path.append(i)
            i = int(succ[i])
        if i == ESCAPE:
            outcome = -1
        elif label[i] == -3:
            # closed a new cycle inside the current walk
            at = path.index(i)
            outcome = len(cycles)
            cycles.append(path[at:])
        else:
            outcome = int(label[i])
        for j in path:
            label[j] = outcome
    basins = np.bincount(label[label >= 0], minlength=len(cycles))
    report = tuple(
        Cycle(len(members), tuple(sys.point(j) for j in members), int(basins[c]))
        for c, members in enumerate(cycles)
    )
    return CycleReport(report, int(np.count_nonzero(label == -1)), n)


def robustness_verdict(sys: DiscretizedSystem, cycles: Optional[CycleReport] = None) -> RobustnessVerdict:
    """Robust iff there is exactly one fixed point, no longer cycle and no escape."""
    fixed = fixed_points(sys)
    if sys.escaped.any():
        i = int(np.flatnonzero(sys.escaped)[0])
        return RobustnessVerdict(False, Reason.ESCAPE, escape_witness=sys.point(i), equilibria=tuple(fixed))
    cycles = cycles or analyze_cycles(sys)
    long_cycles = [c for c in cycles.cycles if c.period > 1]
    if long_cycles:
        return RobustnessVerdict(False, Reason.CYCLE, cycle=long_cycles[0].members, equilibria=tuple(fixed))
    if not fixed:
        return RobustnessVerdict(False, Reason.NO_EQUILIBRIUM)
    if len(fixed) > 1:
        return RobustnessVerdict(False, Reason.MULTIPLE, equilibria=tuple(fixed))
    return RobustnessVerdict(True, Reason.ROBUST, equilibrium=fixed[0], equilibria=tuple(fixed))


def tarski_iterate(sys: DiscretizedSystem, start) -> tuple[LatticeIndex, int]:
    """Iterate the successor table from an order-comparable start to a fixed point.

    Returns ``(fixed_point, steps)``.  The start must satisfy
    ``f(start) >= start`` or ``f(start) <= start`` componentwise.  With a
    monotone table the walk is order-monotone and ends within
    ``len(sys)`` steps; otherwise :class:`DivergenceError` is raised once
    ``len(sys) + 1`` steps pass.
    """
    i = sys.index_of(start)
    image = sys.images[i]
    z0 = sys.points[i]
    if not (np.all(image >= z0) or np.all(image <= z0)):
        raise PreconditionError(f"start {sys.point(i)} is not comparable with its image {tuple(image.tolist())}")
    cap = len(sys) + 1
    visited = [sys.point(i)]
    steps = 0
    while True:
        nxt = int(sys.successor[i])
        if nxt == i:
            return sys.point(i), steps
        if nxt == ESCAPE:
            raise DivergenceError(f"orbit left the domain after {steps} steps", visited)
        steps += 1
        if steps > cap:
            break
        i = nxt
        visited.append(sys.point(i))
    raise DivergenceError(f"no fixed point within {cap} steps", visited)


def proposition1_check(sys: DiscretizedSystem, verdict: RobustnessVerdict) -> ConditionVerdict:
    """Audit the structure of a robust monotone system around its equilibrium.

    Part (a): every point above the equilibrium maps onto it in one step.
    Part (b): every point below the equilibrium reaches it in finitely many
    steps.  Both parts are tallied in ``details``; a failure of either is
    returned with the offending point and its orbit as witness.
    """
    if not verdict.robust:
        raise PreconditionError("equilibrium audit needs a robust system")
    eq = np.asarray(verdict.equilibrium, dtype=np.int64)
    e = sys.index_of(eq)
    above = np.flatnonzero(np.all(sys.points >= eq, axis=1))
    below = np.flatnonzero(np.all(sys.points <= eq, axis=1))

    a_fail = [int(i) for i in above if sys.successor[i] != e]
    steps_to_eq = {}
    b_fail = []
    for i in below:
        j, steps = int(i), 0
        while j != e and j != ESCAPE and steps <= len(sys):
            j = int(sys.successor[j])
            steps += 1
        if j == e:
            steps_to_eq[int(i)] = steps
        else:
            b_fail.append(int(i))

    def orbit(i: int) -> list[list[int]]:
        out, j = [sys.point(i)], i
        while j != e and j != ESCAPE and len(out) <= len(sys):
            j = int(sys.successor[j])
            if j != ESCAPE:
                out.append(sys.point(j))
        return [list(p) for p in out]

    details = {
        "part_a": not a_fail,
        "part_b": not b_fail,
        "above": len(above),
        "below": len(below),
        "part_a_failures": len(a_fail),
        "max_steps_from_below": max(steps_to_eq.values(), default=0),
    }
    if a_fail:
        i = a_fail[0]
        return ConditionVerdict(False, {"part": "a", "z": list(sys.point(i)), "orbit": orbit(i)}, details)
    if b_fail:
        i = b_fail[0]
        return ConditionVerdict(False, {"part": "b", "z": list(sys.point(i)), "orbit": orbit(i)}, details)
    return ConditionVerdict(True, details=details)


@dataclass
class OffsetClassification:
    """Per-offset results of :func:`classify_offsets` (row ``i`` is offset ``i``)."""

    offsets: np.ndarray
    k: np.ndarray
    robust: np.ndarray
    equilibrium: np.ndarray
    escaped: np.ndarray
    nontrivial_cycle: np.ndarray
    n_points: np.ndarray = field(repr=False)


def classify_offsets(
    f: MapSpec,
    dom: DomainSpec,
    h: float,
    offsets: np.ndarray,
    max_cells: int = 1 << 20,
) -> OffsetClassification:
    """Vectorized robustness classification for many offsets at once.

    For each row ``q`` of ``offsets`` this computes the same quantities as
    ``robustness_verdict(discretize(f, dom, GridContext(h, q)))`` and
    ``k_of``: the lattice points of all offsets in a chunk are laid out on
    a padded grid, and convergence is decided by pointer doubling on the
    successor table.  ``equilibrium`` holds the lattice index of the unique
    fixed point where ``k == 1`` and ``INT64_MIN`` elsewhere.
    """
    offsets = np.asarray(offsets, dtype=float).reshape(-1, dom.d)
    n = len(offsets)
    lo, hi = axis_index_range(dom.lower_array, dom.upper_array, offsets, h)
    counts = np.maximum(hi - lo + 1, 0)
    grid_shape = tuple(int(c) for c in np.maximum(counts.max(axis=0), 1)) if n else (1,) * dom.d
    cells = math.prod(grid_shape)
    chunk = max(1, max_cells // cells)

    out = OffsetClassification(
        offsets=offsets,
        k=np.zeros(n, dtype=np.int64),
        robust=np.zeros(n, dtype=bool),
        equilibrium=np.full((n, dom.d), np.iinfo(np.int64).min, dtype=np.int64),
        escaped=np.zeros(n, dtype=bool),
        nontrivial_cycle=np.zeros(n, dtype=bool),
        n_points=np.zeros(n, dtype=np.int64),
    )
    local = np.indices(grid_shape).reshape(dom.d, -1).T  # (cells, d)
    for s in range(0, n, chunk):
        sl = slice(s, min(n, s + chunk))
        _classify_chunk(f, dom, h, offsets[sl], lo[sl], counts[sl], grid_shape, local, out, sl)
    return out


def _classify_chunk(f, dom, h, q, lo, counts, grid_shape, local, out, sl):
    b, d = q.shape
    cells = len(local)
    qb = q[:, None, :]
    z = lo[:, None, :] + local[None, :, :]
    x = qb + h * z
    valid = np.all(local[None, :, :] < counts[:, None, :], axis=-1)
    if dom.membership is not None:
        valid &= dom.contains(x)
    fx = f(x.reshape(-1, d)).reshape(b, cells, d)
    img = round_indices(fx, qb, h)
    rel = img - lo[:, None, :]
    target_ok = np.all((rel >= 0) & (rel < counts[:, None, :]), axis=-1)
    if dom.membership is not None:
        target_ok &= dom.contains(qb + h * img)
    clipped = np.clip(rel, 0, np.array(grid_shape) - 1)
    flat = np.ravel_multi_index(tuple(np.moveaxis(clipped, -1, 0)), grid_shape)
    own = np.broadcast_to(np.arange(cells), (b, cells))
    escape = valid & ~target_ok
    succ = np.where(valid & target_ok, flat, own)

    fixed = valid & (succ == own)
    direct = valid & near_fixed_mask(x, fx, h)
    # escaping points are parked on themselves and must not count as fixed
    fixed &= ~escape
    if not np.array_equal(fixed, direct):
        row, col = np.argwhere(fixed != direct)[0]
        raise InvariantViolation(
            f"fixed-point characterizations disagree at offset {q[row].tolist()}, z={z[row, col].tolist()}"
        )
    k = fixed.sum(axis=1)

    terminal = succ
    for _ in range(max(1, math.ceil(math.log2(max(cells, 2)))) + 1):
        terminal = np.take_along_axis(terminal, terminal, axis=1)
    # after >= cells steps every orbit sits on its cycle
    on_long_cycle = valid & ~escape & (np.take_along_axis(succ, terminal, axis=1) != terminal)
    any_escape = escape.any(axis=1)
    eq_pos = np.argmax(fixed, axis=1)
    converges = np.all(~valid | (terminal == eq_pos[:, None]), axis=1)

    out.k[sl] = k
    out.escaped[sl] = any_escape
    out.nontrivial_cycle[sl] = on_long_cycle.any(axis=1)
    out.robust[sl] = (k == 1) & ~any_escape & converges
    out.n_points[sl] = valid.sum(axis=1)
    unique = k == 1
    rows = np.flatnonzero(unique)
    eq = out.equilibrium[sl]
    eq[rows] = z[rows, eq_pos[rows]]
    out.equilibrium[sl] = eq
