"""Lattice grids, roundoff operators and domain enumeration.

Lattice points are carried as integer index vectors ``z``; the real point
they denote under a :class:`GridContext` is ``q + h * z``.  All equality
tests between lattice points happen on ``z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import ResourceError

LatticeIndex = tuple[int, ...]
Membership = Callable[[np.ndarray], np.ndarray]

DEFAULT_POINT_CAP = 10**7
_EXACT_MULTIPLE_RTOL = 2.0**-40


def _finite_vector(x, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components: {arr}")
    return arr


@dataclass(frozen=True)
class GridContext:
    """Spacing ``h`` and offset ``q`` fixing the lattice ``{q + h z}``.

    ``q`` must lie in the offset cube ``(-h/2, h/2]^d``.  Use
    :meth:`from_offset` to reduce an arbitrary offset into that cube.
    """

    h: float
    q: tuple[float, ...]

    def __post_init__(self):
        h = float(self.h)
        if not math.isfinite(h) or h <= 0:
            raise ValueError(f"lattice spacing must be positive and finite, got {self.h}")
        q = tuple(float(v) for v in _finite_vector(self.q, "offset q"))
        if len(q) < 1:
            raise ValueError("offset q must have at least one component")
        for qi in q:
            if not (-h / 2 < qi <= h / 2):
                raise ValueError(f"offset component {qi} outside (-h/2, h/2] for h={h}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_offset(cls, h: float, q) -> "GridContext":
        """Build the context of the lattice ``q + h Z^d`` for any real ``q``."""
        q = _finite_vector(q, "offset q")
        h = float(h)
        if not math.isfinite(h) or h <= 0:
            raise ValueError(f"lattice spacing must be positive and finite, got {h}")
        return cls(h, tuple(reduce_offset(q, h)))

    @classmethod
    def origin(cls, h: float, d: int) -> "GridContext":
        return cls(h, (0.0,) * d)

    @property
    def d(self) -> int:
        return len(self.q)

    @property
    def q_array(self) -> np.ndarray:
        return np.asarray(self.q, dtype=float)

    def point(self, z) -> np.ndarray:
        """Real coordinates of lattice index (or index array) ``z``."""
        return self.q_array + self.h * np.asarray(z, dtype=float)


def reduce_offset(q, h: float) -> np.ndarray:
    """Representative of ``q`` modulo ``h`` inside ``(-h/2, h/2]``."""
    q = np.asarray(q, dtype=float)
    shift = np.ceil(q / h - 0.5)
    out = q - h * shift
    # guard the half-open ends against rounding in the subtraction
    out = np.where(out <= -h / 2, out + h, out)
    out = np.where(out > h / 2, out - h, out)
    return out


@dataclass(frozen=True)
class DomainSpec:
    """Compact domain: a closed box, optionally cut down by a membership test.

    ``membership`` receives an ``(n, d)`` array and returns ``n`` booleans.
    ``predicate_name`` records which registry predicate built it, if any.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    membership: Optional[Membership] = field(default=None, compare=False)
    predicate_name: Optional[str] = None

    def __post_init__(self):
        lo = _finite_vector(self.lower, "lower")
        hi = _finite_vector(self.upper, "upper")
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same length")
        if np.any(lo > hi):
            raise ValueError(f"lower {lo} exceeds upper {hi}")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))

    @classmethod
    def box(cls, lower, upper) -> "DomainSpec":
        return cls(tuple(np.atleast_1d(lower)), tuple(np.atleast_1d(upper)))

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def is_box(self) -> bool:
        return self.membership is None

    @property
    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    @property
    def box_volume(self) -> float:
        return float(np.prod(self.upper_array - self.lower_array))

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Vectorized membership of points ``x`` with shape ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lower_array) & (x <= self.upper_array), axis=-1)
        if self.membership is not None:
            flat = x.reshape(-1, self.d)
            inside = inside & np.asarray(self.membership(flat), dtype=bool).reshape(inside.shape)
        return inside


@dataclass(frozen=True)
class ExtentReport:
    l: tuple[float, ...]
    L_per_axis: tuple[int, ...]
    L: int


@dataclass(frozen=True)
class OrderBounds:
    """Least and greatest members of a lattice point set, when they exist.

    When the set has no least (or greatest) member, ``lower``/``upper`` is
    None and ``witness`` names the componentwise extreme corner that is
    missing from the set, e.g. ``("max", (1, 1))``.
    """

    lower: Optional[LatticeIndex]
    upper: Optional[LatticeIndex]
    witness: Optional[tuple[str, LatticeIndex]] = None

    @property
    def exists(self) -> bool:
        return self.lower is not None and self.upper is not None

    def pair(self) -> Optional[tuple[LatticeIndex, LatticeIndex]]:
        return (self.lower, self.upper) if self.exists else None


def scalar_round(y: float, h: float) -> float:
    """Scalar roundoff ``[y]_h``: ``k h`` with ``(k - 1/2) h <= y < (k + 1/2) h``."""
    if not math.isfinite(y):
        raise ValueError(f"cannot round non-finite value {y}")
    if not math.isfinite(h) or h <= 0:
        raise ValueError(f"rounding step must be positive and finite, got {h}")
    return math.floor(y / h + 0.5) * h


def round_indices(x: np.ndarray, q: np.ndarray, h: float) -> np.ndarray:
    """Vectorized lattice index of ``[x]_{h,q}``; broadcasts ``x`` against ``q``."""
    return np.floor((x - q) / h + 0.5).astype(np.int64)


def round_to_lattice(x, ctx: GridContext) -> LatticeIndex:
    x = _finite_vector(x, "point")
    if x.shape[0] != ctx.d:
        raise ValueError(f"point has dimension {x.shape[0]}, lattice has {ctx.d}")
    return tuple(int(k) for k in round_indices(x, ctx.q_array, ctx.h))


def axis_index_range(lower, upper, q, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive integer range of ``z`` with ``lower <= q + h z <= upper``.

    Vectorized over any broadcastable ``lower``, ``upper`` and ``q``.  The
    float estimate from ``ceil``/``floor`` is corrected against the exact
    inclusion test so enumeration agrees with ``q + h z`` as evaluated.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    q = np.asarray(q, dtype=float)
    lo = np.ceil((lower - q) / h).astype(np.int64)
    hi = np.floor((upper - q) / h).astype(np.int64)
    for _ in range(2):
        lo = np.where(q + h * (lo - 1) >= lower, lo - 1, lo)
        lo = np.where(q + h * lo < lower, lo + 1, lo)
        hi = np.where(q + h * (hi + 1) <= upper, hi + 1, hi)
        hi = np.where(q + h * hi > upper, hi - 1, hi)
    return lo, hi


def enumerate_domain(dom: DomainSpec, ctx: GridContext, cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    """All ``z`` with ``q + h z`` in the domain, as an ``(n, d)`` int array in lexicographic order."""
    if dom.d != ctx.d:
        raise ValueError(f"domain dimension {dom.d} != lattice dimension {ctx.d}")
    lo, hi = axis_index_range(dom.lower_array, dom.upper_array, ctx.q_array, ctx.h)
    counts = np.maximum(hi - lo + 1, 0)
    total = math.prod(int(c) for c in counts)
    if total > cap:
        raise ResourceError(f"domain holds {total} lattice points, cap is {cap}")
    if total == 0:
        return np.empty((0, ctx.d), dtype=np.int64)
    grid = np.indices(tuple(int(c) for c in counts)).reshape(ctx.d, -1).T
    z = grid + lo
    if dom.membership is not None:
        z = z[dom.contains(ctx.point(z))]
    return np.ascontiguousarray(z, dtype=np.int64)


def order_bounds(points: Sequence[LatticeIndex] | np.ndarray) -> OrderBounds:
    """Members ``u1 <= z <= u2`` (componentwise) for all listed ``z``, if any."""
    z = np.asarray(points, dtype=np.int64)
    if z.size == 0:
        raise ValueError("order_bounds needs at least one point")
    z = z.reshape(len(z), -1)
    corner_lo = z.min(axis=0)
    corner_hi = z.max(axis=0)
    has_lo = bool(np.any(np.all(z == corner_lo, axis=1)))
    has_hi = bool(np.any(np.all(z == corner_hi, axis=1)))
    lo_t = tuple(int(v) for v in corner_lo)
    hi_t = tuple(int(v) for v in corner_hi)
    witness = None
    if not has_hi:
        witness = ("max", hi_t)
    elif not has_lo:
        witness = ("min", lo_t)
    return OrderBounds(lo_t if has_lo else None, hi_t if has_hi else None, witness)


def axis_capacity(length: float, h: float) -> int:
    """``r + 1`` where ``length = r h + p`` with ``0 <= p < h``.

    Ratios within 2**-40 (relative) of an integer count as exact multiples.
    """
    ratio = length / h
    m = round(ratio)
    if abs(ratio - m) <= _EXACT_MULTIPLE_RTOL * max(m, 1):
        return int(m) + 1
    return int(math.floor(ratio)) + 1


def compute_extent(dom: DomainSpec, ctx: GridContext | float) -> ExtentReport:
    """Per-axis extents and lattice capacities of the domain's bounding box."""
    h = ctx.h if isinstance(ctx, GridContext) else float(ctx)
    l = dom.upper_array - dom.lower_array
    per_axis = tuple(axis_capacity(float(li), h) for li in l)
    return ExtentReport(tuple(float(v) for v in l), per_axis, math.prod(per_axis))
