"""Map/domain instances shared by the measure and acceptance tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from latlab import DomainSpec, GridContext, MapSpec, affine_map, builtin_map


@dataclass(frozen=True)
class Instance:
    label: str
    f: MapSpec
    dom: DomainSpec
    h: float


def quarter():
    return Instance("x/4 on [-2,2], h=1", builtin_map("scalar-linear", [0.25]), DomainSpec.box([-2], [2]), 1.0)


def corpus() -> list[Instance]:
    box2 = DomainSpec.box([-2, -2], [2, 2])
    return [
        quarter(),
        Instance("x/2 on [-1,1], h=1/2", builtin_map("scalar-linear", [0.5]), DomainSpec.box([-1], [1]), 0.5),
        Instance("x+10 on [-2,2], h=1", builtin_map("shift", [10.0]), DomainSpec.box([-2], [2]), 1.0),
        Instance("A1 on [-2,2]^2, h=1", affine_map([[0.25, 0.125], [0.0, 0.25]]), box2, 1.0),
        Instance("A2 on [-2,2]^2, h=1", affine_map([[0.5, 0.0], [0.25, 0.25]], [0.125, -0.25]), box2, 1.0),
        Instance("A3 on [-1,1]^2, h=1/2", affine_map([[0.3, 0.2], [0.1, 0.4]], [0.25, 0.0]),
                 DomainSpec.box([-1, -1], [1, 1]), 0.5),
    ]


def dyadic_offset(rng, h, d):
    m = rng.integers(-31, 33, size=d)  # m/64 in (-1/2, 1/2]
    return tuple(h * m / 64.0)


def _margin_offset(rng, row_abs, R, h):
    room = R - h / 2 - row_abs * R
    return rng.uniform(-0.9, 0.9, size=len(row_abs)) * np.maximum(room, 0)


def random_monotone_system(rng):
    """Nonnegative affine map with row sums < 0.72 on ``[-2, 2]^d`` plus a dyadic lattice.

    Row sums bound the spectral radius, so it stays below 3/4, and the offset
    ``b`` is drawn small enough that the image keeps an ``h/2`` margin.
    """
    d = int(rng.integers(1, 3))
    h = float(rng.choice([1.0, 0.5, 0.25]))
    R = 2.0
    A = rng.uniform(0, 1, size=(d, d)) * (rng.uniform(size=(d, d)) < 0.8)
    scale = rng.uniform(0.05, 0.72)
    A = A / max(A.sum(axis=1).max(), 1e-12) * scale
    b = _margin_offset(rng, A.sum(axis=1), R, h)
    dom = DomainSpec.box([-R] * d, [R] * d)
    return affine_map(A, b), dom, GridContext(h, dyadic_offset(rng, h, d))


def random_nonmonotone_system(rng):
    """Affine map with at least one negative entry, same margin construction."""
    d = int(rng.integers(1, 3))
    h = float(rng.choice([1.0, 0.5, 0.25]))
    R = 2.0
    A = rng.uniform(-1, 1, size=(d, d))
    if np.all(A >= 0):
        A[0, 0] = -A[0, 0] - 0.1
    scale = rng.uniform(0.05, 0.72)
    A = A / np.abs(A).sum(axis=1).max() * scale
    b = _margin_offset(rng, np.abs(A).sum(axis=1), R, h)
    dom = DomainSpec.box([-R] * d, [R] * d)
    return affine_map(A, b), dom, GridContext(h, dyadic_offset(rng, h, d))
