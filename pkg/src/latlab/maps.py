"""Maps on R^d, the built-in families, and checkers for the hypotheses the
measure bounds rely on (monotonicity, self-mapping, boundary margin)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from .exceptions import ConfigError
from .lattice import DomainSpec, GridContext, enumerate_domain, round_indices


@dataclass(frozen=True)
class MapSpec:
    """A deterministic map ``f: R^d -> R^d``.

    ``evaluate`` must accept an array of shape ``(n, d)`` and return the
    images with the same shape.  ``declared_monotone`` is a claim; verify it
    with :func:`check_monotone`.
    """

    dimension: int
    evaluate: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    declared_monotone: bool = False
    name: str = "custom"
    params: tuple[float, ...] = ()

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        flat = x.reshape(-1, self.dimension)
        out = np.asarray(self.evaluate(flat), dtype=float).reshape(flat.shape)
        return out[0] if single else out.reshape(x.shape)


@dataclass(frozen=True)
class ConditionVerdict:
    satisfied: bool
    witness: Optional[dict[str, Any]] = None
    details: Mapping[str, Any] = field(default_factory=dict)
    proved: bool = True

    def __post_init__(self):
        if not self.satisfied and self.witness is None:
            raise ValueError("a failed verdict must carry a witness")

    @property
    def status(self) -> str:
        if not self.satisfied:
            return "falsified"
        return "satisfied" if self.proved else "not falsified"

    def to_dict(self) -> dict[str, Any]:
        return {
            "satisfied": self.satisfied,
            "status": self.status,
            "witness": _jsonable(self.witness),
            "details": _jsonable(dict(self.details)),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


FAMILIES = ("affine", "scalar-linear", "sigmoid", "negated-linear", "shift")


def _split_dim(params: Sequence[float], n_fixed: int, dimension: Optional[int], family: str) -> int:
    if len(params) == n_fixed:
        return dimension or 1
    if len(params) == n_fixed + 1:
        d = params[-1]
        if d != int(d) or d < 1:
            raise ConfigError(f"{family}: dimension must be a positive integer, got {d}")
        if dimension is not None and dimension != int(d):
            raise ConfigError(f"{family}: dimension {dimension} conflicts with parameter {int(d)}")
        return int(d)
    raise ConfigError(f"{family}: expected {n_fixed} or {n_fixed + 1} parameters, got {len(params)}")


def affine_map(A, b=None, name: str = "affine") -> MapSpec:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[0]
    if A.shape != (d, d):
        raise ConfigError(f"affine: matrix must be square, got shape {A.shape}")
    b = np.zeros(d) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (d,):
        raise ConfigError(f"affine: offset must have length {d}")
    A.setflags(write=False)
    b.setflags(write=False)
    return MapSpec(
        dimension=d,
        evaluate=lambda x: x @ A.T + b,
        declared_monotone=bool(np.all(A >= 0)),
        name=name,
        params=tuple(A.ravel()) + tuple(b),
    )


def builtin_map(family: str, params: Sequence[float], dimension: Optional[int] = None) -> MapSpec:
    """Construct a built-in map from a family name and a flat parameter list.

    ====================  ==========================  =======================
    family                params                      map
    ====================  ==========================  =======================
    ``affine``            A (d*d, row-major), b (d)   ``A x + b``
    ``scalar-linear``     a [, d]                     ``a x``
    ``sigmoid``           amplitude, slope [, d]      ``amp * tanh(slope x)``
    ``negated-linear``    c [, d]                     ``c - x``
    ``shift``             c [, d]                     ``x + c``
    ====================  ==========================  =======================
    """
    try:
        params = [float(p) for p in params]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{family}: parameters must be numbers") from exc
    if not np.all(np.isfinite(params)):
        raise ConfigError(f"{family}: parameters must be finite")

    if family == "affine":
        n = len(params)
        d = int(round((-1 + np.sqrt(1 + 4 * n)) / 2))
        if d < 1 or d * d + d != n:
            raise ConfigError(f"affine: need d*d + d parameters, got {n}")
        if dimension is not None and dimension != d:
            raise ConfigError(f"affine: parameters describe dimension {d}, not {dimension}")
        A = np.reshape(params[: d * d], (d, d))
        return affine_map(A, params[d * d :])

    if family == "scalar-linear":
        d = _split_dim(params, 1, dimension, family)
        a = params[0]
        return MapSpec(d, lambda x: a * x, a >= 0, family, (a,))

    if family == "sigmoid":
        d = _split_dim(params, 2, dimension, family)
        amp, slope = params[:2]
        return MapSpec(d, lambda x: amp * np.tanh(slope * x), amp * slope >= 0, family, (amp, slope))

    if family == "negated-linear":
        d = _split_dim(params, 1, dimension, family)
        c = params[0]
        return MapSpec(d, lambda x: c - x, False, family, (c,))

    if family == "shift":
        d = _split_dim(params, 1, dimension, family)
        c = params[0]
        return MapSpec(d, lambda x: x + c, False, family, (c,))

    raise ConfigError(f"unknown map family {family!r}; known: {', '.join(FAMILIES)}")


def orthant_conjugate(f: MapSpec, signs: Sequence[int]) -> MapSpec:
    """Conjugate ``f`` by the per-axis reflection ``S = diag(signs)``.

    ``x -> S f(S x)`` is monotone increasing exactly when ``f`` preserves
    the orthant order selected by ``signs``; this is how maps that are
    decreasing along some axes are fed to the increasing-case machinery.
    Pair it with :func:`reflect_domain` and an offset of ``S q``.
    """
    s = np.asarray(signs, dtype=float)
    if s.shape != (f.dimension,) or not np.all(np.abs(s) == 1):
        raise ConfigError("signs must be a +1/-1 vector matching the map dimension")
    inner = f.evaluate
    return MapSpec(
        f.dimension,
        lambda x: s * inner(s * x),
        False,
        f"conjugate({f.name})",
        f.params,
    )


def reflect_domain(dom: DomainSpec, signs: Sequence[int]) -> DomainSpec:
    s = np.asarray(signs, dtype=float)
    a, b = s * dom.lower_array, s * dom.upper_array
    member = None
    if dom.membership is not None:
        inner = dom.membership
        member = lambda x: inner(s * x)  # noqa: E731
    return DomainSpec(tuple(np.minimum(a, b)), tuple(np.maximum(a, b)), member, dom.predicate_name)


def affine_image_box(A, b, lower, upper) -> tuple[np.ndarray, np.ndarray]:
    """Exact bounding box of ``A [lower, upper] + b`` via interval arithmetic."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    mid = (lower + upper) / 2
    rad = (upper - lower) / 2
    center = A @ mid + np.asarray(b, dtype=float)
    spread = np.abs(A) @ rad
    return center - spread, center + spread


def check_monotone(f: MapSpec, points) -> ConditionVerdict:
    """Check ``f(x) <= f(y)`` for every comparable pair ``x <= y`` of ``points``."""
    x = np.asarray(points, dtype=float).reshape(-1, f.dimension)
    fx = f(x)
    n = len(x)
    chunk = max(1, 2_000_000 // max(n * f.dimension, 1))
    for start in range(0, n, chunk):
        xs, fs = x[start : start + chunk], fx[start : start + chunk]
        # le[i, j]: xs[i] <= x[j]
        le = np.all(xs[:, None, :] <= x[None, :, :], axis=-1)
        bad = le & ~np.all(fs[:, None, :] <= fx[None, :, :], axis=-1)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            i += start
            return ConditionVerdict(
                False,
                {"x": x[i].tolist(), "y": x[j].tolist(), "f_x": fx[i].tolist(), "f_y": fx[j].tolist()},
                {"pairs_checked": int(n * n)},
            )
    return ConditionVerdict(True, details={"points": n})


def check_self_mapping(f: MapSpec, dom: DomainSpec, ctx: GridContext) -> ConditionVerdict:
    """Check that the rounded image of every lattice point of the domain stays in it."""
    z = enumerate_domain(dom, ctx)
    x = ctx.point(z)
    fx = f(x)
    img = round_indices(fx, ctx.q_array, ctx.h)
    inside = dom.contains(ctx.point(img))
    if not inside.all():
        i = int(np.argmin(inside))
        return ConditionVerdict(
            False,
            {"z": z[i].tolist(), "x": x[i].tolist(), "f_x": fx[i].tolist(), "image_z": img[i].tolist()},
            {"points": len(z)},
        )
    return ConditionVerdict(True, details={"points": len(z)})


def check_margin(f: MapSpec, dom: DomainSpec, h: float, n_samples: int = 10_000, seed: int = 0) -> ConditionVerdict:
    """Sampled check that ``f(Omega)`` keeps a distance ``h/2`` from the box boundary.

    A pass is reported as "not falsified": it is evidence, not a proof.
    """
    if not dom.is_box:
        raise ConfigError("margin check is only defined for box domains")
    lo, hi = dom.lower_array, dom.upper_array
    if np.any(hi - lo < h):
        raise ConfigError(f"box is thinner than h={h} on some axis; no margin of h/2 is possible")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6D617267]))
    # box corners are included: extremes of monotone and affine maps sit there
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(dom.d, -1).T
    x = np.vstack([corners, lo + (hi - lo) * rng.random((n_samples, dom.d))])
    fx = f(x)
    ok = np.all((fx >= lo + h / 2) & (fx <= hi - h / 2), axis=1)
    if not ok.all():
        i = int(np.argmin(ok))
        return ConditionVerdict(
            False,
            {"x": x[i].tolist(), "f_x": fx[i].tolist(), "allowed_lower": (lo + h / 2).tolist(),
             "allowed_upper": (hi - h / 2).tolist()},
            {"samples": len(x)},
        )
    return ConditionVerdict(True, details={"samples": len(x)}, proved=False)
