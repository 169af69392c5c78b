"""Named membership predicates for non-box domains.

Each predicate is defined relative to the bounding box it is attached to,
so a config only needs the box and a name.
"""
from __future__ import annotations

import numpy as np

from .exceptions import ConfigError
from .lattice import DomainSpec


def _simplex(lower, upper):
    width = upper - lower

    def member(x):
        return np.sum((x - lower) / width, axis=-1) <= 1.0

    return member


def _ball(lower, upper):
    center = (lower + upper) / 2
    half = (upper - lower) / 2

    def member(x):
        return np.sum(((x - center) / half) ** 2, axis=-1) <= 1.0

    return member


def _l_shape(lower, upper):
    # box minus its upper orthant corner: some coordinate at or below the midpoint
    mid = (lower + upper) / 2

    def member(x):
        return np.any(x <= mid, axis=-1)

    return member


PREDICATES = {
    "simplex": _simplex,
    "ball": _ball,
    "L-shape": _l_shape,
}


def make_domain(lower, upper, predicate: str | None = None) -> DomainSpec:
    """Box domain, optionally restricted by a registry predicate."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    try:
        box = DomainSpec(tuple(lower), tuple(upper))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if predicate is None:
        return box
    if predicate not in PREDICATES:
        raise ConfigError(f"unknown domain predicate {predicate!r}; known: {sorted(PREDICATES)}")
    if np.any(upper <= lower):
        raise ConfigError("predicate domains need a box with positive extent on every axis")
    member = PREDICATES[predicate](lower, upper)
    return DomainSpec(box.lower, box.upper, membership=member, predicate_name=predicate)
