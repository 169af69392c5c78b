"""Counter-based uniform streams.

Sample ``i`` of a stream keyed by ``(seed, stream)`` consumes 64-bit words
``[i*d, (i+1)*d)`` of a Philox4x64 sequence, so any contiguous block of
samples can be generated on its own.  Chunking across workers never changes
the values drawn.
"""
from __future__ import annotations

import os

import numpy as np

from .exceptions import ConfigError

OFFSET_STREAM = 0
DOMAIN_STREAM = 1

_WORDS_PER_COUNTER = 4


def uniform_block(seed: int, stream: int, start: int, stop: int, d: int) -> np.ndarray:
    """Uniforms in ``[0, 1)`` for samples ``start..stop-1``, shape ``(stop - start, d)``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    bitgen = np.random.Philox(key=[seed, stream])
    first_word = start * d
    bitgen.advance(first_word // _WORDS_PER_COUNTER)
    gen = np.random.Generator(bitgen)
    skip = first_word % _WORDS_PER_COUNTER
    if skip:
        gen.random(skip)
    return gen.random((stop - start) * d).reshape(stop - start, d)


def resolve_workers(n_jobs: int | None) -> int:
    """Worker count: explicit ``n_jobs``, else ``LATLAB_THREADS`` (0 = auto)."""
    if n_jobs is None:
        raw = os.environ.get("LATLAB_THREADS", "0")
        try:
            n_jobs = int(raw)
        except ValueError:
            raise ConfigError(f"LATLAB_THREADS must be an integer, got {raw!r}") from None
    if n_jobs < 0:
        raise ConfigError(f"worker count must be non-negative, got {n_jobs}")
    return n_jobs or (os.cpu_count() or 1)
