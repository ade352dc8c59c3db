"""Deterministic seed derivation and a portable Gaussian stream.

Seeds for sub-tasks (split strata, ablation cells, per-tree randomness) are
derived by hashing a canonical string of the master seed plus a context key,
so tasks can run in any order, or in parallel, without changing results.

Synthetic embedding noise uses a counter-mode SHA-256 stream feeding the
Box-Muller transform.  The scheme is fixed here, start to finish, so the
same (seed, key) always yields the same vector on any platform and any
library version:

  block_i  = SHA-256(key_string || ":" || i)          (32 bytes)
  u        = (first 8 bytes of block, big-endian, as uint64) / 2^64
             taken from consecutive 8-byte words of consecutive blocks
  z0, z1   = sqrt(-2 ln u1) * (cos, sin)(2 pi u2)     per uniform pair

u1 is nudged away from zero by replacing 0 with 2^-64.
"""

from __future__ import annotations

import hashlib
import math
from typing import Iterator

MASK64 = (1 << 64) - 1


def derive_seed(*parts: object) -> int:
    """Collapse (master seed, context...) into a stable 64-bit seed."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & MASK64


def _uniform_stream(key: str) -> Iterator[float]:
    counter = 0
    while True:
        block = hashlib.sha256(f"{key}:{counter}".encode("utf-8")).digest()
        for off in range(0, 32, 8):
            word = int.from_bytes(block[off:off + 8], "big")
            yield word / 2.0**64
        counter += 1


def gaussian_stream(*key_parts: object):
    """Iterator of standard normal deviates keyed by the given parts."""
    key = "\x1f".join(str(p) for p in key_parts)
    uniforms = _uniform_stream(key)
    while True:
        u1 = next(uniforms) or 2.0**-64
        u2 = next(uniforms)
        r = math.sqrt(-2.0 * math.log(u1))
        yield r * math.cos(2.0 * math.pi * u2)
        yield r * math.sin(2.0 * math.pi * u2)


def gaussian_vector(dim: int, *key_parts: object) -> list[float]:
    """First `dim` deviates of the stream keyed by the given parts."""
    stream = gaussian_stream(*key_parts)
    return [next(stream) for _ in range(dim)]
