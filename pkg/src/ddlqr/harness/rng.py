"""Counter-based Gaussian sampling for reproducible experiment data.

Each matrix draw gets its own stream id, and each column its own counter
block, so changing the number of columns never shifts earlier columns:
the first 30 columns of a 120-column draw equal the 30-column draw.
Gaussians come from Box-Muller on the raw uniform stream; that choice is
part of the format, so a port in another language can match draws by
reimplementing the same two steps over the same counters.
"""

from __future__ import annotations

import numpy as np

__all__ = ["STREAM_STATE", "STREAM_INPUT", "STREAM_NOISE", "column_normals", "normal_matrix"]

STREAM_STATE = 0
STREAM_INPUT = 1
STREAM_NOISE = 2

# Arbitrary fixed key half; the other half is the user seed.
_KEY_CONST = np.uint64(0x9E3779B97F4A7C15)


def _uniforms(seed: int, stream: int, column: int, count: int) -> np.ndarray:
    key = np.array([np.uint64(seed), _KEY_CONST], dtype=np.uint64)
    counter = np.array([0, 0, column, stream], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(counter=counter, key=key))
    return gen.random(count)


def column_normals(seed: int, stream: int, column: int, count: int) -> np.ndarray:
    """Standard normal draws for one (stream, column) pair."""
    if count < 0:
        raise ValueError("count must be non-negative")
    npairs = (count + 1) // 2
    u = _uniforms(seed, stream, column, 2 * npairs)
    u1 = 1.0 - u[:npairs]  # maps [0, 1) onto (0, 1], keeps log finite
    u2 = u[npairs:]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * npairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:count]


def normal_matrix(seed: int, stream: int, rows: int, cols: int, std: float = 1.0) -> np.ndarray:
    """rows x cols matrix with independent N(0, std^2) entries, drawn
    column by column so the result is prefix-stable in cols."""
    if std < 0:
        raise ValueError("std must be non-negative")
    out = np.empty((rows, cols))
    for c in range(cols):
        out[:, c] = column_normals(seed, stream, c, rows)
    return std * out
