"""Matrix exponential by Taylor series with scaling and squaring, and Richardson extrapolation."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

_TAYLOR_DEGREE = 18
_SCALED_NORM = 0.5


def taylor_expm(matrix: np.ndarray) -> np.ndarray:
    """exp of a real or complex square matrix, or of a stack of them (..., N, N)."""
    matrix = np.asarray(matrix)
    size = matrix.shape[-1]
    norm = float(np.max(np.abs(matrix).sum(axis=-2))) if matrix.size else 0.0
    squarings = max(0, math.ceil(math.log2(norm / _SCALED_NORM))) if norm > _SCALED_NORM else 0
    scaled = matrix / float(2 ** squarings)
    eye = np.broadcast_to(np.eye(size, dtype=matrix.dtype), matrix.shape)
    acc = eye.copy()
    for k in range(_TAYLOR_DEGREE, 0, -1):
        acc = eye + (scaled @ acc) / k
    for _ in range(squarings):
        acc = acc @ acc
    return acc


def extrapolate_to_zero(steps: Sequence[float], values: Sequence[np.ndarray]) -> tuple[np.ndarray, float]:
    """Neville polynomial extrapolation of values(h) to h = 0.

    Returns the extrapolated value and the size of the last correction as an
    error estimate.
    """
    h = [float(x) for x in steps]
    if len(h) < 2:
        raise ValueError("extrapolation needs at least two steps")
    if any(b >= a for a, b in zip(h, h[1:])) or h[-1] <= 0:
        raise ValueError("steps must be positive and strictly decreasing")
    table = [np.asarray(v, dtype=np.result_type(*[np.asarray(x) for x in values])) for v in values]
    err = math.inf
    for level in range(1, len(h)):
        new = []
        for i in range(len(table) - 1):
            hi, hj = h[i], h[i + level]
            new.append((hi * table[i + 1] - hj * table[i]) / (hi - hj))
        err = float(np.max(np.abs(new[-1] - table[-1])))
        table = new
    return table[0], err
