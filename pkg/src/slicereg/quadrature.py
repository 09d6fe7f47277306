"""Composite Gauss-Legendre quadrature on intervals and piecewise paths in C.

Refinement bisects every panel, so a run is a deterministic function of the
initial breakpoints and the number of doublings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np


class QuadratureError(ArithmeticError):
    """The requested tolerance was not reached within the refinement cap."""


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_nodes(breakpoints: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(order)
    a = breakpoints[:-1, None]
    b = breakpoints[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.reshape(-1), weights.reshape(-1)


def bisect(breakpoints: np.ndarray) -> np.ndarray:
    mids = 0.5 * (breakpoints[:-1] + breakpoints[1:])
    out = np.empty(2 * len(breakpoints) - 1)
    out[0::2] = breakpoints
    out[1::2] = mids
    return out


def graded_breakpoints(start: float, stop: float, first: float, panels: int) -> np.ndarray:
    """Panels growing geometrically from ``first`` up to a uniform width (stop-start)/panels."""
    if stop <= start:
        return np.array([start, stop])
    widest = (stop - start) / max(panels, 1)
    pts = [start]
    h = min(first, widest)
    while pts[-1] + h < stop and h < widest:
        pts.append(pts[-1] + h)
        h *= 2.0
    remaining = stop - pts[-1]
    count = max(1, math.ceil(remaining / widest - 1e-12))
    pts.extend(pts[-1] + remaining * np.arange(1, count + 1) / count)
    pts[-1] = stop
    return np.array(pts)


def _magnitude(value: np.ndarray) -> float:
    return float(np.max(np.abs(value))) if value.size else 0.0


def integrate(f: Callable[[np.ndarray], np.ndarray], breakpoints: Sequence[float], tol: float = 1e-12,
              order: int = 16, max_doublings: int = 8, rtol_floor: float = 1.0) -> tuple[np.ndarray, float]:
    """Integrate a batched function f(t_array) -> (k, ...) over the breakpoint partition.

    Doubles the panel count until successive values differ by at most
    ``tol * max(rtol_floor, |value|)``.  Returns (value, error estimate).
    """
    bp = np.asarray(breakpoints, dtype=float)
    nodes, weights = panel_nodes(bp, order)
    prev = np.tensordot(weights, f(nodes), axes=(0, 0))
    for _ in range(max_doublings):
        bp = bisect(bp)
        nodes, weights = panel_nodes(bp, order)
        cur = np.tensordot(weights, f(nodes), axes=(0, 0))
        err = _magnitude(cur - prev)
        if err <= tol * max(rtol_floor, _magnitude(cur)):
            return cur, err
        prev = cur
    raise QuadratureError(f"no convergence after {max_doublings} doublings (last change {err:.3e})")


@dataclass(frozen=True)
class Segment:
    """gamma(t) for t in [breakpoints[0], breakpoints[-1]]; values are complex numbers."""

    gamma: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    breakpoints: np.ndarray


@dataclass(frozen=True)
class Path:
    segments: tuple[Segment, ...]
    tail_bound: float = 0.0


def sector_path(r: float, eta: float, length: float, vertex: float = 0.0, panels: int = 16,
                arc_panels: int = 4, tail_bound: float = 0.0) -> Path:
    """vertex + (ray in from infinity along angle -eta, arc of radius r, ray out along +eta)."""
    out_dir = complex(math.cos(eta), math.sin(eta))
    in_dir = out_dir.conjugate()
    first = min(0.5, r)
    ray_bp = graded_breakpoints(r, length, first, panels)
    incoming = Segment(
        gamma=lambda t: vertex - t * in_dir,
        derivative=lambda t: np.full(t.shape, -in_dir, dtype=complex),
        breakpoints=-ray_bp[::-1],
    )
    arc = Segment(
        gamma=lambda t: vertex + r * np.exp(1j * t),
        derivative=lambda t: 1j * r * np.exp(1j * t),
        breakpoints=np.linspace(-eta, eta, arc_panels + 1),
    )
    outgoing = Segment(
        gamma=lambda t: vertex + t * out_dir,
        derivative=lambda t: np.full(t.shape, out_dir, dtype=complex),
        breakpoints=ray_bp,
    )
    return Path((incoming, arc, outgoing), tail_bound)


def circle_path(center: complex, radius: float, panels: int = 8) -> Path:
    return Path((Segment(
        gamma=lambda t: center + radius * np.exp(1j * t),
        derivative=lambda t: 1j * radius * np.exp(1j * t),
        breakpoints=np.linspace(0.0, 2.0 * math.pi, panels + 1),
    ),))


def path_integral(h: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray], path: Path,
                  tol: float = 1e-12, order: int = 16, max_doublings: int = 8) -> tuple[np.ndarray, float]:
    """Sum over segments of the integral of h along gamma, refined jointly.

    ``h(points, derivatives, weights)`` receives a batch of complex nodes,
    gamma' at those nodes and the quadrature weights, and returns the
    weighted sum of its integrand over the batch.
    """
    bps = [seg.breakpoints for seg in path.segments]

    def total(bps_now):
        acc = None
        for seg, bp in zip(path.segments, bps_now):
            nodes, weights = panel_nodes(bp, order)
            part = h(seg.gamma(nodes), seg.derivative(nodes), weights)
            acc = part if acc is None else acc + part
        return acc

    prev = total(bps)
    err = math.inf
    for _ in range(max_doublings):
        bps = [bisect(bp) for bp in bps]
        cur = total(bps)
        err = _magnitude(cur - prev)
        if err <= tol * max(1.0, _magnitude(cur)):
            return cur, err + path.tail_bound
        prev = cur
    raise QuadratureError(f"path integral did not converge (last change {err:.3e})")
