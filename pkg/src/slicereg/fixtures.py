"""Named operators and seeded random operator families used by the suite, the CLI and the tests."""

from __future__ import annotations

import json
import math
from importlib import resources

import numpy as np

from .algebra import AlgebraSignature, Multivector, phi, quaternion, sample_imaginary_sphere, signature
from .operators import RightLinearOperator, operator_from_json, spherical_spectrum


def ij_swap() -> RightLinearOperator:
    """[[0, i], [j, 0]] on H^2; its spherical spectrum is the two circles +-1/sqrt2 + S/sqrt2."""
    zero = quaternion()
    return RightLinearOperator.from_elements([[zero, quaternion(0, 1, 0, 0)],
                                              [quaternion(0, 0, 1, 0), zero]])


def nilpotent_shift(sig: AlgebraSignature | int = 2, m: int = 2) -> RightLinearOperator:
    """Upper shift: x^2 = 0 for m = 2."""
    sig = signature(sig) if isinstance(sig, int) else sig
    entries = np.zeros((m, m, sig.dim))
    for u in range(m - 1):
        entries[u, u + 1, 0] = 1.0
    return RightLinearOperator(sig, entries)


def random_operator(rng: np.random.Generator, n: int = 2, m: int = 3, scale: float = 0.5) -> RightLinearOperator:
    """Entries with iid normal coefficients, so quaternionic entries generically do not commute."""
    sig = signature(n)
    return RightLinearOperator(sig, rng.normal(size=(m, m, sig.dim)) * scale)


def spectral_abscissa(a: RightLinearOperator) -> float:
    return max(r for r, _ in spherical_spectrum(a))


def random_stable_operator(rng: np.random.Generator, n: int = 2, m: int = 3, scale: float = 0.5,
                           margin: float = 1.0) -> RightLinearOperator:
    """Random operator shifted so that its spectral abscissa equals -margin."""
    a = random_operator(rng, n, m, scale)
    return a.shift(spectral_abscissa(a) + margin)


def random_sectorial_operator(rng: np.random.Generator, n: int = 2, m: int = 3, scale: float = 0.5,
                              half_angle: float = math.pi / 4) -> RightLinearOperator:
    """Random stable operator whose spectral circles lie in -(sector of the given half opening).

    Obtained by shifting left until every circle r + s S has s <= tan(half_angle) |r|.
    """
    a = random_operator(rng, n, m, scale)
    spec = spherical_spectrum(a)
    slope = math.tan(half_angle)
    shift = max(r + s / slope for r, s in spec) + 0.5 * scale
    return a.shift(shift)


def cone_sample(rng: np.random.Generator, sig: AlgebraSignature, axis: Multivector | None,
                re: tuple[float, float], im: tuple[float, float]) -> Multivector:
    axis = axis if axis is not None else sample_imaginary_sphere(sig, rng, 1)[0]
    return phi(sig, axis, complex(rng.uniform(*re), rng.uniform(*im)))


def load_bundled() -> dict:
    """Operators bundled with the package, keyed by name."""
    text = resources.files("slicereg").joinpath("fixtures/operators.json").read_text()
    data = json.loads(text)
    return {name: operator_from_json(spec) for name, spec in data["operators"].items()}


def named_operator(name: str) -> RightLinearOperator:
    if name == "ij_swap":
        return ij_swap()
    if name == "nilpotent":
        return nilpotent_shift()
    bundled = load_bundled()
    if name not in bundled:
        raise KeyError(f"unknown operator {name!r}; known: ij_swap, nilpotent, {', '.join(sorted(bundled))}")
    return bundled[name]
