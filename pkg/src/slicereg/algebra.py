"""Clifford algebras R_n of signature (0, n) with dense coefficient storage.

Basis blades e_K are indexed by bitmasks: bit ``k-1`` set means generator
``e_k`` belongs to K.  Every generator squares to -1 and distinct generators
anticommute.  The quaternions are R_2 with i = e1, j = e2, k = e12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_GENERATORS = 6
DEFAULT_TOL = 1e-10


class AlgebraError(ValueError):
    """Base class for algebra-level input errors."""


class SignatureMismatch(AlgebraError):
    """Operands live in different algebras."""


class NotInCone(AlgebraError):
    """An element expected in the quadratic cone is not there."""


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _blade_sign(a: int, b: int) -> int:
    """Sign of e_a e_b relative to e_{a xor b}."""
    swaps = 0
    shifted = a >> 1
    while shifted:
        swaps += _popcount(shifted & b)
        shifted >>= 1
    # each shared generator contributes e_k^2 = -1
    swaps += _popcount(a & b)
    return -1 if swaps & 1 else 1


class AlgebraSignature:
    """Multiplication data for R_n: sign table, conjugation signs, labels."""

    __slots__ = ("n", "dim", "sign", "conj_sign", "left_basis", "right_basis", "labels", "_label_index")

    def __init__(self, n: int):
        if not 0 <= n <= MAX_GENERATORS:
            raise AlgebraError(f"number of generators must lie in [0, {MAX_GENERATORS}], got {n}")
        self.n = n
        self.dim = 1 << n
        dim = self.dim
        sign = np.empty((dim, dim), dtype=np.int8)
        for a in range(dim):
            for b in range(dim):
                sign[a, b] = _blade_sign(a, b)
        self.sign = sign
        self.conj_sign = np.array(
            [1.0 if _popcount(k) % 4 in (0, 3) else -1.0 for k in range(dim)]
        )
        left = np.zeros((dim, dim, dim))
        right = np.zeros((dim, dim, dim))
        for a in range(dim):
            for b in range(dim):
                left[a, a ^ b, b] = sign[a, b]
                right[a, b ^ a, b] = sign[b, a]
        self.left_basis = left
        self.right_basis = right
        self.labels = tuple(
            "".join(str(k + 1) for k in range(n) if mask >> k & 1) for mask in range(dim)
        )
        self._label_index = {label: i for i, label in enumerate(self.labels)}

    def index(self, label: str | int) -> int:
        """Bitmask of a blade given as a label such as ``"13"`` or as an int mask."""
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < self.dim:
                raise AlgebraError(f"blade mask {label} out of range for n={self.n}")
            return int(label)
        canonical = "".join(sorted(label))
        if canonical not in self._label_index or len(set(label)) != len(label):
            raise AlgebraError(f"unknown blade label {label!r} for n={self.n}")
        return self._label_index[canonical]

    def product_table(self, k: int, h: int) -> tuple[int, int]:
        return int(self.sign[k, h]), k ^ h

    def left_matrix(self, coeff: np.ndarray) -> np.ndarray:
        """Matrix of y -> x y; complex coefficients give the complexified map."""
        return np.tensordot(coeff, self.left_basis, axes=(0, 0))

    def right_matrix(self, coeff: np.ndarray) -> np.ndarray:
        return np.tensordot(coeff, self.right_basis, axes=(0, 0))

    def product(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.left_matrix(x) @ y

    def __repr__(self) -> str:
        return f"AlgebraSignature(n={self.n})"

    def __reduce__(self):
        return (signature, (self.n,))


@lru_cache(maxsize=None)
def signature(n: int) -> AlgebraSignature:
    return AlgebraSignature(n)


class Multivector:
    """Immutable element of R_n."""

    __slots__ = ("sig", "coeff")

    def __init__(self, sig: AlgebraSignature | int, coeff: Iterable[float]):
        if isinstance(sig, int):
            sig = signature(sig)
        arr = np.array(coeff, dtype=float)
        if arr.shape != (sig.dim,):
            raise AlgebraError(f"expected {sig.dim} coefficients, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "sig", sig)
        object.__setattr__(self, "coeff", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Multivector is immutable")

    # construction helpers
    @classmethod
    def scalar(cls, sig: AlgebraSignature | int, value: float = 1.0) -> "Multivector":
        sig = signature(sig) if isinstance(sig, int) else sig
        c = np.zeros(sig.dim)
        c[0] = value
        return cls(sig, c)

    @classmethod
    def zero(cls, sig: AlgebraSignature | int) -> "Multivector":
        return cls.scalar(sig, 0.0)

    @classmethod
    def blade(cls, sig: AlgebraSignature | int, label: str | int, value: float = 1.0) -> "Multivector":
        sig = signature(sig) if isinstance(sig, int) else sig
        c = np.zeros(sig.dim)
        c[sig.index(label)] = value
        return cls(sig, c)

    @classmethod
    def from_terms(cls, sig: AlgebraSignature | int, terms: Mapping[str, float]) -> "Multivector":
        sig = signature(sig) if isinstance(sig, int) else sig
        c = np.zeros(sig.dim)
        for label, value in terms.items():
            c[sig.index(label)] += value
        return cls(sig, c)

    @property
    def n(self) -> int:
        return self.sig.n

    @property
    def scalar_part(self) -> float:
        return float(self.coeff[0])

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Multivector):
            if other.sig is not self.sig:
                raise SignatureMismatch(f"R_{self.n} vs R_{other.n}")
            return other.coeff
        if isinstance(other, (int, float, np.floating, np.integer)):
            c = np.zeros(self.sig.dim)
            c[0] = other
            return c
        return NotImplemented

    def __add__(self, other):
        c = self._coerce(other)
        if c is NotImplemented:
            return c
        return Multivector(self.sig, self.coeff + c)

    __radd__ = __add__

    def __sub__(self, other):
        c = self._coerce(other)
        if c is NotImplemented:
            return c
        return Multivector(self.sig, self.coeff - c)

    def __rsub__(self, other):
        c = self._coerce(other)
        if c is NotImplemented:
            return c
        return Multivector(self.sig, c - self.coeff)

    def __neg__(self):
        return Multivector(self.sig, -self.coeff)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return mul(self, other)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.sig, self.coeff * other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.sig, self.coeff * other)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.sig, self.coeff / other)
        return NotImplemented

    def __pow__(self, exponent: int) -> "Multivector":
        if not isinstance(exponent, (int, np.integer)) or exponent < 0:
            raise AlgebraError("only nonnegative integer powers are supported")
        result = Multivector.scalar(self.sig)
        base = self
        e = int(exponent)
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def conj(self) -> "Multivector":
        return conj(self)

    def re(self) -> "Multivector":
        return (self + self.conj()) * 0.5

    def im(self) -> "Multivector":
        return (self - self.conj()) * 0.5

    def norm(self) -> float:
        return euclid_norm(self)

    def op_norm(self) -> float:
        return clifford_op_norm(self)

    def left_matrix(self) -> np.ndarray:
        return self.sig.left_matrix(self.coeff)

    def right_matrix(self) -> np.ndarray:
        return self.sig.right_matrix(self.coeff)

    def is_real(self, tol: float = DEFAULT_TOL) -> bool:
        return bool(np.all(np.abs(self.coeff[1:]) <= tol * max(1.0, self.norm())))

    def allclose(self, other: "Multivector | float", tol: float = DEFAULT_TOL) -> bool:
        c = self._coerce(other)
        return bool(np.max(np.abs(self.coeff - c)) <= tol)

    def __repr__(self) -> str:
        parts = []
        for label, value in zip(self.sig.labels, self.coeff):
            if value != 0.0:
                parts.append(f"{float(value)!r}" + (f"*e{label}" if label else ""))
        body = " + ".join(parts) if parts else "0"
        return f"Multivector(R_{self.n}: {body})"


def _check_pair(a: Multivector, b: Multivector) -> None:
    if a.sig is not b.sig:
        raise SignatureMismatch(f"R_{a.n} vs R_{b.n}")


def mul(a: Multivector, b: Multivector) -> Multivector:
    _check_pair(a, b)
    return Multivector(a.sig, a.sig.product(a.coeff, b.coeff))


def conj(a: Multivector) -> Multivector:
    return Multivector(a.sig, a.coeff * a.sig.conj_sign)


def commutator(p: Multivector, q: Multivector) -> Multivector:
    return p * q - q * p


def euclid_norm(a: Multivector) -> float:
    return float(np.linalg.norm(a.coeff))


def clifford_op_norm(a: Multivector) -> float:
    """Largest singular value of left multiplication by ``a``."""
    return float(np.linalg.norm(a.left_matrix(), 2))


def _cone_defects(q: Multivector) -> tuple[float, float]:
    """Largest violation among x_K = 0 and <x, x e_K> = 0 over blades with e_K^2 = +1."""
    sig = q.sig
    linear = 0.0
    quadratic = 0.0
    x = q.coeff
    for k in range(1, sig.dim):
        if sig.sign[k, k] == 1:
            linear = max(linear, abs(x[k]))
            xe = sig.product(x, np.eye(sig.dim)[k])
            quadratic = max(quadratic, abs(float(x @ xe)))
    return linear, quadratic


def in_quadratic_cone(q: Multivector, tol: float = DEFAULT_TOL) -> bool:
    if q.n <= 2:
        return True
    scale = max(1.0, q.norm())
    linear, quadratic = _cone_defects(q)
    return linear <= tol * scale and quadratic <= tol * scale * scale


def in_imaginary_sphere(q: Multivector, tol: float = DEFAULT_TOL) -> bool:
    anti = np.max(np.abs(q.conj().coeff + q.coeff))
    sq = (q * q).coeff.copy()
    sq[0] += 1.0
    return bool(anti <= tol and np.max(np.abs(sq)) <= tol)


@dataclass(frozen=True)
class ConeDecomposition:
    """q = r + s*axis with s >= 0; ``axis`` is None when q is real."""

    r: float
    s: float
    axis: Multivector | None
    sig: AlgebraSignature

    @property
    def point(self) -> complex:
        return complex(self.r, self.s)

    def rebuild(self) -> Multivector:
        return phi(self.sig, self.axis, self.point)


def phi(sig: AlgebraSignature | int, axis: Multivector | None, z: complex) -> Multivector:
    """Image of the complex number z in the slice C_axis."""
    sig = signature(sig) if isinstance(sig, int) else sig
    out = Multivector.scalar(sig, z.real)
    if z.imag != 0.0:
        if axis is None:
            raise AlgebraError("a nonreal point needs an imaginary axis")
        out = out + axis * z.imag
    return out


def cone_decompose(q: Multivector, tol: float = DEFAULT_TOL) -> ConeDecomposition:
    if not in_quadratic_cone(q, tol):
        raise NotInCone(f"{q!r} is not in the quadratic cone")
    imag = q.im()
    s2 = (imag * imag.conj()).scalar_part
    s = math.sqrt(max(s2, 0.0))
    if s <= tol * max(1.0, q.norm()):
        return ConeDecomposition(q.scalar_part, 0.0, None, q.sig)
    return ConeDecomposition(q.scalar_part, s, imag / s, q.sig)


def cone_inverse(q: Multivector, tol: float = DEFAULT_TOL) -> Multivector:
    if not in_quadratic_cone(q, tol):
        raise NotInCone(f"{q!r} is not in the quadratic cone")
    modulus = (q * q.conj()).scalar_part
    if modulus == 0.0:
        raise AlgebraError("zero has no inverse")
    return q.conj() / modulus


def arg(q: Multivector, tol: float = DEFAULT_TOL) -> float:
    d = cone_decompose(q, tol)
    if d.r == 0.0 and d.s == 0.0:
        raise AlgebraError("arg is undefined at zero")
    return math.atan2(d.s, d.r)


def sphere_roster(sig: AlgebraSignature | int) -> list[Multivector]:
    """Sphere elements that are not 1-vectors: unit basis bivectors (n >= 3)."""
    sig = signature(sig) if isinstance(sig, int) else sig
    if sig.n < 3:
        return []
    return [Multivector.blade(sig, mask) for mask in range(sig.dim) if _popcount(mask) == 2]


def sample_imaginary_sphere(
    sig: AlgebraSignature | int, seed: int | np.random.Generator | None, count: int
) -> list[Multivector]:
    """Deterministic sphere samples.

    For n <= 2 the sphere is the whole unit sphere of imaginary elements and is
    sampled uniformly.  For n >= 3 samples are unit 1-vectors, with every fourth
    sample taken cyclically from :func:`sphere_roster`.
    """
    sig = signature(sig) if isinstance(sig, int) else sig
    if sig.n < 1:
        raise AlgebraError("R_0 has no imaginary units")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if sig.n <= 2:
        support = list(range(1, sig.dim))
    else:
        support = [1 << k for k in range(sig.n)]
    roster = sphere_roster(sig)
    out: list[Multivector] = []
    for i in range(count):
        if roster and i % 4 == 3:
            out.append(roster[(i // 4) % len(roster)])
            continue
        v = rng.standard_normal(len(support))
        v /= np.linalg.norm(v)
        c = np.zeros(sig.dim)
        c[support] = v
        out.append(Multivector(sig, c))
    return out


def random_cone_element(
    sig: AlgebraSignature | int, rng: np.random.Generator, scale: float = 1.0
) -> Multivector:
    sig = signature(sig) if isinstance(sig, int) else sig
    axis = sample_imaginary_sphere(sig, rng, 1)[0]
    return phi(sig, axis, complex(rng.normal() * scale, abs(rng.normal()) * scale))


def quaternion(w: float = 0.0, x: float = 0.0, y: float = 0.0, z: float = 0.0) -> Multivector:
    """w + x i + y j + z k in R_2."""
    return Multivector(signature(2), [w, x, y, z])


# JSON ----------------------------------------------------------------------

def element_to_json(q: Multivector) -> dict:
    return {"n": q.n, "coeff": {label: float(v) for label, v in zip(q.sig.labels, q.coeff)}}


def element_from_json(data: Mapping, n: int | None = None) -> Multivector:
    """Accepts ``{"n":..., "coeff": {...}}``, ``{"coeff": {...}}`` or a bare coefficient map."""
    if not isinstance(data, Mapping):
        if isinstance(data, (int, float)) and n is not None:
            return Multivector.scalar(n, float(data))
        raise AlgebraError(f"cannot read an algebra element from {data!r}")
    if "coeff" in data:
        n_here = data.get("n", n)
        coeff = data["coeff"]
    else:
        n_here, coeff = n, data
    if n_here is None:
        raise AlgebraError("element JSON lacks the number of generators 'n'")
    if n is not None and int(n_here) != n:
        raise SignatureMismatch(f"element has n={n_here}, expected {n}")
    if not isinstance(coeff, Mapping):
        raise AlgebraError("'coeff' must map blade labels to numbers")
    return Multivector.from_terms(int(n_here), {str(k): float(v) for k, v in coeff.items()})


def stack(elements: Sequence[Multivector]) -> np.ndarray:
    return np.stack([e.coeff for e in elements])
