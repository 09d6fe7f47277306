"""Stem functions, the right slice functions they induce, and slice products.

A stem value F1(z) + F2(z) is stored as one complex matrix F1 + iF2 in the
left-regular representation of its codomain: algebra values a become the
matrix of left multiplication by a, operator values are their real
embeddings.  In that picture the slice product of two stems is the pointwise
matrix product, and inducing at q = r + s j is ``Re F + Im F . L(j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .algebra import (
    AlgebraError,
    AlgebraSignature,
    Multivector,
    cone_decompose,
    element_from_json,
    element_to_json,
    in_imaginary_sphere,
    phi,
    sample_imaginary_sphere,
    signature,
)
from .numerics import extrapolate_to_zero, taylor_expm
from .operators import (
    MEMBERSHIP_RTOL,
    ModuleVector,
    RightLinearOperator,
    SingularDelta,
    block_left,
    delta_matrix,
    norm_upper,
    operator_from_json,
    operator_to_json,
)
from .quadrature import integrate

SERIES_CAP = 400
SERIES_SAFETY = 10.0


class StemError(ValueError):
    """Invalid stem input or evaluation outside the stem's domain."""


class DomainError(StemError):
    pass


# domains -------------------------------------------------------------------

class Domain:
    """Conjugation-invariant open subset of C."""

    def contains(self, z: complex) -> bool:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, count: int) -> list[complex]:
        """Points with positive imaginary part."""
        out: list[complex] = []
        while len(out) < count:
            z = self._propose(rng)
            if z.imag > 0 and self.contains(z):
                out.append(z)
        return out

    def _propose(self, rng: np.random.Generator) -> complex:
        return complex(rng.normal(), abs(rng.normal()))

    def to_json(self) -> dict:
        raise NotImplementedError


class Plane(Domain):
    def contains(self, z: complex) -> bool:
        return math.isfinite(z.real) and math.isfinite(z.imag)

    def to_json(self) -> dict:
        return {"kind": "plane"}


@dataclass(frozen=True)
class Disc(Domain):
    radius: float

    def contains(self, z: complex) -> bool:
        return abs(z) < self.radius

    def _propose(self, rng):
        rho = 0.9 * self.radius * math.sqrt(rng.uniform()) if math.isfinite(self.radius) else abs(rng.normal())
        return rho * complex(math.cos(t := rng.uniform(0, math.pi)), math.sin(t))

    def to_json(self) -> dict:
        return {"kind": "disc", "radius": self.radius}


@dataclass(frozen=True)
class Sector(Domain):
    """{z : z != vertex, |arg(z - vertex)| < half_angle}."""

    half_angle: float
    vertex: float = 0.0

    def contains(self, z: complex) -> bool:
        w = z - self.vertex
        return w != 0 and abs(math.atan2(w.imag, w.real)) < self.half_angle

    def _propose(self, rng):
        rho = math.exp(rng.uniform(math.log(0.1), math.log(3.0)))
        theta = rng.uniform(0, min(self.half_angle, math.pi) * 0.95)
        return self.vertex + rho * complex(math.cos(theta), math.sin(theta))

    def to_json(self) -> dict:
        return {"kind": "sector", "half_angle": self.half_angle, "vertex": self.vertex}


@dataclass(frozen=True)
class HalfPlane(Domain):
    re_min: float

    def contains(self, z: complex) -> bool:
        return z.real > self.re_min

    def _propose(self, rng):
        return complex(self.re_min + rng.uniform(0.1, 3.0), rng.uniform(0.0, 3.0))

    def to_json(self) -> dict:
        return {"kind": "half_plane", "re_min": self.re_min}


@dataclass(frozen=True)
class Annulus(Domain):
    inner: float
    outer: float

    def contains(self, z: complex) -> bool:
        return self.inner < abs(z) < self.outer

    def _propose(self, rng):
        outer = self.outer if math.isfinite(self.outer) else self.inner + 3.0
        rho = rng.uniform(self.inner, outer)
        t = rng.uniform(0, math.pi)
        return rho * complex(math.cos(t), math.sin(t))

    def to_json(self) -> dict:
        return {"kind": "annulus", "inner": self.inner, "outer": self.outer}


@dataclass(frozen=True)
class Intersection(Domain):
    parts: tuple[Domain, ...]

    def contains(self, z: complex) -> bool:
        return all(p.contains(z) for p in self.parts)

    def _propose(self, rng):
        return self.parts[0]._propose(rng)

    def to_json(self) -> dict:
        return {"kind": "intersection", "parts": [p.to_json() for p in self.parts]}


def domain_from_json(data: Mapping) -> Domain:
    kind = data.get("kind")
    if kind == "plane":
        return Plane()
    if kind == "disc":
        return Disc(float(data["radius"]))
    if kind == "sector":
        return Sector(float(data["half_angle"]), float(data.get("vertex", 0.0)))
    if kind == "half_plane":
        return HalfPlane(float(data["re_min"]))
    if kind == "annulus":
        return Annulus(float(data["inner"]), float(data["outer"]))
    if kind == "intersection":
        return Intersection(tuple(domain_from_json(p) for p in data["parts"]))
    raise StemError(f"unknown domain kind {kind!r}")


def intersect(a: Domain, b: Domain) -> Domain:
    if isinstance(a, Plane):
        return b
    if isinstance(b, Plane) or a == b:
        return a
    return Intersection((a, b))


# codomains -----------------------------------------------------------------

@dataclass(frozen=True)
class Codomain:
    """Algebra-valued (m = 0) or operator-valued on A^m (m >= 1)."""

    sig: AlgebraSignature
    m: int = 0

    @property
    def is_algebra(self) -> bool:
        return self.m == 0

    @property
    def blocks(self) -> int:
        return max(self.m, 1)

    @property
    def size(self) -> int:
        return self.sig.dim * self.blocks

    def scalar(self, coeffs) -> np.ndarray:
        """Matrix of the right action of an algebra scalar: a -> a c (algebra) or T -> T c (operators)."""
        return block_left(self.sig, self.blocks, coeffs)

    def identity(self) -> np.ndarray:
        return np.eye(self.size)

    def lift(self, value) -> np.ndarray:
        if isinstance(value, Multivector):
            if value.sig is not self.sig:
                raise StemError("value lives in a different algebra")
            return self.scalar(value.coeff)
        if isinstance(value, RightLinearOperator):
            value = value.embed()
        if isinstance(value, (int, float)):
            return float(value) * self.identity()
        arr = np.asarray(value)
        if arr.shape != (self.size, self.size):
            raise StemError(f"expected a {self.size} x {self.size} matrix, got {arr.shape}")
        return arr

    def lower(self, matrix: np.ndarray):
        if self.is_algebra:
            return Multivector(self.sig, np.real_if_close(matrix[:, 0]).real)
        return np.asarray(matrix)

    def norm(self, matrix: np.ndarray) -> float:
        return norm_upper(np.asarray(matrix), self.sig, self.blocks)

    def to_json(self) -> dict:
        if self.is_algebra:
            return {"codomain": "algebra", "n": self.sig.n}
        return {"codomain": "operator", "n": self.sig.n, "m": self.m}

    def value_to_json(self, value) -> dict:
        if isinstance(value, Multivector):
            return element_to_json(value)
        return operator_to_json(RightLinearOperator.from_embedding(self.sig, self.blocks, self.lift(value)))

    def value_from_json(self, data):
        if self.is_algebra:
            return element_from_json(data, self.sig.n)
        return operator_from_json(data).embed()


def codomain_from_json(data: Mapping) -> Codomain:
    kind = data.get("codomain", "algebra")
    n = int(data["n"])
    if kind == "algebra":
        return Codomain(signature(n))
    if kind == "operator":
        return Codomain(signature(n), int(data["m"]))
    raise StemError(f"unknown codomain {kind!r}")


def algebra_codomain(n: int | AlgebraSignature) -> Codomain:
    return Codomain(signature(n) if isinstance(n, int) else n)


def operator_codomain(sig: int | AlgebraSignature, m: int) -> Codomain:
    return Codomain(signature(sig) if isinstance(sig, int) else sig, m)


# stems ---------------------------------------------------------------------

class StemFunction:
    """z -> (F1(z), F2(z)); subclasses implement :meth:`matrix`."""

    codomain: Codomain
    domain: Domain

    def matrix(self, z: complex) -> np.ndarray:
        """F1(z) + i F2(z) in the lifted representation."""
        raise NotImplementedError

    def __call__(self, z: complex):
        f = self.matrix(complex(z))
        return self.codomain.lower(f.real), self.codomain.lower(f.imag)

    def to_json(self) -> dict:
        raise TypeError(f"{type(self).__name__} has no JSON form")

    def _check(self, z: complex) -> None:
        if not self.domain.contains(z):
            raise DomainError(f"z = {z} is outside the stem's domain")


class Constant(StemFunction):
    def __init__(self, codomain: Codomain, value, domain: Domain | None = None):
        self.codomain = codomain
        self.domain = domain or Plane()
        self.value = codomain.lift(value)

    def matrix(self, z: complex) -> np.ndarray:
        return self.value.astype(complex)

    def to_json(self) -> dict:
        return {"form": "constant", **self.codomain.to_json(),
                "value": self.codomain.value_to_json(self.codomain.lower(self.value))}


class PowerSeries(StemFunction):
    """sum_n c_n z^n with left coefficients; ``tail_bound`` records a known truncation bound."""

    def __init__(self, codomain: Codomain, coefficients: Sequence, radius: float = math.inf,
                 tail_bound: float = 0.0):
        if not coefficients:
            raise StemError("a power series needs at least one coefficient")
        self.codomain = codomain
        self.coefficients = [codomain.lift(c) for c in coefficients]
        self.radius = radius
        self.tail_bound = tail_bound
        self.domain = Disc(radius) if math.isfinite(radius) else Plane()

    def matrix(self, z: complex) -> np.ndarray:
        self._check(z)
        acc = self.coefficients[-1].astype(complex)
        for c in reversed(self.coefficients[:-1]):
            acc = c + z * acc
        return acc

    def to_json(self) -> dict:
        return {"form": "power_series", **self.codomain.to_json(),
                "coefficients": [self.codomain.value_to_json(self.codomain.lower(c)) for c in self.coefficients],
                "radius": self.radius if math.isfinite(self.radius) else None}


class ShiftedPower(StemFunction):
    """Stem of q -> (p + q)^{.n}: sum_k C(n,k) p^(n-k) z^k."""

    def __init__(self, p: Multivector, degree: int, codomain: Codomain | None = None):
        if degree < 0:
            raise StemError("degree must be nonnegative")
        self.codomain = codomain or algebra_codomain(p.sig)
        self.domain = Plane()
        self.p = p
        self.degree = degree
        self._p_matrix = self.codomain.scalar(p.coeff)

    def matrix(self, z: complex) -> np.ndarray:
        n = self.degree
        powers = [self.codomain.identity()]
        for _ in range(n):
            powers.append(powers[-1] @ self._p_matrix)
        acc = np.zeros((self.codomain.size, self.codomain.size), dtype=complex)
        zk = 1.0 + 0j
        for k in range(n + 1):
            acc = acc + math.comb(n, k) * zk * powers[n - k]
            zk *= z
        return acc

    def to_json(self) -> dict:
        return {"form": "shifted_power", **self.codomain.to_json(),
                "p": element_to_json(self.p), "degree": self.degree}


def _slice_split(p: Multivector | None, codomain: Codomain) -> list[tuple[complex, np.ndarray]]:
    """Write p + z as sum_tau (z + c_tau) P_tau with commuting idempotents P_tau.

    For p = a + b k with k on the sphere, P_pm = (1 -+ i k)/2 and c_pm = a +- i b.
    """
    size = codomain.size
    if p is None:
        return [(0j, np.eye(size, dtype=complex))]
    d = cone_decompose(p)
    if d.axis is None:
        return [(complex(d.r), np.eye(size, dtype=complex))]
    k_matrix = codomain.scalar(d.axis.coeff)
    eye = np.eye(size)
    return [
        (complex(d.r, d.s), 0.5 * (eye - 1j * k_matrix)),
        (complex(d.r, -d.s), 0.5 * (eye + 1j * k_matrix)),
    ]


class Exponential(StemFunction):
    """Stem of exp_p^x(q) = sum_n x^n/n! (p + q)^{.n}.

    ``method="series"`` sums the defining series with truncation control;
    ``"split"`` uses the idempotent splitting of p + z, giving
    sum_tau exp((z + c_tau) x) P_tau; ``"auto"`` picks the series when the
    terms cannot cancel badly.
    """

    def __init__(self, codomain: Codomain, x, p: Multivector | None = None, tol: float = 1e-15,
                 method: str = "auto"):
        if method not in ("auto", "series", "split"):
            raise StemError(f"unknown method {method!r}")
        self.codomain = codomain
        self.domain = Plane()
        self.x = codomain.lift(x)
        self.p = p
        self.tol = tol
        self.method = method
        self._split = _slice_split(p, codomain)
        self._p_matrix = codomain.scalar(p.coeff) if p is not None else np.zeros((codomain.size,) * 2)
        self._x_norm = codomain.norm(self.x)
        self.last_terms = 0

    def series(self, z: complex) -> np.ndarray:
        size = self.codomain.size
        base = self._p_matrix + z * np.eye(size)
        acc = np.eye(size, dtype=complex)
        x_power = np.eye(size)
        base_power = np.eye(size, dtype=complex)
        small = 0
        for n in range(1, SERIES_CAP + 1):
            x_power = x_power @ self.x / n
            base_power = base_power @ base
            term = x_power @ base_power
            acc = acc + term
            bound = self.codomain.norm(np.abs(x_power)) * self.codomain.norm(np.abs(base_power))
            small = small + 1 if SERIES_SAFETY * bound < self.tol * max(1.0, self.codomain.norm(np.abs(acc))) else 0
            if small >= 2:
                self.last_terms = n
                return acc
        self.last_terms = SERIES_CAP
        return acc

    def split(self, z: complex) -> np.ndarray:
        acc = np.zeros((self.codomain.size,) * 2, dtype=complex)
        for c, proj in self._split:
            acc = acc + taylor_expm((z + c) * self.x) @ proj
        return acc

    def matrix(self, z: complex) -> np.ndarray:
        if self.method == "series":
            return self.series(z)
        if self.method == "split":
            return self.split(z)
        reach = self._x_norm * (abs(z) + abs(self._split[0][0]))
        return self.series(z) if reach <= 1.0 else self.split(z)

    def to_json(self) -> dict:
        out = {"form": "exponential", **self.codomain.to_json(),
               "x": self.codomain.value_to_json(self.codomain.lower(self.x))}
        if self.p is not None:
            out["p"] = element_to_json(self.p)
        return out


class ResolventStem(StemFunction):
    """F1 = Q Re z - A Q, F2 = -Q Im z with Q = Delta(Re z, |z|^2)^{-1}."""

    def __init__(self, operator: RightLinearOperator, domain: Domain | None = None,
                 rtol: float = MEMBERSHIP_RTOL):
        self.operator = operator
        self.codomain = operator_codomain(operator.sig, operator.m)
        self.domain = domain or Plane()
        self.rtol = rtol

    def q_matrix(self, z: complex) -> np.ndarray:
        emb = self.operator.embed()
        dm = delta_matrix(emb, z.real, abs(z) ** 2)
        sv = np.linalg.svd(dm, compute_uv=False)
        if sv[-1] <= self.rtol * sv[0]:
            raise SingularDelta(f"the circle through z = {z} meets the spherical spectrum")
        return np.linalg.solve(dm, np.eye(dm.shape[0]))

    def matrix(self, z: complex) -> np.ndarray:
        self._check(z)
        qm = self.q_matrix(z)
        return qm * z.real - self.operator.embed() @ qm - 1j * qm * z.imag

    def to_json(self) -> dict:
        return {"form": "resolvent", **self.codomain.to_json(), "operator": operator_to_json(self.operator)}


class Product(StemFunction):
    """Pointwise product F G of stems in the order given."""

    def __init__(self, factors: Sequence[StemFunction]):
        flat: list[StemFunction] = []
        for f in factors:
            flat.extend(f.factors if isinstance(f, Product) else [f])
        if not flat:
            raise StemError("empty product")
        codomain = flat[0].codomain
        if any(f.codomain != codomain for f in flat):
            raise StemError("slice product of stems with different codomains")
        self.codomain = codomain
        self.factors = flat
        dom: Domain = Plane()
        for f in flat:
            dom = intersect(dom, f.domain)
        self.domain = dom

    def matrix(self, z: complex) -> np.ndarray:
        self._check(z)
        acc = self.factors[0].matrix(z)
        for f in self.factors[1:]:
            acc = acc @ f.matrix(z)
        return acc

    def to_json(self) -> dict:
        return {"form": "product", **self.codomain.to_json(), "factors": [f.to_json() for f in self.factors]}


class CallableStem(StemFunction):
    """Stem given by a Python function z -> (F1, F2) in codomain values."""

    def __init__(self, codomain: Codomain, fn: Callable[[complex], tuple[Any, Any]], domain: Domain | None = None):
        self.codomain = codomain
        self.fn = fn
        self.domain = domain or Plane()

    def matrix(self, z: complex) -> np.ndarray:
        self._check(z)
        f1, f2 = self.fn(z)
        return self.codomain.lift(f1) + 1j * self.codomain.lift(f2)


class IntegralStem(StemFunction):
    """H(z) = integral over [a, b] of weight(t) F_t(z) dt by panel Gauss-Legendre."""

    def __init__(self, family: Callable[[float], StemFunction], weight: Callable[[float], float],
                 interval: tuple[float, float], tol: float = 1e-12, panels: int = 4, order: int = 16,
                 codomain: Codomain | None = None, domain: Domain | None = None):
        self.family = family
        self.weight = weight
        self.interval = interval
        self.tol = tol
        self.panels = panels
        self.order = order
        probe = family(float(interval[0]))
        self.codomain = codomain or probe.codomain
        self.domain = domain or probe.domain

    def matrix(self, z: complex) -> np.ndarray:
        self._check(z)
        a, b = self.interval

        def integrand(ts):
            return np.stack([self.weight(t) * self.family(float(t)).matrix(z) for t in ts])

        value, _ = integrate(integrand, np.linspace(a, b, self.panels + 1), tol=self.tol, order=self.order)
        return value


def stem_from_json(data: Mapping) -> StemFunction:
    form = data.get("form")
    codomain = codomain_from_json(data)
    if form == "constant":
        return Constant(codomain, codomain.value_from_json(data["value"]))
    if form == "power_series":
        radius = data.get("radius")
        return PowerSeries(codomain, [codomain.value_from_json(c) for c in data["coefficients"]],
                           math.inf if radius is None else float(radius))
    if form == "shifted_power":
        return ShiftedPower(element_from_json(data["p"], codomain.sig.n), int(data["degree"]), codomain)
    if form == "exponential":
        p = element_from_json(data["p"], codomain.sig.n) if data.get("p") is not None else None
        return Exponential(codomain, codomain.value_from_json(data["x"]), p)
    if form == "resolvent":
        return ResolventStem(operator_from_json(data["operator"]))
    if form == "product":
        return Product([stem_from_json(f) for f in data["factors"]])
    raise StemError(f"unknown stem form {form!r}")


# operations ----------------------------------------------------------------

def induce(stem: StemFunction, q: Multivector):
    """Value F1(z) + F2(z) j of the induced slice function at q = r + s j."""
    d = cone_decompose(q)
    z = d.point
    if not stem.domain.contains(z):
        raise DomainError(f"{q!r} lies outside the circular domain of the stem")
    f = stem.matrix(z)
    out = f.real
    if d.axis is not None:
        out = out + f.imag @ stem.codomain.scalar(d.axis.coeff)
    return stem.codomain.lower(out)


def induce_on_axis(stem: StemFunction, z: complex, axis: Multivector):
    """Induced value at phi_axis(z), for z anywhere in the stem's domain."""
    f = stem.matrix(complex(z))
    return stem.codomain.lower(f.real + f.imag @ stem.codomain.scalar(axis.coeff))


def _right_mul(value, q: Multivector):
    if isinstance(value, Multivector):
        return value * q
    if isinstance(value, ModuleVector):
        return value.right_mul(q)
    arr = np.asarray(value)
    blocks = arr.shape[-1] // q.sig.dim
    return arr @ block_left(q.sig, blocks, q)


def _value_norm(value, sig: AlgebraSignature) -> float:
    if isinstance(value, Multivector):
        return value.op_norm()
    if isinstance(value, ModuleVector):
        return value.norm()
    arr = np.asarray(value)
    return norm_upper(arr, sig, arr.shape[-1] // sig.dim)


def representation_extend(fq, fqc, j: Multivector, k: Multivector, tol: float = 1e-10):
    """Value at r + s k from the values at q = r + s j and at q^c."""
    for axis in (j, k):
        if not in_imaginary_sphere(axis, tol):
            raise AlgebraError(f"{axis!r} is not in the imaginary sphere")
    half_sum = (fq + fqc) * 0.5
    half_diff = (fq - fqc) * 0.5
    return half_sum - _right_mul(half_diff, j * k)


@dataclass
class SliceVerdict:
    ok: bool
    witness: dict | None = None
    checked: int = 0

    def __bool__(self) -> bool:
        return self.ok


def is_right_slice(sampler: Callable[[Multivector], Any], region: Domain, sig: AlgebraSignature | int,
                   tol: float = 1e-9, samples: int = 64, axis_pairs: int = 4, seed: int = 0) -> SliceVerdict:
    """Check the representation formula at sampled (r, s, j, k)."""
    sig = signature(sig) if isinstance(sig, int) else sig
    rng = np.random.default_rng(seed)
    points = region.sample(rng, samples)
    axes = sample_imaginary_sphere(sig, rng, 2 * axis_pairs)
    pairs = list(zip(axes[0::2], axes[1::2]))
    checked = 0
    for z in points:
        if z.imag <= tol:
            continue
        for j, k in pairs:
            fq = sampler(phi(sig, j, z))
            fqc = sampler(phi(sig, j, z.conjugate()))
            predicted = representation_extend(fq, fqc, j, k)
            actual = sampler(phi(sig, k, z))
            scale = max(1.0, _value_norm(actual, sig), _value_norm(fq, sig), _value_norm(fqc, sig))
            gap = _value_norm(predicted - actual, sig)
            checked += 1
            if gap > tol * scale:
                return SliceVerdict(False, {"r": z.real, "s": z.imag, "j": j, "k": k,
                                            "predicted": predicted, "actual": actual, "gap": gap}, checked)
    return SliceVerdict(True, None, checked)


def cr_residual(stem: StemFunction, z: complex, h: float = 1e-5) -> float:
    """Norm of the centered-difference residual of dF1/dr = dF2/ds, dF1/ds = -dF2/dr."""
    z = complex(z)
    if h <= 0:
        raise StemError("step must be positive")
    stencil = [z + h, z - h, z + 1j * h, z - 1j * h]
    for w in stencil:
        if not stem.domain.contains(w):
            raise DomainError(f"stencil point {w} leaves the domain")
    fp, fm, gp, gm = (stem.matrix(w) for w in stencil)
    residual = (fp - fm) / (2 * h) + 1j * (gp - gm) / (2 * h)
    return max(stem.codomain.norm(residual.real), stem.codomain.norm(residual.imag))


def cr_richardson_ratio(stem: StemFunction, z: complex, h: float = 1e-2) -> float:
    return cr_residual(stem, z, h) / cr_residual(stem, z, h / 2)


def slice_product(f: StemFunction, g: StemFunction) -> StemFunction:
    if f.codomain != g.codomain:
        raise StemError("slice product of stems with different codomains")
    return Product([f, g])


def cauchy_product(f: PowerSeries, g: PowerSeries) -> PowerSeries:
    """Coefficient convolution c_n = sum_{k+h=n} a_k b_h of two truncated series."""
    if f.codomain != g.codomain:
        raise StemError("codomain mismatch")
    a, b = f.coefficients, g.coefficients
    out = []
    for n in range(len(a) + len(b) - 1):
        acc = np.zeros_like(a[0])
        for k in range(max(0, n - len(b) + 1), min(n, len(a) - 1) + 1):
            acc = acc + a[k] @ b[n - k]
        out.append(acc)
    return PowerSeries(f.codomain, out, min(f.radius, g.radius))


def shifted_slice_power(p: Multivector, n: int, codomain: Codomain | None = None) -> StemFunction:
    codomain = codomain or algebra_codomain(p.sig)
    if n == 0:
        return Constant(codomain, codomain.identity())
    return ShiftedPower(p, n, codomain)


def identity_stem(codomain: Codomain) -> PowerSeries:
    """Stem of q -> q."""
    return PowerSeries(codomain, [np.zeros((codomain.size,) * 2), codomain.identity()])


def _as_codomain_value(x, codomain: Codomain | None) -> tuple[Codomain, np.ndarray]:
    if isinstance(x, Multivector):
        codomain = codomain or algebra_codomain(x.sig)
    elif isinstance(x, RightLinearOperator):
        codomain = codomain or operator_codomain(x.sig, x.m)
    elif codomain is None:
        raise StemError("a codomain is required for matrix-valued x")
    return codomain, codomain.lift(x)


def exp_stem(x, p: Multivector | None = None, tol: float = 1e-15, codomain: Codomain | None = None,
             method: str = "auto") -> Exponential:
    codomain, xm = _as_codomain_value(x, codomain)
    return Exponential(codomain, xm, p, tol, method)


def exp_defect(x, p: Multivector, q: Multivector, t: float, codomain: Codomain | None = None,
               tol: float = 1e-17) -> np.ndarray:
    """E(t) = exp_{tp}^x(tq) - exp^x(t(p+q)) as a lifted real matrix, summed termwise.

    Term n is x^n/n! times the difference of the slice power (tp+tq)^{.n} and
    the ordinary power (t(p+q))^n; terms 0 and 1 vanish identically, so the
    sum carries no cancellation of O(1) quantities.
    """
    codomain, xm = _as_codomain_value(x, codomain)
    sig = p.sig
    alg = algebra_codomain(sig)
    dq = cone_decompose(q * t)
    base = alg.scalar((p * t).coeff) + dq.point * np.eye(sig.dim)
    axis_matrix = alg.scalar(dq.axis.coeff) if dq.axis is not None else np.zeros((sig.dim,) * 2)
    total = (p + q) * t
    slice_power = base.copy()
    plain_power = total
    x_power = xm.copy()
    acc = np.zeros_like(xm)
    x_norm = codomain.norm(np.abs(xm))
    reach = (p.op_norm() + q.op_norm()) * t
    bound = x_norm * reach
    for n in range(2, SERIES_CAP + 1):
        slice_power = slice_power @ base
        plain_power = plain_power * total
        x_power = x_power @ xm / n
        bound = bound * x_norm * reach / n
        induced = slice_power.real[:, 0] + (slice_power.imag @ axis_matrix)[:, 0]
        diff = Multivector(sig, induced) - plain_power
        acc = acc + x_power @ codomain.scalar(diff.coeff)
        if 2.0 * bound < tol * max(1.0, float(np.max(np.abs(acc)))) * t * t:
            break
    return acc


def exp_defect_limit(x, p: Multivector, q: Multivector, t_grid: Sequence[float] | None = None,
                     codomain: Codomain | None = None):
    """Extrapolated limit of 2 E(t) / t^2 as t -> 0; returns (limit, error estimate)."""
    if t_grid is None:
        t_grid = np.geomspace(1e-1, 1e-3, 7)
    t_grid = [float(t) for t in t_grid]
    if len(t_grid) < 2:
        raise StemError("grid too coarse for extrapolation")
    codomain, xm = _as_codomain_value(x, codomain)
    values = [2.0 * exp_defect(xm, p, q, t, codomain) / (t * t) for t in t_grid]
    limit, err = extrapolate_to_zero(t_grid, values)
    return codomain.lower(limit), err


def defect_prediction(x, p: Multivector, q: Multivector, codomain: Codomain | None = None):
    """x^2 (pq - qp)."""
    codomain, xm = _as_codomain_value(x, codomain)
    return codomain.lower(xm @ xm @ codomain.scalar((p * q - q * p).coeff))
