"""Semigroups generated by right-linear matrix operators.

Every operator-valued quantity is a real embedding.  Two independent routes
to the semigroup are provided: the exponential series (through its stem) and
the contour integral of the spherical resolvent over a sector boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import gammaincc

from .algebra import (
    Multivector,
    commutator,
    cone_decompose,
    in_imaginary_sphere,
    phi,
    sample_imaginary_sphere,
)
from .numerics import extrapolate_to_zero, taylor_expm
from .operators import (
    ModuleVector,
    RightLinearOperator,
    SingularDelta,
    block_left,
    norm_upper,
    relative_residual,
    sectorial_probe,
    spherical_C,
    spherical_C_batch,
    spherical_Q,
    spherical_spectrum,
)
from .quadrature import graded_breakpoints, integrate, path_integral, sector_path
from .report import SemigroupReport
from .stems import (
    Constant,
    Domain,
    Exponential,
    ResolventStem,
    Sector,
    StemFunction,
    induce,
    operator_codomain,
    slice_product,
)

TProvider = Callable[[np.ndarray], np.ndarray]


class ContourError(ValueError):
    """The contour is inadmissible for the operator (it meets or misses part of the spectrum)."""


class NonCommuting(ValueError):
    pass


@dataclass(frozen=True)
class ContourSpec:
    """omega + Gamma(axis; r; eta): two rays at angles -+eta joined by an arc of radius r."""

    axis: Multivector
    r: float = 1.0
    eta: float = 0.55 * math.pi
    omega: float = 0.0
    length: float | None = None
    panels: int = 16
    arc_panels: int = 4
    order: int = 16
    tol: float = 1e-10
    max_doublings: int = 6

    def __post_init__(self):
        if not math.pi / 2 < self.eta < math.pi:
            raise ContourError("eta must lie in (pi/2, pi)")
        if self.r <= 0:
            raise ContourError("arc radius must be positive")
        if not in_imaginary_sphere(self.axis):
            raise ContourError("contour axis must lie in the imaginary sphere")

    def with_(self, **changes) -> "ContourSpec":
        return replace(self, **changes)


# exponential route ---------------------------------------------------------

def semigroup_stems(a: RightLinearOperator, tol: float = 1e-15) -> Exponential:
    """Stem z -> exp(zA) of q -> sum A^n q^n / n!."""
    return Exponential(operator_codomain(a.sig, a.m), a.embed(), None, tol)


def exp_semigroup(a: RightLinearOperator, q: Multivector | float, tol: float = 1e-15) -> np.ndarray:
    if not isinstance(q, Multivector):
        q = Multivector.scalar(a.sig, float(q))
    if not q.coeff.any():
        return np.eye(a.size)
    return induce(semigroup_stems(a, tol), q)


def exp_provider(a: RightLinearOperator) -> TProvider:
    """Batched t -> exp(tA) for real t."""
    emb = a.embed()

    def provider(ts: np.ndarray) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.empty((len(ts),) + emb.shape)
        # group nodes by scaling exponent so small t are not over-squared
        norm = float(np.max(np.abs(emb).sum(axis=0)))
        buckets = np.ceil(np.log2(np.maximum(np.abs(ts) * norm, 0.5) / 0.5)).astype(int)
        for b in np.unique(buckets):
            idx = np.nonzero(buckets == b)[0]
            out[idx] = taylor_expm(ts[idx, None, None] * emb[None])
        return out

    return provider


def growth_parameters(a: RightLinearOperator, t_max: float = 20.0, samples: int = 201,
                      margin: float = 1e-2) -> tuple[float, float]:
    """(M, omega) with ||exp(tA)|| <= M e^(omega t) on a t-grid; omega is the spectral abscissa plus a margin."""
    emb = a.embed()
    abscissa = float(np.max(np.linalg.eigvals(emb).real))
    omega = abscissa + margin * max(1.0, norm_upper(emb, a.sig, a.m))
    ts = np.linspace(0.0, t_max, samples)
    mats = exp_provider(a)(ts)
    norms = np.array([norm_upper(mm, a.sig, a.m) for mm in mats])
    return float(np.max(norms * np.exp(-omega * ts))), omega


# resolvent route -----------------------------------------------------------

def resolvent_stem(a: RightLinearOperator, region: Domain | None = None, probe_seed: int = 0,
                   probe_count: int = 16) -> ResolventStem:
    """Stem of q -> C_q(A); the region is probed against the spherical spectrum."""
    stem = ResolventStem(a, region)
    if region is not None:
        rng = np.random.default_rng(probe_seed)
        for z in region.sample(rng, probe_count):
            stem.q_matrix(z)
        for r, s in spherical_spectrum(a):
            if region.contains(complex(r, s)):
                raise SingularDelta(f"region contains the spectral circle ({r}, {s})")
    return stem


def resolvent_slice_power(a: RightLinearOperator, q: Multivector, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be at least 1")
    stem = resolvent_stem(a)
    power: StemFunction = stem
    for _ in range(k - 1):
        power = slice_product(power, stem)
    return induce(power, q)


def laplace_transform(a: RightLinearOperator, q: Multivector, k: int, provider: TProvider | None = None,
                      growth: tuple[float, float] | None = None, tol: float = 1e-11,
                      order: int = 16) -> np.ndarray:
    """1/(k-1)! int_0^inf T(t) L(t^(k-1) e^(-tq)) dt; the scalar acts on x before T(t)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    provider = provider or exp_provider(a)
    m_const, omega = growth or growth_parameters(a)
    d = cone_decompose(q)
    gap = d.r - omega
    if gap <= 0:
        raise ValueError(f"Re q = {d.r} must exceed the growth bound {omega}")
    fact = math.factorial(k - 1)
    # tail: M/(k-1)! int_T^inf t^(k-1) e^(-gap t) dt = M gammaincc(k, gap T) / gap^k
    target = 0.01 * tol
    t_max = 1.0 / gap
    while m_const * gammaincc(k, gap * t_max) > target:
        t_max *= 1.5
    width = min(2.0 / gap, math.pi / d.s if d.s > 0 else math.inf, 4.0)
    bp = graded_breakpoints(0.0, t_max, min(0.25, width), max(4, math.ceil(t_max / width)))

    def integrand(ts):
        mats = provider(ts)
        base = ts ** (k - 1) * np.exp(-d.r * ts) / fact
        w_cos = base * np.cos(d.s * ts)
        w_sin = -base * np.sin(d.s * ts)
        return np.stack([mats * w_cos[:, None, None], mats * w_sin[:, None, None]], axis=1)

    value, _ = integrate(integrand, bp, tol=tol, order=order)
    out = value[0]
    if d.axis is not None:
        out = out + value[1] @ block_left(a.sig, a.m, d.axis)
    return out


def laplace_norm_bound_check(a: RightLinearOperator, omega: float, m_const: float,
                             sector_samples: Sequence[Multivector], k_max: int,
                             t_grid: Sequence[float] | None = None, label: str = "") -> SemigroupReport:
    report = SemigroupReport()
    ts = np.asarray(t_grid if t_grid is not None else np.linspace(0.0, 10.0, 101))
    mats = exp_provider(a)(ts)
    worst = max(norm_upper(mm, a.sig, a.m) / (m_const * math.exp(omega * t)) for mm, t in zip(mats, ts))
    report.record(f"semigroup.growth_precondition{label}", max(0.0, worst - 1.0), 1e-9,
                  operands={"omega": omega, "M": m_const})
    stem = resolvent_stem(a)
    for idx, q in enumerate(sector_samples):
        d = cone_decompose(q)
        if d.r <= omega:
            continue
        power: StemFunction = stem
        for k in range(1, k_max + 1):
            if k > 1:
                power = slice_product(power, stem)
            value = norm_upper(induce(power, q), a.sig, a.m)
            bound = m_const / (d.r - omega) ** k
            excess = max(0.0, value / bound - 1.0)
            report.record(f"semigroup.laplace_bound{label}[q{idx},k{k}]", excess, 1e-9,
                          operands={"q": list(map(float, q.coeff)), "k": k, "norm": value, "bound": bound})
    return report


# Yosida --------------------------------------------------------------------

def yosida_approximant(a: RightLinearOperator, k: float) -> RightLinearOperator:
    """k A C_k(A) for real k in the spherical resolvent set."""
    ck = spherical_C(a, Multivector.scalar(a.sig, float(k)))
    return RightLinearOperator.from_embedding(a.sig, a.m, float(k) * a.embed() @ ck, tol=None)


def yosida_error(a: RightLinearOperator, k: float, x: ModuleVector, t_grid: Sequence[float],
                 provider: TProvider | None = None) -> float:
    provider = provider or exp_provider(a)
    approx = exp_provider(yosida_approximant(a, k))
    ts = np.asarray(t_grid, dtype=float)
    diff = approx(ts) @ x.flat - provider(ts) @ x.flat
    return max(ModuleVector(a.sig, row).norm() for row in diff)


# generator -----------------------------------------------------------------

def generator_estimate(provider: Callable[[float], np.ndarray], x: ModuleVector,
                       h_grid: Sequence[float] | None = None) -> ModuleVector:
    """Extrapolated limit of (T(h)x - x)/h as h -> 0."""
    if h_grid is None:
        h_grid = np.geomspace(1e-1, 1e-3, 5)
    values = []
    for h in h_grid:
        th = np.asarray(provider(float(h)))
        th = th[0] if th.ndim == 3 else th
        values.append((th @ x.flat - x.flat) / float(h))
    limit, err = extrapolate_to_zero(list(h_grid), values)
    if not np.all(np.isfinite(limit)):
        raise ArithmeticError("extrapolation did not converge")
    return ModuleVector(x.sig, limit)


# contour route -------------------------------------------------------------

def _check_contour_clear(a: RightLinearOperator, spec: ContourSpec) -> None:
    scale = max(1.0, spec.r)
    for r, s in spherical_spectrum(a):
        w = complex(r - spec.omega, s)
        radius, angle = abs(w), abs(math.atan2(w.imag, w.real)) if w != 0 else 0.0
        near_arc = abs(radius - spec.r) <= 1e-8 * scale and angle <= spec.eta + 1e-8
        near_ray = radius >= spec.r - 1e-8 * scale and abs(angle - spec.eta) <= 1e-8
        inside = radius > spec.r and angle < spec.eta
        if near_arc or near_ray or inside:
            raise ContourError(f"spectral circle ({r}, {s}) meets or lies right of the contour")


def _alpha_rows(points: np.ndarray, axis: Multivector) -> np.ndarray:
    return points.real[:, None] * np.eye(axis.sig.dim)[0][None] + points.imag[:, None] * axis.coeff[None]


def _ray_resolvent_bound(a: RightLinearOperator, spec: ContourSpec) -> float:
    rho = np.geomspace(spec.r, spec.r * 1e4, 40)
    pts = spec.omega + np.concatenate([rho * np.exp(1j * spec.eta), spec.r * np.exp(1j * np.linspace(0, spec.eta, 9))])
    cs = spherical_C_batch(a.embed(), a.sig, a.m, _alpha_rows(pts, spec.axis))
    dist = np.abs(pts - spec.omega)
    return max(1.0, max(norm_upper(c, a.sig, a.m) * d for c, d in zip(cs, dist)))


def _contour_integral(a: RightLinearOperator, spec: ContourSpec,
                      scalar_rows: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      exponents: Iterable[complex], complex_output: bool, chunk: int = 1024) -> tuple[np.ndarray, float]:
    """(1/2pi) int C_a(A) L(j^(-1) a' g(a)) over the contour.

    ``scalar_rows(alpha, c)`` returns the coefficient rows of c g(alpha) for
    nodes alpha and the complex factors c = j^(-1) gamma' (read in C_j);
    ``exponents`` are the w with |g| ~ exp(Re(alpha w)), used for the ray
    truncation.
    """
    _check_contour_clear(a, spec)
    sig, m, emb = a.sig, a.m, a.embed()
    dirs = (complex(math.cos(spec.eta), math.sin(spec.eta)), complex(math.cos(spec.eta), -math.sin(spec.eta)))
    exponents = list(exponents)
    kappa = min(-(d * w).real for d in dirs for w in exponents)
    if kappa <= 0:
        raise ContourError("the argument lies outside the sector where the contour integral converges")
    big_k = _ray_resolvent_bound(a, spec)
    target = 1e-2 * spec.tol
    if spec.length is None:
        length = spec.r * 2
        for _ in range(4):
            length = max(2 * spec.r, spec.r + max(0.0, math.log(10 * big_k / (kappa * length * target))) / kappa)
    else:
        length = spec.length
    tail = 2 * big_k * math.exp(-kappa * length) / (kappa * length)
    path = sector_path(spec.r, spec.eta, length, spec.omega, spec.panels, spec.arc_panels, tail)
    dim, size = sig.dim, emb.shape[0]
    dtype = complex if complex_output else float

    def h(points, derivs, weights):
        acc = np.zeros((dim, size, size), dtype=dtype)
        for start in range(0, len(points), chunk):
            sl = slice(start, start + chunk)
            pts = points[sl]
            cs = spherical_C_batch(emb, sig, m, _alpha_rows(pts, spec.axis))
            rows = scalar_rows(pts, -1j * derivs[sl])
            if not complex_output:
                rows = rows.real
            acc += np.einsum("c,ck,cab->kab", weights[sl], rows, cs)
        return acc

    acc, err = path_integral(h, path, tol=spec.tol, order=spec.order, max_doublings=spec.max_doublings)
    basis = np.stack([block_left(sig, m, np.eye(dim)[k]) for k in range(dim)])
    out = np.einsum("kab,kbc->ac", acc, basis) / (2 * math.pi)
    return out, err


def contour_semigroup(a: RightLinearOperator, spec: ContourSpec, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return np.eye(a.size)
    j = spec.axis.coeff
    e0 = np.eye(a.sig.dim)[0]

    def rows(alpha, c):
        w = c * np.exp(t * alpha)
        return w.real[:, None] * e0[None] + w.imag[:, None] * j[None]

    value, _ = _contour_integral(a, spec, rows, [complex(t)], complex_output=False)
    return value


def _exp_slice_terms(sig, p: Multivector | None, z: complex, axis: Multivector,
                     q_axis: Multivector | None):
    """Pieces of the closed form of exp_p^alpha at a point with stem variable z.

    Returns (offsets w_tau, a_{sigma,tau}, b_{sigma,tau}) with
    exp_p^alpha(q) = Re sum c_sigma e^(alpha_sigma w_tau) a + Im sum ... b.
    """
    dim = sig.dim
    eye = np.eye(dim)
    lj = sig.left_matrix(axis.coeff)
    deltas = [0.5 * (eye - 1j * lj), 0.5 * (eye + 1j * lj)]
    if p is None:
        splits = [(0j, eye.astype(complex))]
    else:
        d = cone_decompose(p)
        if d.axis is None:
            splits = [(complex(d.r), eye.astype(complex))]
        else:
            lk = sig.left_matrix(d.axis.coeff)
            splits = [(complex(d.r, d.s), 0.5 * (eye - 1j * lk)), (complex(d.r, -d.s), 0.5 * (eye + 1j * lk))]
    kq = q_axis.coeff if q_axis is not None else np.zeros(dim)
    offsets = [z + c for c, _ in splits]
    first = np.array([[dl @ ep @ eye[0] for _, ep in splits] for dl in deltas])
    second = np.array([[dl @ ep @ kq for _, ep in splits] for dl in deltas])
    return offsets, first, second


def contour_semigroup_slice(a: RightLinearOperator, spec: ContourSpec, p: Multivector | None,
                            q: Multivector) -> np.ndarray:
    """(1/2pi) int C_a(A) j^(-1) da exp_p^a(q), with exp_p^a(q) through its stem."""
    dq = cone_decompose(q)
    if p is None and dq.r == 0 and dq.s == 0:
        return np.eye(a.size)
    offsets, first, second = _exp_slice_terms(a.sig, p, dq.point, spec.axis, dq.axis)
    off = np.array(offsets)

    def rows(alpha, c):
        alphas = np.stack([alpha, alpha.conj()], axis=1)
        cs = np.stack([c, c.conj()], axis=1)
        coef = cs[:, :, None] * np.exp(alphas[:, :, None] * off[None, None, :])
        return (np.einsum("cst,std->cd", coef, first).real + np.einsum("cst,std->cd", coef, second).imag)

    value, _ = _contour_integral(a, spec, rows, offsets, complex_output=False)
    return value


class ContourStem(StemFunction):
    """Stem z -> (1/2pi) int C_a(A) j^(-1) da e^(a z) of the contour semigroup."""

    def __init__(self, a: RightLinearOperator, spec: ContourSpec):
        self.operator = a
        self.spec = spec
        self.codomain = operator_codomain(a.sig, a.m)
        self.domain = Sector(spec.eta - math.pi / 2)

    def matrix(self, z: complex) -> np.ndarray:
        self._check(z)
        sig = self.operator.sig
        e0 = np.eye(sig.dim)[0]
        j = self.spec.axis.coeff
        plus = 0.5 * (e0 - 1j * j)
        minus = 0.5 * (e0 + 1j * j)

        def rows(alpha, c):
            up = c * np.exp(alpha * z)
            down = c.conj() * np.exp(alpha.conj() * z)
            return up[:, None] * plus[None] + down[:, None] * minus[None]

        value, _ = _contour_integral(self.operator, self.spec, rows, [z], complex_output=True)
        return value


def contour_stems(a: RightLinearOperator, spec: ContourSpec) -> ContourStem:
    return ContourStem(a, spec)


# law -----------------------------------------------------------------------

def semigroup_law_check(a: RightLinearOperator, p: Multivector, q: Multivector, tol: float = 1e-8,
                        stems: StemFunction | None = None, label: str = "") -> SemigroupReport:
    """Residual of T(p+q) = (T . T(q))(p) and the pointwise defect T(p+q) - T(p)T(q)."""
    scale = p.op_norm() * q.op_norm()
    if commutator(p, q).op_norm() > 1e-12 * scale:
        raise NonCommuting("p and q must commute")
    stems = stems or semigroup_stems(a)
    report = SemigroupReport()
    with report.timed() as clock:
        t_sum = induce(stems, p + q)
        t_q = induce(stems, q)
        composed = induce(slice_product(stems, Constant(stems.codomain, t_q)), p)
        residual = relative_residual(t_sum, composed, a.sig, a.m)
        defect = relative_residual(t_sum, induce(stems, p) @ t_q, a.sig, a.m)
    operands = {"p": list(map(float, p.coeff)), "q": list(map(float, q.coeff))}
    report.record(f"semigroup.law{label}", residual, tol, operands=operands, wall_time=clock["elapsed"])
    report.record(f"semigroup.pointwise_defect{label}", defect, None, passed=True,
                  operands={**operands, "ratio_to_law": defect / residual if residual > 0 else math.inf},
                  diagnostic=True)
    return report


# growth and converse checks -----------------------------------------------

def growth_bound_check(a: RightLinearOperator, spec: ContourSpec, delta_primes: Sequence[float], omega: float,
                       radii: Sequence[float] | None = None, angle_count: int = 6, axes: int = 2,
                       seed: int = 0, label: str = "") -> SemigroupReport:
    """sup of ||T(q)|| e^(-omega Re q) over q in sectors of half-opening delta' (nested grids)."""
    report = SemigroupReport()
    limit = spec.eta - math.pi / 2
    deltas = sorted(float(d) for d in delta_primes)
    if deltas[-1] >= limit:
        raise ContourError(f"delta' must stay below eta - pi/2 = {limit}")
    radii = list(radii if radii is not None else [0.05, 0.2, 0.5, 1.0, 2.0, 4.0])
    angles = np.linspace(0.0, deltas[-1], angle_count)
    axis_list = sample_imaginary_sphere(a.sig, seed, axes)
    values = {}
    for theta in angles:
        for rho in radii:
            for axis in axis_list:
                q = phi(a.sig, axis, rho * complex(math.cos(theta), math.sin(theta)))
                tq = contour_semigroup_slice(a, spec, None, q)
                values[(theta, rho, tuple(axis.coeff))] = norm_upper(tq, a.sig, a.m) * math.exp(-omega * q.scalar_part)
    estimates = []
    for dp in deltas:
        sup = max(v for (theta, _, _), v in values.items() if theta <= dp + 1e-15)
        estimates.append(sup)
        report.record(f"semigroup.growth{label}[delta={dp!r}]", sup, None, passed=True,
                      operands={"delta_prime": dp, "omega": omega}, diagnostic=True)
    monotone = all(b >= a_ for a_, b in zip(estimates, estimates[1:]))
    report.record(f"semigroup.growth{label}.monotone", 0.0 if monotone else 1.0, 0.0, passed=monotone)
    outer = max(v for (_, rho, _), v in values.items() if rho == radii[-1])
    inner = max(v for (_, rho, _), v in values.items() if rho != radii[-1])
    divergent = outer > 10.0 * inner
    report.record(f"semigroup.growth{label}.bounded", outer / inner, 10.0, passed=not divergent,
                  operands={"outer_ring": outer, "inner_rings": inner})
    return report


def q_from_c_residual(a: RightLinearOperator, p: Multivector) -> float:
    """Relative residual of Q_p(A) = (C_(p^c)(A) - C_p(A)) (2 Im p)^(-1)."""
    im2 = p.im() * 2.0
    inv = im2.conj() / (im2 * im2.conj()).scalar_part
    rhs = (spherical_C(a, p.conj()) - spherical_C(a, p)) @ block_left(a.sig, a.m, inv)
    return relative_residual(spherical_Q(a, p), rhs, a.sig, a.m)


def converse_sectoriality_check(a: RightLinearOperator, omega: float, grid: Sequence[Multivector] | None = None,
                                eta_primes: Sequence[float] = (math.pi / 12, math.pi / 6, math.pi / 4, math.pi / 3),
                                seed: int = 0, k_cap: float = 1e6, label: str = "") -> SemigroupReport:
    report = SemigroupReport()
    ts = np.linspace(0.0, 10.0, 101)
    mats = exp_provider(a)(ts)
    m_const = max(norm_upper(mm, a.sig, a.m) * math.exp(-omega * t) for mm, t in zip(mats, ts))
    tail = norm_upper(mats[-1], a.sig, a.m) * math.exp(-omega * ts[-1])
    bounded = tail <= 1.01 * max(norm_upper(mm, a.sig, a.m) * math.exp(-omega * t)
                                 for mm, t in zip(mats[:51], ts[:51]))
    report.record(f"semigroup.growth_precondition{label}", 0.0 if bounded else tail, 0.0, passed=bounded,
                  operands={"omega": omega, "M": m_const})
    rng = np.random.default_rng(seed)
    if grid is None:
        axes = sample_imaginary_sphere(a.sig, rng, 6)
        grid = [phi(a.sig, ax, complex(omega + rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0))) for ax in axes]
    worst = 0.0
    for q in grid:
        if cone_decompose(q).s == 0:
            continue
        worst = max(worst, q_from_c_residual(a, q))
    report.record(f"semigroup.q_from_c{label}", worst, 1e-10)
    best_angle = None
    for eta_p in sorted(eta_primes):
        probe = sectorial_probe(a, omega, eta_p, seed=seed)
        passed = probe.ok and probe.K < k_cap
        report.record(f"semigroup.sectorial{label}[eta={eta_p!r}]", probe.K, k_cap, passed=passed,
                      operands={"eta_prime": eta_p, "in_resolvent": probe.ok}, diagnostic=False)
        if passed:
            best_angle = eta_p
    report.record(f"semigroup.sectorial{label}.largest_angle", best_angle if best_angle is not None else 0.0, None,
                  passed=best_angle is not None, diagnostic=True)
    excess = 0.0
    for q in grid:
        d = cone_decompose(q)
        if d.r <= omega:
            continue
        value = norm_upper(spherical_C(a, q), a.sig, a.m)
        excess = max(excess, value * (d.r - omega) / m_const - 1.0)
    report.record(f"semigroup.laplace_bound{label}[k1]", max(0.0, excess), 1e-9)
    return report
