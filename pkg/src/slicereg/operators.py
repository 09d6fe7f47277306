"""Right-linear operators on X = A^m and the spherical resolvent machinery.

Vectors of X are flattened component-major: index ``u * 2**n + K``.  An
operator is an m x m matrix of algebra entries acting by left multiplication,
which makes it right linear by construction.  Most numerical work happens on
the real embedding, a ``(m*2**n) x (m*2**n)`` real matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .algebra import (
    AlgebraSignature,
    Multivector,
    NotInCone,
    cone_decompose,
    element_from_json,
    element_to_json,
    in_quadratic_cone,
    phi,
    sample_imaginary_sphere,
    signature,
)

MEMBERSHIP_RTOL = 1e-8


class OperatorError(ValueError):
    """Invalid operator input."""


class DimensionMismatch(OperatorError):
    pass


class SingularDelta(ArithmeticError):
    """q lies in (or numerically at) the spherical spectrum."""


class SingularSystem(ArithmeticError):
    """A linear system that should be solved is singular."""


def _sig(sig: AlgebraSignature | int) -> AlgebraSignature:
    return signature(sig) if isinstance(sig, int) else sig


def _coeff(q) -> np.ndarray:
    return q.coeff if isinstance(q, Multivector) else np.asarray(q)


def block_left(sig: AlgebraSignature, m: int, q) -> np.ndarray:
    """Real (or complexified) matrix of x -> q x on A^m."""
    return np.kron(np.eye(m), sig.left_matrix(_coeff(q)))


def block_right(sig: AlgebraSignature, m: int, q) -> np.ndarray:
    """Matrix of x -> x q on A^m; for q on the sphere this is the complex structure of X_q."""
    return np.kron(np.eye(m), sig.right_matrix(_coeff(q)))


def block_left_many(sig: AlgebraSignature, m: int, coeffs: np.ndarray) -> np.ndarray:
    """Batched :func:`block_left` for an array of coefficient vectors (..., dim)."""
    small = np.tensordot(coeffs, sig.left_basis, axes=(-1, 0))
    if m == 1:
        return small
    dim = sig.dim
    out = np.zeros(coeffs.shape[:-1] + (m * dim, m * dim), dtype=small.dtype)
    for u in range(m):
        out[..., u * dim:(u + 1) * dim, u * dim:(u + 1) * dim] = small
    return out


def apply_right_scalar(matrix: np.ndarray, sig: AlgebraSignature, m: int, q) -> np.ndarray:
    """The operator x -> M(q x), written ``M q`` in the scalar convention used throughout."""
    return matrix @ block_left(sig, m, q)


def right_linearity_defect(matrix: np.ndarray, sig: AlgebraSignature, m: int) -> float:
    worst = 0.0
    for k in range(sig.dim):
        rk = np.kron(np.eye(m), sig.right_basis[k])
        worst = max(worst, float(np.max(np.abs(matrix @ rk - rk @ matrix))))
    return worst


def norm_upper(matrix: np.ndarray, sig: AlgebraSignature, m: int) -> float:
    """Upper bound of the operator norm on A^m with the max-of-Clifford-norms module norm.

    The bound is max_u sum_v |a_uv|_Cl, valid for right-linear matrices; each
    block's spectral norm equals the Clifford norm of its entry.
    """
    dim = sig.dim
    blocks = matrix.reshape(m, dim, m, dim).transpose(0, 2, 1, 3)
    norms = np.linalg.norm(blocks, ord=2, axis=(2, 3))
    return float(np.max(norms.sum(axis=1)))


def relative_residual(a: np.ndarray, b: np.ndarray, sig: AlgebraSignature, m: int) -> float:
    scale = max(norm_upper(a, sig, m), norm_upper(b, sig, m))
    diff = norm_upper(a - b, sig, m)
    return diff / scale if scale > 0 else diff


class ModuleVector:
    """Element of A^m."""

    __slots__ = ("sig", "m", "comps")

    def __init__(self, sig: AlgebraSignature | int, comps):
        sig = _sig(sig)
        arr = np.array(comps, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, sig.dim)
        if arr.ndim != 2 or arr.shape[1] != sig.dim:
            raise DimensionMismatch(f"components must have shape (m, {sig.dim})")
        arr.setflags(write=False)
        self.sig = sig
        self.m = arr.shape[0]
        self.comps = arr

    @classmethod
    def from_elements(cls, elements: Sequence[Multivector]) -> "ModuleVector":
        return cls(elements[0].sig, np.stack([e.coeff for e in elements]))

    @property
    def flat(self) -> np.ndarray:
        return self.comps.reshape(-1)

    def component(self, u: int) -> Multivector:
        return Multivector(self.sig, self.comps[u])

    def norm(self) -> float:
        return max(float(np.linalg.norm(self.sig.left_matrix(c), 2)) for c in self.comps)

    def left_mul(self, q: Multivector) -> "ModuleVector":
        return ModuleVector(self.sig, (block_left(self.sig, self.m, q) @ self.flat))

    def right_mul(self, q: Multivector) -> "ModuleVector":
        return ModuleVector(self.sig, (block_right(self.sig, self.m, q) @ self.flat))

    def __add__(self, other: "ModuleVector") -> "ModuleVector":
        return ModuleVector(self.sig, self.comps + other.comps)

    def __sub__(self, other: "ModuleVector") -> "ModuleVector":
        return ModuleVector(self.sig, self.comps - other.comps)

    def __repr__(self) -> str:
        return f"ModuleVector(R_{self.sig.n}^{self.m}, {self.comps.tolist()})"


class RightLinearOperator:
    """m x m matrix over A acting by entrywise left multiplication."""

    __slots__ = ("sig", "m", "entries", "_embedding")

    def __init__(self, sig: AlgebraSignature | int, entries):
        sig = _sig(sig)
        arr = np.array(entries, dtype=float)
        if arr.ndim != 3 or arr.shape[0] != arr.shape[1] or arr.shape[2] != sig.dim:
            raise DimensionMismatch(f"entries must have shape (m, m, {sig.dim}), got {arr.shape}")
        arr.setflags(write=False)
        self.sig = sig
        self.m = arr.shape[0]
        self.entries = arr
        self._embedding = None

    @classmethod
    def from_elements(cls, rows: Sequence[Sequence[Multivector]]) -> "RightLinearOperator":
        sig = rows[0][0].sig
        return cls(sig, [[e.coeff for e in row] for row in rows])

    @classmethod
    def identity(cls, sig: AlgebraSignature | int, m: int, scale: float = 1.0) -> "RightLinearOperator":
        sig = _sig(sig)
        e = np.zeros((m, m, sig.dim))
        for u in range(m):
            e[u, u, 0] = scale
        return cls(sig, e)

    @classmethod
    def diagonal(cls, values: Sequence[Multivector]) -> "RightLinearOperator":
        sig = values[0].sig
        m = len(values)
        e = np.zeros((m, m, sig.dim))
        for u, v in enumerate(values):
            e[u, u] = v.coeff
        return cls(sig, e)

    @classmethod
    def from_embedding(cls, sig: AlgebraSignature | int, m: int, matrix: np.ndarray,
                       tol: float | None = 1e-9) -> "RightLinearOperator":
        """Recover entries from a real embedding; each block's first column is its entry."""
        sig = _sig(sig)
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (m * sig.dim, m * sig.dim):
            raise DimensionMismatch("embedding has the wrong size")
        if tol is not None:
            scale = max(1.0, float(np.max(np.abs(matrix))))
            if right_linearity_defect(matrix, sig, m) > tol * scale:
                raise OperatorError("matrix is not right linear")
        dim = sig.dim
        blocks = matrix.reshape(m, dim, m, dim)
        return cls(sig, blocks[:, :, :, 0].transpose(0, 2, 1))

    @property
    def size(self) -> int:
        return self.m * self.sig.dim

    def embed(self) -> np.ndarray:
        if self._embedding is None:
            dim = self.sig.dim
            blocks = np.tensordot(self.entries, self.sig.left_basis, axes=(2, 0))
            emb = blocks.transpose(0, 2, 1, 3).reshape(self.m * dim, self.m * dim)
            emb.setflags(write=False)
            self._embedding = emb
        return self._embedding

    def entry(self, u: int, v: int) -> Multivector:
        return Multivector(self.sig, self.entries[u, v])

    def apply(self, x: ModuleVector) -> ModuleVector:
        if x.sig is not self.sig or x.m != self.m:
            raise DimensionMismatch("vector and operator dimensions disagree")
        return ModuleVector(self.sig, self.embed() @ x.flat)

    def left_scalar(self, q: Multivector) -> "RightLinearOperator":
        """qA : x -> q A(x)."""
        return RightLinearOperator.from_embedding(
            self.sig, self.m, block_left(self.sig, self.m, q) @ self.embed(), tol=None)

    def right_scalar(self, q: Multivector) -> "RightLinearOperator":
        """Aq : x -> A(q x)."""
        return RightLinearOperator.from_embedding(
            self.sig, self.m, self.embed() @ block_left(self.sig, self.m, q), tol=None)

    def _check(self, other: "RightLinearOperator") -> None:
        if other.sig is not self.sig or other.m != self.m:
            raise DimensionMismatch("operators act on different modules")

    def __add__(self, other: "RightLinearOperator") -> "RightLinearOperator":
        self._check(other)
        return RightLinearOperator(self.sig, self.entries + other.entries)

    def __sub__(self, other: "RightLinearOperator") -> "RightLinearOperator":
        self._check(other)
        return RightLinearOperator(self.sig, self.entries - other.entries)

    def __neg__(self) -> "RightLinearOperator":
        return RightLinearOperator(self.sig, -self.entries)

    def __mul__(self, scalar: float) -> "RightLinearOperator":
        return RightLinearOperator(self.sig, self.entries * float(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other: "RightLinearOperator") -> "RightLinearOperator":
        self._check(other)
        return RightLinearOperator.from_embedding(self.sig, self.m, self.embed() @ other.embed(), tol=None)

    def shift(self, omega: float) -> "RightLinearOperator":
        """A - omega Id."""
        return self - RightLinearOperator.identity(self.sig, self.m, omega)

    def __repr__(self) -> str:
        return f"RightLinearOperator(R_{self.sig.n}, m={self.m})"


def operator_to_json(a: RightLinearOperator) -> dict:
    return {
        "n": a.sig.n,
        "m": a.m,
        "entries": [[element_to_json(a.entry(u, v)) for v in range(a.m)] for u in range(a.m)],
    }


def operator_from_json(data: Mapping) -> RightLinearOperator:
    try:
        n = int(data["n"])
        m = int(data["m"])
        rows = data["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise OperatorError(f"operator JSON needs 'n', 'm' and 'entries': {exc}") from exc
    if len(rows) != m or any(len(row) != m for row in rows):
        raise DimensionMismatch(f"entries must form a {m} x {m} array")
    elements = [[element_from_json(cell, n) for cell in row] for row in rows]
    return RightLinearOperator.from_elements(elements)


# norms ---------------------------------------------------------------------

@dataclass(frozen=True)
class NormBracket:
    lower: float
    upper: float

    @property
    def value(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _module_norm_flat(sig: AlgebraSignature, m: int, flat: np.ndarray) -> float:
    comps = flat.reshape(m, sig.dim)
    return max(float(np.linalg.norm(sig.left_matrix(c), 2)) for c in comps)


def op_norm(a: RightLinearOperator | np.ndarray, sig: AlgebraSignature | None = None,
            m: int | None = None, seed: int = 0, trials: int = 64) -> NormBracket:
    """Bracket of sup ||Ax|| / ||x|| for the max-of-Clifford-norms module norm.

    The upper end is the block row-sum bound; the lower end is the best ratio
    found among row-aligned vectors, singular vectors of the embedding and a
    short randomized ascent.
    """
    if isinstance(a, RightLinearOperator):
        sig, m, emb = a.sig, a.m, a.embed()
    else:
        emb = np.asarray(a)
        if sig is None or m is None:
            raise OperatorError("a raw embedding needs its signature and module size")
    dim = sig.dim
    upper = norm_upper(emb, sig, m)
    if upper == 0.0:
        return NormBracket(0.0, 0.0)

    def ratio(x: np.ndarray) -> float:
        nx = _module_norm_flat(sig, m, x)
        return _module_norm_flat(sig, m, emb @ x) / nx if nx > 0 else 0.0

    candidates = []
    first_cols = emb.reshape(m, dim, m, dim)[:, :, :, 0].transpose(0, 2, 1)
    for u in range(m):
        x = np.zeros((m, dim))
        for v in range(m):
            entry = first_cols[u, v]
            size = np.linalg.norm(entry)
            if size > 0:
                x[v] = entry * sig.conj_sign / size
        candidates.append(x.reshape(-1))
    _, _, vt = np.linalg.svd(emb)
    candidates.extend(vt[:min(4, len(vt))])
    best_x = max(candidates, key=ratio)
    best = ratio(best_x)
    rng = np.random.default_rng(seed)
    step = 0.3
    for _ in range(trials):
        trial = best_x + step * rng.standard_normal(best_x.shape) * np.linalg.norm(best_x)
        value = ratio(trial)
        if value > best:
            best, best_x = value, trial
        else:
            step *= 0.9
    return NormBracket(min(best, upper), upper)


# spherical resolvent -------------------------------------------------------

def _cone_scalars(q: Multivector) -> tuple[float, float]:
    if not in_quadratic_cone(q):
        raise NotInCone(f"{q!r} is not in the quadratic cone")
    d = cone_decompose(q)
    return d.r, d.r * d.r + d.s * d.s


def delta_matrix(emb: np.ndarray, re: float, modulus_sq: float) -> np.ndarray:
    return emb @ emb - 2.0 * re * emb + modulus_sq * np.eye(emb.shape[0])


def delta(a: RightLinearOperator, q: Multivector) -> np.ndarray:
    """Embedding of A^2 - 2 Re(q) A + |q|^2 Id."""
    re, mod2 = _cone_scalars(q)
    return delta_matrix(a.embed(), re, mod2)


def relative_min_singular(matrix: np.ndarray) -> float:
    sv = np.linalg.svd(matrix, compute_uv=False)
    return float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0


def in_spherical_resolvent(a: RightLinearOperator, q: Multivector, rtol: float = MEMBERSHIP_RTOL) -> bool:
    return relative_min_singular(delta(a, q)) > rtol


def _checked_inverse(matrix: np.ndarray, rtol: float, error: type[Exception], what: str) -> np.ndarray:
    u, sv, vt = np.linalg.svd(matrix)
    if sv[0] == 0.0 or sv[-1] <= rtol * sv[0]:
        raise error(f"{what}: relative smallest singular value {sv[-1] / sv[0] if sv[0] else 0.0:.3e}")
    return np.linalg.solve(matrix, np.eye(matrix.shape[0]))


def spherical_Q(a: RightLinearOperator, q: Multivector, rtol: float = MEMBERSHIP_RTOL) -> np.ndarray:
    return _checked_inverse(delta(a, q), rtol, SingularDelta, f"Delta_q singular at {q!r}")


def spherical_C(a: RightLinearOperator, q: Multivector, rtol: float = MEMBERSHIP_RTOL) -> np.ndarray:
    """Embedding of Q_q(A) q^c - A Q_q(A), where (Q q^c)(x) = Q(q^c x)."""
    qm = spherical_Q(a, q, rtol)
    return qm @ block_left(a.sig, a.m, q.conj()) - a.embed() @ qm


def spherical_C_batch(emb: np.ndarray, sig: AlgebraSignature, m: int, alphas: np.ndarray) -> np.ndarray:
    """C_alpha(A) for many cone elements given as coefficient rows (k, dim); no singularity check."""
    conj = alphas * sig.conj_sign
    re = alphas[:, 0]
    mod2 = np.einsum("ij,ij->i", alphas, alphas)
    eye = np.eye(emb.shape[0])
    sq = emb @ emb
    deltas = sq[None] - 2.0 * re[:, None, None] * emb[None] + mod2[:, None, None] * eye[None]
    qs = np.linalg.solve(deltas, np.broadcast_to(eye, deltas.shape))
    return qs @ block_left_many(sig, m, conj) - emb[None] @ qs


def left_scalar_minus(a: RightLinearOperator, q: Multivector) -> np.ndarray:
    """Embedding of q Id - A, i.e. x -> q x - A x."""
    return block_left(a.sig, a.m, q) - a.embed()


def complex_structure(sig: AlgebraSignature, m: int, axis: Multivector) -> np.ndarray:
    """J_axis: x -> x axis, the complex structure of X_axis."""
    return block_right(sig, m, axis)


def complex_shift(a: RightLinearOperator, axis: Multivector, lam: complex) -> np.ndarray:
    """Embedding of y -> lam.y - A y with lam.y = y phi_axis(lam)."""
    return block_right(a.sig, a.m, phi(a.sig, axis, complex(lam))) - a.embed()


def complex_resolvent(a: RightLinearOperator, axis: Multivector, lam: complex,
                      rtol: float = MEMBERSHIP_RTOL) -> np.ndarray:
    return _checked_inverse(complex_shift(a, axis, lam), rtol, SingularSystem,
                            f"lambda={lam} is in the spectrum of A_j")


def verify_QRR(a: RightLinearOperator, axis: Multivector, lam: complex) -> float:
    """Relative residual of Q_{phi_j(lam)}(A) = R_conj(lam)(A_j) R_lam(A_j)."""
    lam = complex(lam)
    qm = spherical_Q(a, phi(a.sig, axis, lam))
    rr = complex_resolvent(a, axis, lam.conjugate()) @ complex_resolvent(a, axis, lam)
    return relative_residual(qm, rr, a.sig, a.m)


def membership_indicators(a: RightLinearOperator, axis: Multivector, lam: complex) -> tuple[float, float]:
    """(relative min singular value of Delta, min over lam, conj(lam) of that of lam - A_j)."""
    lam = complex(lam)
    spherical = relative_min_singular(delta(a, phi(a.sig, axis, lam)))
    complex_side = min(relative_min_singular(complex_shift(a, axis, lam)),
                       relative_min_singular(complex_shift(a, axis, lam.conjugate())))
    return spherical, complex_side


def vertex_shift_check(a: RightLinearOperator, omega: float, q: Multivector) -> float:
    """Max relative residual of Delta_q(A - w) = Delta_{q+w}(A) and C_q(A - w) = C_{q+w}(A)."""
    shifted = a.shift(omega)
    res_delta = relative_residual(delta(shifted, q), delta(a, q + omega), a.sig, a.m)
    res_c = relative_residual(spherical_C(shifted, q), spherical_C(a, q + omega), a.sig, a.m)
    return max(res_delta, res_c)


def spherical_spectrum(a: RightLinearOperator, cluster_rtol: float = 1e-6) -> list[tuple[float, float]]:
    """Circular components r + s S of the spherical spectrum as sorted (r, s) pairs."""
    emb = a.embed()
    try:
        eig = np.linalg.eigvals(emb)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigensolver failed: {exc}") from exc
    scale = max(1.0, float(np.max(np.abs(eig))) if eig.size else 1.0)
    points = sorted((float(z.real), abs(float(z.imag))) for z in eig)
    clusters: list[list[tuple[float, float]]] = []
    for p in points:
        for cl in clusters:
            c0 = cl[0]
            if math.hypot(p[0] - c0[0], p[1] - c0[1]) <= cluster_rtol * scale:
                cl.append(p)
                break
        else:
            clusters.append([p])
    out = []
    for cl in clusters:
        r = sum(p[0] for p in cl) / len(cl)
        s = sum(p[1] for p in cl) / len(cl)
        out.append((r, s if s > cluster_rtol * scale else 0.0))
    return sorted(out)


def right_eigenvector(a: RightLinearOperator, r: float, s: float,
                      axis: Multivector | None = None) -> tuple[ModuleVector, float]:
    """Nonzero x with A x = x (r + s axis), from the null space of A - R_lambda; returns the residual too."""
    sig = a.sig
    if axis is None:
        axis = Multivector.blade(sig, 1)
    lam = phi(sig, axis, complex(r, s))
    system = a.embed() - block_right(sig, a.m, lam)
    _, _, vt = np.linalg.svd(system)
    x = ModuleVector(sig, vt[-1])
    residual = float(np.linalg.norm(a.embed() @ x.flat - block_right(sig, a.m, lam) @ x.flat))
    return x, residual


# sectoriality probe --------------------------------------------------------

@dataclass
class ProbeResult:
    ok: bool
    K: float
    spectrum_clear: bool
    probes: int
    failures: list = field(default_factory=list)

    def __iter__(self):
        yield self.ok
        yield self.K


def sectorial_probe(a: RightLinearOperator, omega: float, delta_angle: float,
                    samples: int = 4, radii: Iterable[float] | None = None,
                    eps: float = 1e-3, seed: int = 0, angles: Iterable[float] | None = None) -> ProbeResult:
    """Probe omega + sector of half-opening pi/2 + delta for spherical resolvent membership and K."""
    if not 0 < delta_angle <= math.pi / 2:
        raise OperatorError("delta must lie in (0, pi/2]")
    sig, m = a.sig, a.m
    edge = math.pi / 2 + delta_angle - eps
    if angles is None:
        angles = [0.0, math.pi / 4, math.pi / 2, edge]
    angles = [t for t in angles if t <= edge + 1e-15]
    scale = max(1.0, norm_upper(a.embed(), sig, m))
    if radii is None:
        radii = np.logspace(-3, 3, 31) * scale
    axes = sample_imaginary_sphere(sig, seed, samples) if sig.n >= 1 else []
    spectrum = spherical_spectrum(a)
    spectrum_clear = all(math.atan2(s, r - omega) >= edge + eps - 1e-12
                         and math.hypot(r - omega, s) > 0 for r, s in spectrum)
    worst = 0.0
    failures = []
    count = 0
    for axis in axes or [None]:
        for theta in angles:
            for rho in radii:
                z = complex(omega + rho * math.cos(theta), rho * math.sin(theta))
                if axis is None and z.imag != 0:
                    continue
                q = phi(sig, axis, z)
                count += 1
                dm = delta(a, q)
                if relative_min_singular(dm) <= MEMBERSHIP_RTOL:
                    failures.append((z.real, z.imag))
                    continue
                cm = spherical_C(a, q)
                worst = max(worst, norm_upper(cm, sig, m) * rho)
    ok = not failures and spectrum_clear
    return ProbeResult(ok, worst, spectrum_clear, count, failures)
