"""Verification runs: each function exercises one family of identities and returns a report."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .algebra import (
    Multivector,
    clifford_op_norm,
    euclid_norm,
    in_quadratic_cone,
    phi,
    quaternion,
    random_cone_element,
    sample_imaginary_sphere,
    signature,
)
from .fixtures import nilpotent_shift, random_operator, random_sectorial_operator, ij_swap
from .operators import (
    ModuleVector,
    delta,
    left_scalar_minus,
    membership_indicators,
    relative_residual,
    spherical_C,
    spherical_spectrum,
    verify_QRR,
    vertex_shift_check,
)
from .report import SemigroupReport
from .semigroup import (
    ContourSpec,
    contour_semigroup,
    exp_semigroup,
    exp_provider,
    generator_estimate,
    growth_parameters,
    laplace_transform,
    resolvent_slice_power,
    resolvent_stem,
    semigroup_law_check,
    yosida_error,
)
from .stems import (
    Constant,
    Disc,
    HalfPlane,
    PowerSeries,
    ShiftedPower,
    algebra_codomain,
    cauchy_product,
    cr_richardson_ratio,
    defect_prediction,
    exp_defect_limit,
    exp_stem,
    induce,
    is_right_slice,
    operator_codomain,
    slice_product,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)
YOSIDA_KS = (4, 16, 64, 256)


def _min_sv(matrix: np.ndarray) -> float:
    return float(np.linalg.svd(matrix, compute_uv=False)[-1])


def algebra_checks(samples: int = 100, seed: int = 0) -> SemigroupReport:
    report = SemigroupReport()
    r3 = signature(3)
    one = Multivector.scalar(r3)
    e123 = Multivector.blade(r3, "123")
    product = (one + e123) * (one - e123)
    report.record("algebra.zero_divisor", product.norm(), 1e-15)
    square = (one + e123) * (one + e123)
    report.record("algebra.square_norm", abs(square.norm() - math.sqrt(8.0)), 1e-15)
    verdicts = {
        "e3+e12": (Multivector.from_terms(r3, {"3": 1.0, "12": 1.0}), False),
        "1+e123": (one + e123, False),
        "2+2e123": (square, False),
        "e12": (Multivector.blade(r3, "12"), True),
        "e3": (Multivector.blade(r3, "3"), True),
        "3.5": (Multivector.scalar(r3, 3.5), True),
        "quaternion": (quaternion(0.3, -1.2, 0.7, 2.0), True),
    }
    wrong = [name for name, (q, expected) in verdicts.items() if in_quadratic_cone(q) != expected]
    report.record("algebra.cone_membership", float(len(wrong)), 0.0, operands={"wrong": wrong})
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        q = random_cone_element(r3, rng, scale=2.0)
        worst = max(worst, abs(clifford_op_norm(q) - euclid_norm(q)) / max(1.0, euclid_norm(q)))
    report.record("algebra.clifford_norm_on_cone", worst, 1e-10, operands={"samples": samples})
    return report


def ij_swap_checks() -> SemigroupReport:
    report = SemigroupReport()
    a = ij_swap()
    sig = a.sig
    spec = spherical_spectrum(a)
    expected = [(-INV_SQRT2, INV_SQRT2), (INV_SQRT2, INV_SQRT2)]
    if len(spec) == 2:
        err = max(abs(x - y) for got, want in zip(spec, expected) for x, y in zip(got, want))
    else:
        err = math.inf
    report.record("operators.spectrum", err, 1e-10, operands={"components": [list(c) for c in spec]})
    mu = Multivector(sig, [0.0, INV_SQRT2, INV_SQRT2, 0.0])
    lam = Multivector(sig, [INV_SQRT2, INV_SQRT2, 0.0, 0.0])
    d_mu = _min_sv(delta(a, mu))
    shift_mu = _min_sv(left_scalar_minus(a, mu))
    d_lam = _min_sv(delta(a, lam))
    shift_lam = _min_sv(left_scalar_minus(a, lam))
    ok = d_mu > 1e-3 and shift_mu < 1e-10 and d_lam < 1e-10 and shift_lam > 1e-3
    report.record("operators.left_scalar_singular", max(shift_mu, d_lam), 1e-10, passed=ok,
                  operands={"delta_mu": d_mu, "shift_mu": shift_mu, "delta_lambda": d_lam,
                            "shift_lambda": shift_lam})
    return report


def resolvent_checks(operators: int = 20, lambdas: int = 20, seed: int = 0, tol: float = 1e-9,
                     band: float = 1e-6) -> SemigroupReport:
    """Q = R R on random complex points, membership equivalence including spectral points."""
    report = SemigroupReport()
    rng = np.random.default_rng(seed)
    worst_qrr = 0.0
    disagreements = 0
    banded = 0
    tested = 0
    vertex = 0.0
    for _ in range(operators):
        a = random_operator(rng)
        axis = sample_imaginary_sphere(a.sig, rng, 1)[0]
        for _ in range(lambdas):
            lam = complex(rng.normal() * 1.5, rng.normal() * 1.5)
            worst_qrr = max(worst_qrr, verify_QRR(a, axis, lam))
        points = [complex(rng.normal(), rng.normal()) for _ in range(lambdas)]
        points += [complex(r, s) for r, s in spherical_spectrum(a)]
        for lam in points:
            spherical, complex_side = membership_indicators(a, axis, lam)
            if any(1e-10 < v <= band for v in (spherical, complex_side)):
                banded += 1
                continue
            tested += 1
            if (spherical > band) != (complex_side > band):
                disagreements += 1
        q = phi(a.sig, axis, complex(rng.normal(), abs(rng.normal())))
        vertex = max(vertex, vertex_shift_check(a, 1.5, q))
    report.record("operators.qrr", worst_qrr, tol, operands={"operators": operators, "lambdas": lambdas})
    report.record("operators.membership", float(disagreements), 0.0,
                  operands={"tested": tested, "in_band": banded})
    report.record("operators.vertex_shift", vertex, 1e-10)
    return report


def laplace_checks(operators: int = 5, samples: int = 5, ks: Sequence[int] = (1, 2, 3), seed: int = 0,
                   tol: float = 1e-6, quad_tol: float = 1e-11) -> SemigroupReport:
    report = SemigroupReport()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for idx in range(operators):
        a = random_sectorial_operator(rng)
        growth = growth_parameters(a)
        provider = exp_provider(a)
        axes = sample_imaginary_sphere(a.sig, rng, samples)
        for axis in axes:
            q = phi(a.sig, axis, complex(rng.uniform(0.2, 2.0), rng.uniform(0.0, 3.0)))
            for k in ks:
                lap = laplace_transform(a, q, k, provider=provider, growth=growth, tol=quad_tol)
                res = resolvent_slice_power(a, q, k)
                worst = max(worst, relative_residual(lap, res, a.sig, a.m))
    report.record("semigroup.laplace", worst, tol, operands={"operators": operators, "samples": samples,
                                                             "k": list(ks)})
    return report


def contour_checks(operators: int = 1, seed: int = 0, ts: Sequence[float] = (0.1, 0.5, 1.0, 2.0),
                   tol: float = 1e-6, quad_tol: float = 1e-10, invariance: bool = True) -> SemigroupReport:
    report = SemigroupReport()
    rng = np.random.default_rng(seed)
    for idx in range(operators):
        a = random_sectorial_operator(rng)
        axes = sample_imaginary_sphere(a.sig, rng, 3)
        base = ContourSpec(axis=axes[0], r=1.0, eta=0.55 * math.pi, tol=quad_tol)
        worst = 0.0
        for t in ts:
            worst = max(worst, relative_residual(contour_semigroup(a, base, t), exp_semigroup(a, t), a.sig, a.m))
        report.record(f"semigroup.contour[op{idx}]", worst, tol, operands={"t": list(ts)})
        if not invariance:
            continue
        t = 1.0
        reference = contour_semigroup(a, base, t)
        spread = 0.0
        for axis in axes:
            for r in (0.5, 2.0):
                for eta in (0.55 * math.pi, 0.6 * math.pi):
                    value = contour_semigroup(a, base.with_(axis=axis, r=r, eta=eta), t)
                    spread = max(spread, relative_residual(value, reference, a.sig, a.m))
        report.record(f"semigroup.contour_invariance[op{idx}]", spread, 2.0 * quad_tol,
                      operands={"t": t, "r": [0.5, 2.0], "eta_over_pi": [0.55, 0.6]})
    return report


def law_checks(cases: int = 20, seed: int = 0, tol: float = 1e-8, ratio: float = 1e3,
               required: int = 15) -> SemigroupReport:
    report = SemigroupReport()
    rng = np.random.default_rng(seed)
    worst = 0.0
    separated = 0
    for _ in range(cases):
        a = random_operator(rng)
        axis = sample_imaginary_sphere(a.sig, rng, 1)[0]
        p = phi(a.sig, axis, complex(rng.uniform(0.1, 1.0), rng.uniform(-0.5, 0.5)))
        q = phi(a.sig, axis, complex(rng.uniform(0.1, 1.0), rng.uniform(-0.5, 0.5)))
        sub = semigroup_law_check(a, p, q, tol)
        law = [r for r in sub.records if r.check_id == "semigroup.law"][0]
        defect = [r for r in sub.records if r.check_id == "semigroup.pointwise_defect"][0]
        worst = max(worst, law.residual)
        if defect.residual >= ratio * law.residual:
            separated += 1
    report.record("semigroup.law", worst, tol, operands={"cases": cases})
    report.record("semigroup.pointwise_defect", float(max(0, required - separated)), 0.0,
                  operands={"separated": separated, "required": required, "ratio": ratio})
    return report


def exp_defect_checks(cases: int = 10, seed: int = 0, tol: float = 1e-4) -> SemigroupReport:
    report = SemigroupReport()
    rng = np.random.default_rng(seed)
    h = signature(2)
    worst = 0.0
    for _ in range(cases):
        x, p, q = (Multivector(h, rng.normal(size=4)) for _ in range(3))
        limit, _ = exp_defect_limit(x, p, q)
        target = defect_prediction(x, p, q)
        worst = max(worst, (limit - target).norm() / target.norm())
    report.record("stems.exp_defect", worst, tol, operands={"cases": cases})
    axis = quaternion(0, 0.6, 0.0, 0.8)
    commuting, _ = exp_defect_limit(quaternion(0.5, 1.0, -0.3, 0.2), phi(h, axis, 0.3 + 0.7j), phi(h, axis, -1.1 + 0.4j))
    nil = nilpotent_shift(h, 2)
    nil_limit, _ = exp_defect_limit(nil, quaternion(0, 1, 0, 0), quaternion(0, 0, 1, 0))
    zero_err = max(commuting.norm(), float(np.max(np.abs(nil_limit))))
    report.record("stems.exp_defect[zero]", zero_err, 1e-12)
    return report


def yosida_checks(operators: int = 5, ks: Sequence[int] = YOSIDA_KS, seed: int = 0,
                  target: float | None = None, t_grid: Sequence[float] | None = None) -> SemigroupReport:
    """Monotone decrease in k and first-order convergence; ``target`` adds the absolute threshold at the largest k."""
    report = SemigroupReport()
    rng = np.random.default_rng(seed)
    ts = np.linspace(0.0, 2.0, 41) if t_grid is None else np.asarray(t_grid)
    all_errors = []
    for _ in range(operators):
        a = random_sectorial_operator(rng)
        x = ModuleVector(a.sig, rng.normal(size=a.size))
        x = ModuleVector(a.sig, x.flat / x.norm())
        provider = exp_provider(a)
        all_errors.append([yosida_error(a, k, x, ts, provider) for k in ks])
    monotone = all(all(b <= a_ for a_, b in zip(errs, errs[1:])) for errs in all_errors)
    report.record("semigroup.yosida.monotone", 0.0 if monotone else 1.0, 0.0, passed=monotone,
                  operands={"k": list(ks), "errors": all_errors})
    # the error behaves like c/k; the observed order from the last two k must be close to one
    orders = [math.log(e[-2] / e[-1]) / math.log(ks[-1] / ks[-2]) for e in all_errors]
    report.record("semigroup.yosida.order", abs(min(orders) - 1.0), 0.1, operands={"orders": orders})
    if target is not None:
        report.record("semigroup.yosida.threshold", max(e[-1] for e in all_errors), target,
                      operands={"k": ks[-1]})
    return report


def _slice_accepts(stems, sig, region, seed) -> list[str]:
    failed = []
    for name, stem in stems.items():
        verdict = is_right_slice(lambda q, s=stem: induce(s, q), region, sig, samples=16, axis_pairs=3, seed=seed)
        if not verdict.ok:
            failed.append(name)
    return failed


def slice_checks(seed: int = 0) -> SemigroupReport:
    report = SemigroupReport()
    rng = np.random.default_rng(seed)
    h = signature(2)
    i, j = quaternion(0, 1, 0, 0), quaternion(0, 0, 1, 0)
    verdict = is_right_slice(lambda q: i * q * j, Disc(3.0), h, seed=seed)
    report.record("stems.not_slice", 0.0 if (not verdict.ok and verdict.witness) else 1.0, 0.0,
                  passed=not verdict.ok and verdict.witness is not None,
                  operands={"gap": float(verdict.witness["gap"]) if verdict.witness else 0.0})

    alg = algebra_codomain(h)
    coeffs = [Multivector(h, rng.normal(size=4)) for _ in range(5)]
    a = random_sectorial_operator(rng)
    ops = operator_codomain(a.sig, a.m)
    p = Multivector(h, rng.normal(size=4))
    series = PowerSeries(alg, coeffs)
    stems = {
        "power_series": series,
        "shifted_power": ShiftedPower(p, 5),
        "exponential": exp_stem(Multivector(h, rng.normal(size=4)), p),
        "constant": Constant(alg, coeffs[0]),
        "product": slice_product(series, ShiftedPower(p, 3)),
    }
    failed = _slice_accepts(stems, h, Disc(2.0), seed)
    op_stems = {"resolvent": resolvent_stem(a), "operator_exponential": exp_stem(a.embed(), None, codomain=ops)}
    failed += _slice_accepts(op_stems, h, HalfPlane(0.0), seed)
    report.record("stems.slice_accept", float(len(failed)), 0.0, operands={"failed": failed})

    holo = {"power_series": series, "shifted_power": ShiftedPower(p, 5), "exponential": stems["exponential"],
            "product": stems["product"], "resolvent": op_stems["resolvent"]}
    ratios = {name: cr_richardson_ratio(stem, complex(0.4, 0.3)) for name, stem in holo.items()}
    off = max(abs(r - 4.0) for r in ratios.values())
    report.record("stems.cr_ratio", off, 0.5, operands=ratios)

    other = PowerSeries(alg, [Multivector(h, rng.normal(size=4)) for _ in range(4)])
    conv = cauchy_product(series, other)
    prod = slice_product(series, other)
    worst = 0.0
    for axis in sample_imaginary_sphere(h, rng, 4):
        q = phi(h, axis, complex(rng.normal(), abs(rng.normal())))
        lhs, rhs = induce(prod, q), induce(conv, q)
        worst = max(worst, (lhs - rhs).norm() / max(1.0, rhs.norm()))
    report.record("stems.slice_product", worst, 1e-12)
    return report


def generator_checks(seed: int = 0) -> SemigroupReport:
    report = SemigroupReport()
    rng = np.random.default_rng(seed)
    a = random_operator(rng)
    x = ModuleVector(a.sig, rng.normal(size=a.size))
    provider = exp_provider(a)
    estimate = generator_estimate(lambda h: provider(np.array([h])), x)
    exact = a.embed() @ x.flat
    report.record("semigroup.generator", float(np.max(np.abs(estimate.flat - exact))) / max(1.0, float(np.max(np.abs(exact)))), 1e-7)
    q = phi(a.sig, sample_imaginary_sphere(a.sig, rng, 1)[0], complex(5.0, 0.7))
    stem_err = relative_residual(induce(resolvent_stem(a), q), spherical_C(a, q), a.sig, a.m)
    report.record("stems.resolvent_stem", stem_err, 1e-10)
    return report


def run_suite(seed: int = 0, quad_tol: float = 1e-10, full: bool = False) -> SemigroupReport:
    """All families; ``full`` uses the acceptance sample sizes, otherwise a lighter sweep."""
    report = SemigroupReport()
    scale = 1 if full else 0
    report.extend(algebra_checks(seed=seed))
    report.extend(ij_swap_checks())
    report.extend(resolvent_checks(operators=20 if full else 5, lambdas=20 if full else 8, seed=seed))
    report.extend(laplace_checks(operators=5 if full else 2, samples=5 if full else 2, seed=seed))
    report.extend(contour_checks(operators=1 + scale, seed=seed, quad_tol=quad_tol))
    report.extend(law_checks(cases=20 if full else 8, required=15 if full else 6, seed=seed))
    report.extend(exp_defect_checks(cases=10 if full else 4, seed=seed))
    report.extend(yosida_checks(operators=5 if full else 2, seed=seed))
    report.extend(slice_checks(seed=seed))
    report.extend(generator_checks(seed=seed))
    return report
