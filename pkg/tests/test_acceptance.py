"""Acceptance criteria at their stated sizes and tolerances.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line per criterion.
"""

import time

from slicereg import suite


def run_criterion(number: int, limit: float, build):
    start = time.perf_counter()
    report = build()
    elapsed = time.perf_counter() - start
    ok = report.passed and elapsed < limit
    failed = ", ".join(f"{r.check_id} (residual {r.residual:.3g}, tol {r.tol})" for r in report.failures()[:3])
    detail = f"{len(report)} checks, {elapsed:.2f} s of {limit:g} s"
    if failed:
        detail += f"; failing: {failed}"
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert report.passed, failed
    assert elapsed < limit, f"runtime {elapsed:.2f} s exceeds {limit} s"


def test_criterion_1_ij_swap_spectrum():
    run_criterion(1, 1.0, suite.ij_swap_checks)


def test_criterion_2_qrr_and_membership():
    run_criterion(2, 10.0, lambda: suite.resolvent_checks(operators=20, lambdas=20, tol=1e-9, band=1e-6))


def test_criterion_3_laplace_identity():
    run_criterion(3, 60.0, lambda: suite.laplace_checks(operators=5, samples=5, ks=(1, 2, 3), tol=1e-6))


def test_criterion_4_contour_vs_exponential():
    run_criterion(4, 60.0, lambda: suite.contour_checks(operators=1, ts=(0.1, 0.5, 1.0, 2.0), tol=1e-6))


def test_criterion_5_semigroup_law():
    run_criterion(5, 30.0, lambda: suite.law_checks(cases=20, tol=1e-8, ratio=1e3, required=15))


def test_criterion_6_exp_defect():
    run_criterion(6, 10.0, lambda: suite.exp_defect_checks(cases=10, tol=1e-4))


def test_criterion_7_yosida():
    run_criterion(7, 30.0, lambda: suite.yosida_checks(operators=5, ks=(4, 16, 64, 256), target=1e-5))


def test_criterion_8_slice_machinery():
    run_criterion(8, 10.0, suite.slice_checks)


def test_criterion_9_algebra_floor():
    run_criterion(9, 1.0, lambda: suite.algebra_checks(samples=100))
