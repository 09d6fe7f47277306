import math

import numpy as np
import pytest
from scipy.linalg import expm

from slicereg.numerics import extrapolate_to_zero, taylor_expm
from slicereg.quadrature import (
    QuadratureError,
    bisect,
    circle_path,
    gauss_legendre,
    graded_breakpoints,
    integrate,
    path_integral,
    sector_path,
)


def contour_sum(fn):
    def h(points, derivs, weights):
        return np.array([np.sum(weights * fn(points) * derivs)])
    return h


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(8)
    for degree in range(16):
        exact = 0.0 if degree % 2 else 2.0 / (degree + 1)
        assert np.sum(w * x ** degree) == pytest.approx(exact, abs=1e-14)


def test_integrate_smooth_function():
    value, err = integrate(lambda t: np.exp(t)[:, None], [0.0, 1.0], tol=1e-13)
    assert value[0] == pytest.approx(math.e - 1.0, abs=1e-13)
    assert err <= 1e-12


def test_integrate_reports_non_convergence():
    with pytest.raises(QuadratureError):
        integrate(lambda t: np.abs(t - 1 / 3)[:, None] ** 0.5, [0.0, 1.0], tol=1e-15, order=2, max_doublings=2)


def test_bisect_and_graded_breakpoints():
    assert np.allclose(bisect(np.array([0.0, 1.0, 3.0])), [0.0, 0.5, 1.0, 2.0, 3.0])
    bp = graded_breakpoints(1.0, 20.0, 0.1, 4)
    assert bp[0] == 1.0 and bp[-1] == 20.0
    widths = np.diff(bp)
    assert np.all(widths > 0) and widths[0] == pytest.approx(0.1)
    assert widths.max() <= 19.0 / 4 + 1e-12


def test_closed_circle_of_entire_function_vanishes():
    value, _ = path_integral(contour_sum(lambda z: z), circle_path(0.3 + 0.1j, 1.5), tol=1e-13)
    assert abs(value[0]) <= 1e-13


def test_cauchy_residue():
    value, _ = path_integral(contour_sum(lambda z: 1.0 / (z - 0.2)), circle_path(0.0, 1.0), tol=1e-13)
    assert value[0] / (2j * math.pi) == pytest.approx(1.0, abs=1e-12)


def test_sector_path_reproduces_exponential():
    # (1/2 pi i) int e^{t z} / (z + 1) dz over the sector boundary equals e^{-t}
    t = 0.7
    path = sector_path(0.5, 0.6 * math.pi, 200.0)
    value, _ = path_integral(contour_sum(lambda z: np.exp(t * z) / (z + 1.0)), path, tol=1e-12)
    assert (value[0] / (2j * math.pi)).real == pytest.approx(math.exp(-t), abs=1e-11)


def test_doubling_error_estimate_tracks_true_error():
    f = lambda t: np.cos(7 * t)[:, None]
    value, err = integrate(f, [0.0, 2.0], tol=1e-9, order=4, max_doublings=10)
    true = math.sin(14.0) / 7.0
    assert abs(value[0] - true) <= max(10 * err, 1e-14)


@pytest.mark.parametrize("scale", [0.1, 1.0, 10.0, 60.0])
def test_taylor_expm_matches_scipy(rng, scale):
    m = rng.normal(size=(6, 6)) * scale / 6
    want = expm(m)
    assert np.max(np.abs(taylor_expm(m) - want)) <= 1e-12 * max(1.0, np.max(np.abs(want)))


def test_taylor_expm_stacks_and_complex(rng):
    stack = rng.normal(size=(3, 4, 4)) + 1j * rng.normal(size=(3, 4, 4))
    out = taylor_expm(stack)
    for k in range(3):
        assert np.allclose(out[k], expm(stack[k]), atol=1e-12)


def test_extrapolation_of_first_order_sequence():
    steps = [0.1, 0.05, 0.025, 0.0125]
    values = [np.array([2.0 + 3.0 * h + h * h]) for h in steps]
    limit, err = extrapolate_to_zero(steps, values)
    assert limit[0] == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        extrapolate_to_zero([0.1], [np.zeros(1)])
    with pytest.raises(ValueError):
        extrapolate_to_zero([0.1, 0.2], [np.zeros(1), np.zeros(1)])
