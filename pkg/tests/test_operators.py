import math

import numpy as np
import pytest

from slicereg.algebra import Multivector, phi, quaternion, sample_imaginary_sphere, signature
from slicereg.fixtures import nilpotent_shift, random_operator, ij_swap
from slicereg.operators import (
    DimensionMismatch,
    ModuleVector,
    OperatorError,
    RightLinearOperator,
    SingularDelta,
    SingularSystem,
    block_left,
    block_right,
    complex_resolvent,
    complex_shift,
    complex_structure,
    delta,
    in_spherical_resolvent,
    left_scalar_minus,
    membership_indicators,
    op_norm,
    operator_from_json,
    operator_to_json,
    relative_residual,
    right_eigenvector,
    right_linearity_defect,
    sectorial_probe,
    spherical_C,
    spherical_Q,
    spherical_spectrum,
    verify_QRR,
    vertex_shift_check,
)

H = signature(2)
I, J, K = quaternion(0, 1, 0, 0), quaternion(0, 0, 1, 0), quaternion(0, 0, 0, 1)
S = 1 / math.sqrt(2)


def test_apply_is_entrywise_left_multiplication():
    a = RightLinearOperator.diagonal([I])
    x = ModuleVector.from_elements([J])
    assert a.apply(x).component(0).allclose(K)
    ident = RightLinearOperator.identity(H, 3)
    y = ModuleVector(H, np.arange(12.0))
    assert np.array_equal(ident.apply(y).flat, y.flat)


def test_right_linearity(rng):
    a = random_operator(rng)
    x = ModuleVector(H, rng.normal(size=12))
    q = quaternion(*rng.normal(size=4))
    lhs = a.apply(x.right_mul(q))
    rhs = a.apply(x).right_mul(q)
    np.testing.assert_allclose(lhs.flat, rhs.flat, atol=1e-13)
    assert right_linearity_defect(a.embed(), H, 3) < 1e-14


def test_scalar_conventions(rng):
    a = random_operator(rng)
    q = quaternion(*rng.normal(size=4))
    x = ModuleVector(H, rng.normal(size=12))
    aq = a.right_scalar(q).apply(x)
    np.testing.assert_allclose(aq.flat, a.apply(x.left_mul(q)).flat, atol=1e-13)
    assert np.max(np.abs(aq.flat - a.apply(x).right_mul(q).flat)) > 1e-3
    qa = a.left_scalar(q).apply(x)
    np.testing.assert_allclose(qa.flat, a.apply(x).left_mul(q).flat, atol=1e-13)
    real = Multivector.scalar(H, 2.5)
    np.testing.assert_allclose(a.left_scalar(real).embed(), a.right_scalar(real).embed(), atol=1e-14)
    np.testing.assert_allclose(a.right_scalar(Multivector.scalar(H)).embed(), a.embed())


def test_embedding_is_homomorphism_and_commutes_with_complex_structure(rng):
    a, b = random_operator(rng), random_operator(rng)
    np.testing.assert_allclose((a @ b).embed(), a.embed() @ b.embed(), atol=1e-13)
    for axis in sample_imaginary_sphere(H, 3, 4):
        jj = complex_structure(H, 3, axis)
        np.testing.assert_allclose(jj @ jj, -np.eye(12), atol=1e-14)
        np.testing.assert_allclose(a.embed() @ jj, jj @ a.embed(), atol=1e-13)


def test_product_entries_match_direct_matrix_product(rng):
    a, b = random_operator(rng, m=2), random_operator(rng, m=2)
    prod = a @ b
    for u in range(2):
        for v in range(2):
            direct = a.entry(u, 0) * b.entry(0, v) + a.entry(u, 1) * b.entry(1, v)
            assert prod.entry(u, v).allclose(direct, tol=1e-13)


def test_module_norm_scaling(rng):
    x = ModuleVector(H, rng.normal(size=12))
    for _ in range(5):
        q = quaternion(*rng.normal(size=4))
        assert x.right_mul(q).norm() == pytest.approx(x.norm() * q.norm(), rel=1e-12)
        assert x.left_mul(q).norm() == pytest.approx(x.norm() * q.norm(), rel=1e-12)


def test_op_norm_examples(rng):
    br = op_norm(RightLinearOperator.identity(H, 3))
    assert br.lower == pytest.approx(1.0) and br.upper == pytest.approx(1.0)
    q = quaternion(1, -2, 0.5, 3)
    br = op_norm(RightLinearOperator.diagonal([q, q]))
    assert br.value == pytest.approx(q.norm(), rel=1e-12)
    br = op_norm(nilpotent_shift())
    assert br.lower == pytest.approx(1.0) and br.upper == pytest.approx(1.0)
    a = random_operator(rng)
    br = op_norm(a)
    assert br.lower <= br.upper + 1e-12
    for _ in range(50):
        x = rng.normal(size=12)
        xv = ModuleVector(H, x)
        assert ModuleVector(H, a.embed() @ x).norm() <= br.upper * xv.norm() * (1 + 1e-12)


def test_delta_examples(rng):
    a = random_operator(rng)
    e = a.embed()
    np.testing.assert_allclose(delta(a, Multivector.zero(H)), e @ e, atol=1e-13)
    r = 0.7
    np.testing.assert_allclose(delta(a, Multivector.scalar(H, r)), (e - r * np.eye(12)) @ (e - r * np.eye(12)),
                               atol=1e-13)
    q = quaternion(0.3, 1.0, -0.5, 0.2)
    np.testing.assert_allclose(delta(a, q), delta(a, q.conj()), atol=1e-14)


def test_delta_rejects_outside_cone():
    r3 = signature(3)
    a = RightLinearOperator.identity(r3, 1)
    with pytest.raises(ValueError):
        delta(a, Multivector.from_terms(r3, {"3": 1.0, "12": 1.0}))


def test_spherical_C_at_real_point_is_ordinary_resolvent(rng):
    a = random_operator(rng)
    r = 5.0
    expected = np.linalg.inv(r * np.eye(12) - a.embed())
    np.testing.assert_allclose(spherical_C(a, Multivector.scalar(H, r)), expected, atol=1e-13)


def test_spherical_C_trivial_case():
    zero = RightLinearOperator(H, np.zeros((1, 1, 4)))
    one = Multivector.scalar(H)
    np.testing.assert_allclose(spherical_Q(zero, one), np.eye(4))
    np.testing.assert_allclose(spherical_C(zero, one), np.eye(4))


def test_spherical_C_is_right_linear(rng):
    a = random_operator(rng)
    c = spherical_C(a, quaternion(0.5, 1.0, 2.0, -1.0))
    assert right_linearity_defect(c, H, 3) < 1e-12


def test_spherical_C_singular_on_spectrum():
    a = ij_swap()
    with pytest.raises(SingularDelta):
        spherical_C(a, phi(H, I, complex(S, S)))


def test_ij_swap_spectrum_and_singularity_pattern():
    a = ij_swap()
    spec = spherical_spectrum(a)
    assert len(spec) == 2
    for (r, s), (er, es) in zip(spec, [(-S, S), (S, S)]):
        assert abs(r - er) < 1e-10 and abs(s - es) < 1e-10
    mu = quaternion(0, S, S, 0)
    lam = quaternion(S, S, 0, 0)
    assert in_spherical_resolvent(a, mu)
    spherical_Q(a, mu)
    assert np.linalg.svd(left_scalar_minus(a, mu), compute_uv=False)[-1] < 1e-10
    assert np.linalg.svd(left_scalar_minus(a, mu.conj()), compute_uv=False)[-1] < 1e-10
    assert not in_spherical_resolvent(a, lam)
    assert np.linalg.svd(left_scalar_minus(a, lam), compute_uv=False)[-1] > 1e-3


def test_ij_swap_right_structure_system_is_invertible_at_mu():
    # x -> x mu - A x is a different map from x -> mu x - A x; it stays invertible at mu
    a = ij_swap()
    axis = quaternion(0, S, S, 0)
    sv = np.linalg.svd(complex_shift(a, axis, 1j), compute_uv=False)[-1]
    assert sv > 1e-3
    complex_resolvent(a, axis, 1j)


def test_complex_resolvent_examples(rng):
    zero = RightLinearOperator(H, np.zeros((2, 2, 4)))
    np.testing.assert_allclose(complex_resolvent(zero, I, 2.0), 0.5 * np.eye(8), atol=1e-15)
    a = random_operator(rng)
    lam, nu = 2.0 + 1.5j, -1.0 + 2.2j
    r_lam, r_nu = complex_resolvent(a, J, lam), complex_resolvent(a, J, nu)
    jj = complex_structure(H, 3, J)
    scalar = (nu - lam).real * np.eye(12) + (nu - lam).imag * jj
    np.testing.assert_allclose(r_lam - r_nu, r_lam @ r_nu @ scalar, atol=1e-12)


def test_complex_resolvent_singular_at_eigenvalue():
    a = RightLinearOperator.diagonal([I])
    with pytest.raises(SingularSystem):
        complex_resolvent(a, I, 1j)


def test_spectrum_examples():
    assert spherical_spectrum(RightLinearOperator.diagonal([Multivector.scalar(H, 2.0)])) == [(2.0, 0.0)]
    spec = spherical_spectrum(RightLinearOperator.diagonal([I]))
    assert len(spec) == 1 and spec[0][0] == pytest.approx(0.0, abs=1e-15) and spec[0][1] == pytest.approx(1.0)


def test_spectrum_components_contain_right_eigenvalues(rng):
    a = random_operator(rng)
    for r, s in spherical_spectrum(a):
        x, residual = right_eigenvector(a, r, s)
        assert residual <= 1e-8 * max(1.0, x.norm())
        assert x.norm() > 0.1


def test_spectrum_is_conjugation_symmetric(rng):
    a = random_operator(rng)
    eig = np.linalg.eigvals(a.embed())
    for z in eig:
        assert np.min(np.abs(eig - z.conjugate())) < 1e-10


def test_qrr_examples(rng):
    zero = RightLinearOperator(H, np.zeros((1, 1, 4)))
    assert verify_QRR(zero, I, 1 + 1j) < 1e-15
    a = random_operator(rng)
    assert verify_QRR(a, J, 1.3 - 0.4j) < 1e-10
    assert verify_QRR(a, J, 3.0) < 1e-10


def test_membership_equivalence_on_spectrum(rng):
    a = random_operator(rng)
    axis = sample_imaginary_sphere(H, 1, 1)[0]
    for r, s in spherical_spectrum(a):
        spherical, complex_side = membership_indicators(a, axis, complex(r, s))
        assert spherical < 1e-10 and complex_side < 1e-10
    spherical, complex_side = membership_indicators(a, axis, 10 + 1j)
    assert spherical > 1e-3 and complex_side > 1e-3


def test_vertex_shift(rng):
    a = random_operator(rng)
    q = quaternion(0.2, 0.0, 1.0, 0.0)
    assert vertex_shift_check(a, 0.0, q) == 0.0
    assert vertex_shift_check(a, 1.5, I) < 1e-10
    assert vertex_shift_check(a, 1.5, Multivector.scalar(H, 4.0)) < 1e-10


def test_probe_negative_identity():
    result = sectorial_probe(RightLinearOperator.identity(H, 1, -1.0), 0.0, 0.3)
    assert result.ok
    # sup over the sector of |q| / |q + 1| is 1 / sin of the angle between the edge ray and -1
    assert 1.0 <= result.K <= 1.0 / math.cos(0.3) + 1e-9


def test_probe_rejects_spectrum_in_sector():
    ok, _ = sectorial_probe(RightLinearOperator.identity(H, 1, 1.0), 0.0, 0.3)
    assert not ok


def test_probe_ij_swap_with_shifted_vertex():
    assert sectorial_probe(ij_swap(), 2.0, math.pi / 4).ok


def test_operator_json_round_trip(rng):
    a = random_operator(rng)
    b = operator_from_json(operator_to_json(a))
    assert np.array_equal(a.entries, b.entries)
    with pytest.raises(OperatorError):
        operator_from_json({"n": 2})
    with pytest.raises(DimensionMismatch):
        operator_from_json({"n": 2, "m": 2, "entries": [[{"": 1.0}]]})


def test_dimension_checks(rng):
    a = random_operator(rng)
    with pytest.raises(DimensionMismatch):
        a.apply(ModuleVector(H, np.zeros(8)))
    with pytest.raises(DimensionMismatch):
        a + random_operator(rng, m=2)


def test_from_embedding_rejects_non_right_linear():
    with pytest.raises(OperatorError):
        RightLinearOperator.from_embedding(H, 1, block_right(H, 1, I))
    assert relative_residual(block_left(H, 1, I), block_left(H, 1, I), H, 1) == 0.0
