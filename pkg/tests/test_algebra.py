import json
import math

import numpy as np
import pytest

from slicereg.algebra import (
    AlgebraError,
    Multivector,
    NotInCone,
    SignatureMismatch,
    arg,
    clifford_op_norm,
    commutator,
    conj,
    cone_decompose,
    cone_inverse,
    element_from_json,
    element_to_json,
    euclid_norm,
    in_imaginary_sphere,
    in_quadratic_cone,
    mul,
    quaternion,
    sample_imaginary_sphere,
    signature,
    sphere_roster,
)

H = signature(2)
R3 = signature(3)
I, J, K = quaternion(0, 1, 0, 0), quaternion(0, 0, 1, 0), quaternion(0, 0, 0, 1)


def hamilton(a, b):
    """Independent quaternion product on (w, x, y, z) tuples."""
    a1, b1, c1, d1 = a
    a2, b2, c2, d2 = b
    return np.array([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ])


def test_quaternion_table():
    assert (I * J).allclose(K)
    assert (J * K).allclose(I)
    assert (K * I).allclose(J)
    for u in (I, J, K):
        assert (u * u).allclose(-1.0)


def test_product_matches_hamilton(rng):
    for _ in range(20):
        a, b = rng.normal(size=4), rng.normal(size=4)
        np.testing.assert_allclose((quaternion(*a) * quaternion(*b)).coeff, hamilton(a, b), atol=1e-14)


def test_basis_product_rule():
    e1, e2 = Multivector.blade(R3, "1"), Multivector.blade(R3, "2")
    assert (e1 * e2).allclose(Multivector.blade(R3, "12"))
    assert (e2 * e1).allclose(-Multivector.blade(R3, "12"))
    assert R3.product_table(0b001, 0b010) == (1, 0b011)


def test_generators_square_to_minus_one():
    sig = signature(4)
    for k in range(4):
        e = Multivector.blade(sig, 1 << k)
        assert (e * e).allclose(-1.0, tol=0)


def test_associativity_on_basis():
    sig = signature(4)
    blades = [Multivector.blade(sig, m) for m in range(sig.dim)]
    for a in blades[::3]:
        for b in blades[::2]:
            for c in blades[1::3]:
                assert ((a * b) * c).allclose(a * (b * c), tol=0)


def test_zero_divisor_in_r3():
    one, e123 = Multivector.scalar(R3), Multivector.blade(R3, "123")
    assert ((one + e123) * (one - e123)).norm() == 0.0


def test_square_of_one_plus_e123():
    one, e123 = Multivector.scalar(R3), Multivector.blade(R3, "123")
    sq = (one + e123) ** 2
    assert sq.allclose(Multivector.from_terms(R3, {"": 2.0, "123": 2.0}), tol=0)
    assert sq.norm() == pytest.approx(math.sqrt(8.0), abs=1e-15)


def test_conjugation_rule():
    assert conj(Multivector.blade(R3, "1")).allclose(-Multivector.blade(R3, "1"))
    assert conj(Multivector.blade(R3, "12")).allclose(-Multivector.blade(R3, "12"))
    assert conj(Multivector.blade(R3, "123")).allclose(Multivector.blade(R3, "123"))
    sig = signature(5)
    for mask in range(sig.dim):
        grade = bin(mask).count("1")
        assert sig.conj_sign[mask] == (1.0 if grade % 4 in (0, 3) else -1.0)


def test_real_and_imaginary_parts_sum_exactly(rng):
    q = Multivector(R3, rng.normal(size=8))
    assert (q.re() + q.im()).allclose(q, tol=0)


def test_clifford_norm_values():
    one, e123 = Multivector.scalar(R3), Multivector.blade(R3, "123")
    assert clifford_op_norm(one) == pytest.approx(1.0)
    # L(1 + e123) = 2 P with P a symmetric idempotent, so its largest singular value is 2
    assert clifford_op_norm(one + e123) == pytest.approx(2.0, abs=1e-14)
    assert euclid_norm(one + e123) == pytest.approx(math.sqrt(2.0))


def test_cone_membership_verdicts(rng):
    one, e123 = Multivector.scalar(R3), Multivector.blade(R3, "123")
    assert not in_quadratic_cone(Multivector.from_terms(R3, {"3": 1.0, "12": 1.0}))
    assert not in_quadratic_cone(one + e123)
    assert not in_quadratic_cone((one + e123) ** 2)
    assert in_quadratic_cone(Multivector.scalar(R3, 3.5))
    assert in_quadratic_cone(Multivector.blade(R3, "12"))
    for _ in range(10):
        assert in_quadratic_cone(quaternion(*rng.normal(size=4)))
        assert in_quadratic_cone(Multivector(signature(1), rng.normal(size=2)))


def test_e3_and_e12_commute_yet_sum_leaves_cone():
    e3, e12 = Multivector.blade(R3, "3"), Multivector.blade(R3, "12")
    assert commutator(e3, e12).norm() == 0.0
    assert not in_quadratic_cone(e3 + e12)


def test_commutator_of_i_and_j():
    assert commutator(I, J).allclose(2 * K)


def test_imaginary_sphere_membership():
    assert in_imaginary_sphere(Multivector.blade(R3, "1"))
    assert not in_imaginary_sphere(Multivector.blade(R3, "123"))
    assert in_imaginary_sphere(Multivector.from_terms(R3, {"1": 2 ** -0.5, "2": 2 ** -0.5}))


def test_cone_decompose_examples():
    d = cone_decompose(Multivector.scalar(H, 2.0))
    assert (d.r, d.s, d.axis) == (2.0, 0.0, None)
    d = cone_decompose(quaternion(1, 2, 0, 0))
    assert (d.r, d.s) == (1.0, 2.0) and d.axis.allclose(I)
    d = cone_decompose(quaternion(3, 0, 0, -4))
    assert (d.r, d.s) == (3.0, 4.0) and d.axis.allclose(-K)
    assert d.rebuild().allclose(quaternion(3, 0, 0, -4))


def test_cone_decompose_rejects_outside_cone():
    with pytest.raises(NotInCone):
        cone_decompose(Multivector.from_terms(R3, {"3": 1.0, "12": 1.0}))


def test_cone_inverse_examples():
    assert cone_inverse(I).allclose(-I)
    e1 = Multivector.blade(R3, "1")
    assert cone_inverse(1 + e1).allclose((1 - e1) * 0.5)
    assert cone_inverse(Multivector.scalar(H, 4.0)).allclose(0.25)
    with pytest.raises(AlgebraError):
        cone_inverse(Multivector.zero(H))


def test_arg_examples():
    assert arg(Multivector.scalar(H, 5.0)) == 0.0
    assert arg(J) == pytest.approx(math.pi / 2)
    assert arg(Multivector.scalar(R3, -1.0)) == pytest.approx(math.pi)
    with pytest.raises(AlgebraError):
        arg(Multivector.zero(H))


def test_sphere_sampler():
    assert sample_imaginary_sphere(H, 0, 0) == []
    for n in (1, 2, 3, 4):
        samples = sample_imaginary_sphere(n, 7, 12)
        for q in samples:
            assert in_imaginary_sphere(q)
            assert (q * q).allclose(-1.0, tol=1e-12)
    again = sample_imaginary_sphere(3, 7, 12)
    assert all(a.allclose(b, tol=0) for a, b in zip(sample_imaginary_sphere(3, 7, 12), again))
    roster = sphere_roster(3)
    assert any(any(s.allclose(r, tol=0) for r in roster) for s in again)


def test_signature_mismatch():
    with pytest.raises(SignatureMismatch):
        mul(I, Multivector.blade(R3, "1"))
    with pytest.raises(AlgebraError):
        signature(7)


def test_json_round_trip_is_bit_exact(rng):
    q = Multivector(R3, rng.normal(size=8) * 1e3)
    data = json.loads(json.dumps(element_to_json(q)))
    assert data["n"] == 3 and set(data["coeff"]) == {"", "1", "2", "12", "3", "13", "23", "123"}
    back = element_from_json(data)
    assert np.array_equal(back.coeff, q.coeff)


def test_json_variants():
    assert element_from_json({"coeff": {"1": 1.0}}, 2).allclose(I)
    assert element_from_json({"12": 1.0}, 2).allclose(K)
    with pytest.raises(SignatureMismatch):
        element_from_json({"n": 3, "coeff": {}}, 2)
    with pytest.raises(AlgebraError):
        element_from_json({"coeff": {"4": 1.0}}, 3)
