"""Slice-regular operator calculus over quaternions and Clifford algebras R_n, checked numerically."""

from .algebra import (
    AlgebraSignature,
    ConeDecomposition,
    Multivector,
    cone_decompose,
    phi,
    quaternion,
    signature,
)
from .operators import ModuleVector, RightLinearOperator, spherical_C, spherical_Q, spherical_spectrum
from .report import SemigroupReport
from .semigroup import ContourSpec, contour_semigroup, exp_semigroup, laplace_transform
from .stems import StemFunction, exp_stem, induce, slice_product

__version__ = "0.1.0"

__all__ = [
    "AlgebraSignature",
    "ConeDecomposition",
    "ContourSpec",
    "ModuleVector",
    "Multivector",
    "RightLinearOperator",
    "SemigroupReport",
    "StemFunction",
    "cone_decompose",
    "contour_semigroup",
    "exp_semigroup",
    "exp_stem",
    "induce",
    "laplace_transform",
    "phi",
    "quaternion",
    "signature",
    "slice_product",
    "spherical_C",
    "spherical_Q",
    "spherical_spectrum",
]
