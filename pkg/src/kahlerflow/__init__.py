"""Kähler-Ricci flow laboratory for U(n)-invariant metrics on CP^n."""

__version__ = "0.1.0"

from .errors import ERROR_CODES, KahlerFlowError  # noqa: E402
from .radial import (  # noqa: E402
    ClassData,
    CurvatureFields,
    RadialProfile,
    bisectional_range,
    curvature_fields,
    diameter,
    integrate,
    lambda1_radial,
    make_fubini_study,
    make_perturbed,
    total_volume,
)

__all__ = [
    "ERROR_CODES",
    "KahlerFlowError",
    "ClassData",
    "CurvatureFields",
    "RadialProfile",
    "bisectional_range",
    "curvature_fields",
    "diameter",
    "integrate",
    "lambda1_radial",
    "make_fubini_study",
    "make_perturbed",
    "total_volume",
]
