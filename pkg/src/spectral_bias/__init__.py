"""Frequency-resolved training dynamics of wide two-layer ReLU networks."""

from .harmonics import (
    HarmonicLabelSpec,
    SpherePoints,
    circle_harmonic,
    embed_random_rotation,
    gegenbauer,
    harmonic_labels,
    sample_uniform_sphere,
    uniform_circle_grid,
)
from .kernels import (
    GramMatrix,
    KernelVariant,
    empirical_gram,
    gram_matrix,
    homogeneous_lift,
    k_bar_infinity,
    k_infinity,
    kernel_parts,
)
from .spectra import (
    Source,
    SpectrumEntry,
    circle_coefficient,
    convergence_exponent,
    eigen_quadrature,
    matrix_spectrum,
    reference_integrals,
    sphere_coefficient,
)

__version__ = "0.1.0"

__all__ = [
    "GramMatrix",
    "HarmonicLabelSpec",
    "KernelVariant",
    "Source",
    "SpectrumEntry",
    "SpherePoints",
    "circle_coefficient",
    "circle_harmonic",
    "convergence_exponent",
    "eigen_quadrature",
    "embed_random_rotation",
    "empirical_gram",
    "gegenbauer",
    "gram_matrix",
    "harmonic_labels",
    "homogeneous_lift",
    "k_bar_infinity",
    "k_infinity",
    "kernel_parts",
    "matrix_spectrum",
    "reference_integrals",
    "sample_uniform_sphere",
    "sphere_coefficient",
    "uniform_circle_grid",
]
