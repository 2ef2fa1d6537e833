"""Eigenvalues of the kernels, computed three independent ways.

* closed form: Fourier coefficients on S^1 and exact-rational Funk-Hecke
  coefficients on S^d for even d;
* quadrature: Gauss-Legendre on the Funk-Hecke integral, with node doubling;
* matrix: eigendecomposition of a discretised Gram matrix.

On S^d (d >= 2) the eigenvalue of frequency k is

    Vol(S^{d-1}) * int_{-1}^{1} K(t) P_{k,d}(t) (1 - t^2)^{(d-2)/2} dt

where Vol(S^{d-1}) is the surface measure of the unit (d-1)-sphere, so that
Vol(S^1) = 2 pi.  On S^1 the coefficient is the Fourier cosine coefficient
(1/z_k) int_{-pi}^{pi} K(cos theta) cos(k theta) d theta with z_0 = 2 pi and
z_k = pi.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .harmonics import gegenbauer, is_uniform_circle_grid, sphere_area
from .kernels import GramMatrix, KernelVariant, kernel_function


class Source(enum.Enum):
    CLOSED_FORM = "closed-form"
    QUADRATURE = "quadrature"
    MATRIX = "matrix"


@dataclass(frozen=True)
class SpectrumEntry:
    k: int
    d: int
    variant: KernelVariant
    value: float
    source: Source


class QuadratureError(RuntimeError):
    """Node doubling did not settle below the requested tolerance."""


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


def sphere_volume(dim: int) -> float:
    """Surface measure of S^dim (Vol(S^1) = 2 pi, Vol(S^3) = 2 pi^2)."""
    if dim == 0:
        return 2.0
    return sphere_area(dim)


def binom_p(d: int, k: int) -> int:
    """p = k + (d - 2)/2, the power in the Rodrigues form (even d only)."""
    _require_even(d)
    return k + (d - 2) // 2


def c2(q: int, d: int, k: int) -> int:
    """(-1)^q C(p, q) (2q)! / (2q - k)!: coefficient of t^{2q-k} in d^k/dt^k (1 - t^2)^p."""
    p = binom_p(d, k)
    if 2 * q < k:
        return 0
    return (-1) ** q * math.comb(p, q) * math.perm(2 * q, k)


def c1_rational(d: int, k: int) -> Fraction:
    """C1(d, k) / pi^{d/2} as an exact rational (even d).

    C1 = Vol(S^{d-1}) * Gamma(d/2) / Gamma(k + d/2) * (-1)^k / 2^k
       = 2 pi^{d/2} (-1)^k / (2^k (k + d/2 - 1)!).
    """
    _require_even(d)
    return Fraction(2 * (-1) ** k, 2 ** k * math.factorial(k + d // 2 - 1))


def c1(d: int, k: int) -> float:
    return float(c1_rational(d, k)) * math.pi ** (d // 2)


def _require_even(d: int) -> None:
    if d < 2 or d % 2:
        raise ValueError(f"closed forms exist for even d >= 2 only, got d={d}")


# ---------------------------------------------------------------------------
# reference integrals over [0, pi]
# ---------------------------------------------------------------------------

REFERENCE_INTEGRALS = ("cos_pow", "sin_pow", "theta_cos_pow_sin", "theta_cos_sin_pow")


def _half_central(n: int) -> Fraction:
    """C(n, n/2) / 2^n for even n."""
    return Fraction(math.comb(n, n // 2), 2 ** n)


def reference_integral_parts(name: str, n: int) -> tuple[Fraction, Fraction]:
    """Value of a reference integral as (rational, coefficient of pi)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    zero = Fraction(0)
    if name == "cos_pow":  # int cos^n
        return (zero, _half_central(n)) if n % 2 == 0 else (zero, zero)
    if name == "sin_pow":  # int sin^n
        if n % 2 == 0:
            return zero, _half_central(n)
        return Fraction(2 ** (n + 1), (n + 1) * math.comb(n, (n + 1) // 2)), zero
    if name == "theta_cos_pow_sin":  # int theta cos^n sin
        if n % 2 == 0:
            return zero, Fraction(1, n + 1)
        return zero, Fraction(1, n + 1) * (_half_central(n + 1) - 1)
    if name == "theta_cos_sin_pow":  # int theta cos sin^n
        if n % 2 == 0:
            return Fraction(-(2 ** (n + 2)), (n + 1) * (n + 2) * math.comb(n + 1, (n + 2) // 2)), zero
        return zero, -Fraction(math.comb(n + 1, (n + 1) // 2), (n + 1) * 2 ** (n + 1))
    raise ValueError(f"unknown reference integral {name!r}; choose from {REFERENCE_INTEGRALS}")


def reference_integrals(name: str, n: int) -> float:
    rational, pi_coef = reference_integral_parts(name, n)
    return float(rational) + float(pi_coef) * math.pi


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def circle_coefficient(variant: KernelVariant, k: int) -> float:
    """Fourier coefficient of the kernel on S^1 at frequency k."""
    variant = KernelVariant.parse(variant)
    if k < 0:
        raise ValueError("k must be non-negative")
    pi2 = math.pi ** 2
    if variant is KernelVariant.BIAS_FREE:
        if k == 0:
            return 1 / pi2
        if k == 1:
            return 0.25
        if k % 2 == 0:
            return 2 * (k * k + 1) / (pi2 * (k * k - 1) ** 2)
        return 0.0
    if k == 0:
        return 1 / (2 * pi2) + 1 / 8
    if k == 1:
        return 1 / pi2 + 1 / 8
    if k % 2 == 0:
        return (k * k + 1) / (pi2 * (k * k - 1) ** 2)
    return 1 / (pi2 * k * k)


def _dc_parts(d: int) -> tuple[Fraction, Fraction]:
    """k = 0 bracket terms (bias-free part, bias-only part), without C1."""
    h = (d - 2) // 2
    a = Fraction(math.comb(d, d // 2), d * 2 ** (d + 1))
    b = Fraction(2 ** (d - 1), d * math.comb(d - 1, d // 2)) - Fraction(1, 2) * sum(
        (Fraction((-1) ** q * math.comb(h, q), 2 * q + 1) for q in range(h + 1)), Fraction(0)
    )
    return a, b


@lru_cache(maxsize=None)
def _sphere_sums(k: int, d: int) -> tuple[Fraction, Fraction]:
    """(a_k^d, b_k^d) / pi^{d/2} as exact rationals.

    a is the coefficient of the bias-free kernel K1 + K2, b that of the bias
    part K3 + K4, both already multiplied by C1.
    """
    _require_even(d)
    pref = c1_rational(d, k)
    if k == 0:
        a, b = _dc_parts(d)
        return pref * a, pref * b
    p = binom_p(d, k)
    q0 = (k + 1) // 2
    # C2(q), central binomials and the power-of-two denominators are updated
    # incrementally in q; recomputing factorials dominates the cost otherwise
    coef = c2(q0, d, k)
    n0 = 2 * q0 - k
    cb1 = math.comb(n0 + 1, (n0 + 1) // 2)  # used when n + 1 is even (k odd)
    cb2 = math.comb(n0 + 2, (n0 + 2) // 2)  # used when n + 2 is even (k even)
    sa = Fraction(0)
    sb = Fraction(0)
    for q in range(q0, p + 1):
        n = 2 * q - k
        if k % 2 == 0:
            sa += Fraction(coef * (2 ** (n + 2) - cb2), 2 * (n + 2) * 2 ** (n + 2))
            sb -= Fraction(coef, 2 * (n + 1))
        else:
            sa += Fraction(coef, 2 * (n + 2))
            sb += Fraction(coef * (2 ** (n + 1) - cb1), 2 * (n + 1) * 2 ** (n + 1))
        # advance q -> q + 1, i.e. n -> n + 2
        coef = -coef * (p - q) * (2 * q + 2) * (2 * q + 1) // ((q + 1) * (n + 2) * (n + 1))
        if k % 2:
            cb1 = cb1 * (n + 3) * (n + 2) // (((n + 3) // 2) ** 2)
        else:
            cb2 = cb2 * (n + 4) * (n + 3) // (((n + 4) // 2) ** 2)
    return pref * sa, pref * sb


def sphere_coefficient_exact(variant: KernelVariant, k: int, d: int) -> Fraction:
    """The coefficient divided by pi^{d/2}, exactly."""
    variant = KernelVariant.parse(variant)
    if k < 0:
        raise ValueError("k must be non-negative")
    a, b = _sphere_sums(k, d)
    if variant is KernelVariant.BIAS_FREE:
        return a
    return (a + b) / 2


def sphere_coefficient(variant: KernelVariant, k: int, d: int) -> float:
    """Closed-form Funk-Hecke eigenvalue of the kernel on S^d, d even."""
    return float(sphere_coefficient_exact(variant, k, d)) * math.pi ** (d // 2)


def closed_form_coefficient(variant: KernelVariant, k: int, d: int) -> float:
    if d == 1:
        return circle_coefficient(variant, k)
    return sphere_coefficient(variant, k, d)


# ---------------------------------------------------------------------------
# quadrature oracle
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _theta_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(nodes)
    return np.pi * (x + 1) / 2, w * np.pi / 2


def _theta_integral(variant: KernelVariant, k: int, d: int, nodes: int) -> float:
    theta, w = _theta_rule(nodes)
    t = np.cos(theta)
    kern = kernel_function(variant)(t)
    if d == 1:
        z = 2 * np.pi if k == 0 else np.pi
        return float(2 * np.sum(w * kern * np.cos(k * theta)) / z)
    # t = cos(theta) turns the weight (1 - t^2)^{(d-2)/2} dt into sin^{d-1} d theta
    integrand = kern * gegenbauer(k, d, t) * np.sin(theta) ** (d - 1)
    return float(sphere_volume(d - 1) * np.sum(w * integrand))


def eigen_quadrature(
    variant: KernelVariant,
    k: int,
    d: int,
    nodes: int | None = None,
    tol: float = 1e-10,
    max_nodes: int = 1 << 15,
) -> float:
    """Funk-Hecke eigenvalue by Gauss-Legendre quadrature in the polar angle.

    Starts from ``nodes`` (default scales with k) and doubles until two
    successive estimates differ by less than ``tol``.
    """
    variant = KernelVariant.parse(variant)
    if d < 1 or k < 0:
        raise ValueError("need d >= 1 and k >= 0")
    nodes = nodes or max(64, 2 * k + 32)
    prev = _theta_integral(variant, k, d, nodes)
    while nodes < max_nodes:
        nodes *= 2
        cur = _theta_integral(variant, k, d, nodes)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise QuadratureError(
        f"quadrature for k={k}, d={d} did not converge to {tol:g} within {max_nodes} nodes"
    )


# ---------------------------------------------------------------------------
# matrix route
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatrixSpectrum:
    """Eigenpairs in descending eigenvalue order.

    ``frequencies`` holds the Fourier frequency of each eigenvector when the
    circulant route was used and -1 otherwise.  ``entries`` lists one
    :class:`SpectrumEntry` per frequency in coefficient units (circulant
    route only).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    frequencies: np.ndarray
    entries: tuple[SpectrumEntry, ...] = ()

    def frequency_eigenvalue(self, k: int) -> float:
        idx = np.flatnonzero(self.frequencies == k)
        if idx.size == 0:
            raise KeyError(k)
        return float(self.eigenvalues[idx[0]])


def fourier_basis(n: int, k: int) -> np.ndarray:
    """Orthonormal columns spanning frequency k on an n-point circle grid."""
    theta = 2 * np.pi * np.arange(n) / n
    if k == 0 or 2 * k == n:
        v = np.cos(k * theta)
        return (v / np.linalg.norm(v))[:, None]
    basis = np.column_stack([np.cos(k * theta), np.sin(k * theta)])
    return basis / np.linalg.norm(basis, axis=0)


def circulant_eigenvalues(first_row: np.ndarray) -> np.ndarray:
    """lambda(k) = sum_j K(theta_j) cos(k theta_j) for k = 0..n//2."""
    n = first_row.shape[0]
    theta = 2 * np.pi * np.arange(n) / n
    ks = np.arange(n // 2 + 1)
    return np.cos(np.outer(ks, theta)) @ first_row


def _circulant_spectrum(gram: GramMatrix) -> MatrixSpectrum:
    n = gram.n
    lam_k = circulant_eigenvalues(gram.entries[0])
    vals, vecs, freqs = [], [], []
    for k, lam in enumerate(lam_k):
        basis = fourier_basis(n, k)
        for col in basis.T:
            vals.append(lam)
            vecs.append(col)
            freqs.append(k)
    vals = np.asarray(vals)
    order = np.argsort(-vals, kind="stable")
    scale = 2 * np.pi / n
    entries = tuple(
        SpectrumEntry(k, 1, gram.variant, float(scale * lam / (2 * np.pi if k == 0 else np.pi)), Source.MATRIX)
        for k, lam in enumerate(lam_k)
    )
    return MatrixSpectrum(vals[order], np.column_stack(vecs)[:, order], np.asarray(freqs)[order], entries)


def matrix_spectrum(gram: GramMatrix, method: str = "auto") -> MatrixSpectrum:
    """Full eigendecomposition of a Gram matrix, eigenvalues descending.

    ``method`` is ``"circulant"`` (uniform circle grids only), ``"dense"``
    (LAPACK symmetric solver) or ``"auto"``.
    """
    h = gram.entries
    if np.max(np.abs(h - h.T), initial=0.0) > 1e-10:
        raise ValueError("matrix is not symmetric")
    if method not in ("auto", "dense", "circulant"):
        raise ValueError(f"unknown method {method!r}")
    grid = gram.points is not None and is_uniform_circle_grid(gram.points)
    if method == "circulant" and not grid:
        raise ValueError("circulant route needs a uniform circle grid")
    if method == "circulant" or (method == "auto" and grid):
        return _circulant_spectrum(gram)
    vals, vecs = np.linalg.eigh(0.5 * (h + h.T))
    return MatrixSpectrum(vals[::-1].copy(), vecs[:, ::-1].copy(), np.full(gram.n, -1))


def subspace_alignment(vectors: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Norm of the projection of each unit column of ``vectors`` onto span(basis).

    Both arguments have one vector per column; ``basis`` must be orthonormal.
    The result is the |cosine| between each vector and the subspace.
    """
    vectors = np.atleast_2d(vectors.T).T
    proj = basis.T @ vectors
    return np.linalg.norm(proj, axis=0) / np.linalg.norm(vectors, axis=0)


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles (radians) between the column spans of a and b."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


def rayleigh_coefficient(gram: GramMatrix, vector: np.ndarray, sphere_dim: int) -> float:
    """Coefficient-unit eigenvalue estimate Vol(S^d)/n * v^T H v / v^T v.

    For approximately uniform samples and a pure harmonic v this converges
    to the Funk-Hecke coefficient as n grows.
    """
    v = np.asarray(vector, dtype=np.float64)
    return float(sphere_area(sphere_dim) / gram.n * (v @ gram.entries @ v) / (v @ v))


# ---------------------------------------------------------------------------
# decay exponent
# ---------------------------------------------------------------------------


def convergence_exponent(variant: KernelVariant, d: int, k_max: int) -> float:
    """Least-squares slope of -log(coefficient) against log(k) over [k_max/2, k_max].

    Coefficients that are exactly zero (odd k of the bias-free kernel) are
    skipped.
    """
    variant = KernelVariant.parse(variant)
    if k_max < 100:
        raise ValueError("k_max must be at least 100")
    if d != 1:
        _require_even(d)
    ks, vals = [], []
    for k in range(k_max // 2, k_max + 1):
        if d == 1:
            value = circle_coefficient(variant, k)
        else:
            value = float(sphere_coefficient_exact(variant, k, d))  # pi^{d/2} only shifts the intercept
        if value > 0:
            ks.append(k)
            vals.append(value)
    slope, _ = np.polyfit(np.log(ks), -np.log(vals), 1)
    return float(slope)
