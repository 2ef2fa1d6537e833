"""Linear forecast of full-batch gradient descent in the infinite-width regime.

With Gram matrix H = sum_i lambda_i v_i v_i^T and labels y, the residual of the
linearised dynamics u <- u + eta H (y - u), started from u = 0, is

    ||y - u(t)|| = ( sum_i (1 - eta lambda_i)^{2t} (v_i^T y)^2 )^{1/2}.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .harmonics import sphere_area
from .kernels import GramMatrix, KernelVariant
from .spectra import closed_form_coefficient, eigen_quadrature, matrix_spectrum

NULL_EIGENVALUE = 1e-12


class StepSizeError(ValueError):
    """eta * lambda_max >= 1: the forecast would oscillate or diverge."""


@dataclass(frozen=True)
class LinearForecast:
    eigenvalues: np.ndarray
    projections: np.ndarray
    eta: float
    initial_residual_norm: float
    eigenvectors: np.ndarray | None = None

    def __post_init__(self):
        if self.eigenvalues.shape != self.projections.shape:
            raise ValueError("eigenvalues and projections must have equal length")

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class ThresholdQuery:
    target_fraction: float
    slack: float = 0.0

    def __post_init__(self):
        if not 0 < self.target_fraction < 1:
            raise ValueError("target_fraction must lie in (0, 1)")
        if self.slack < 0:
            raise ValueError("slack must be non-negative")
        if self.target_fraction + self.slack >= 1:
            raise ValueError("target_fraction + slack must be below 1")

    @property
    def level(self) -> float:
        return self.target_fraction + self.slack


def build_forecast(gram: GramMatrix, labels, eta: float) -> LinearForecast:
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if y.shape[0] != gram.n:
        raise ValueError(f"{y.shape[0]} labels for a {gram.n}x{gram.n} Gram matrix")
    if eta <= 0:
        raise ValueError("eta must be positive")
    spec = matrix_spectrum(gram)
    lam = spec.eigenvalues
    if eta * lam[0] >= 1:
        raise StepSizeError(f"eta * lambda_max = {eta * lam[0]:.4g} >= 1")
    proj = spec.eigenvectors.T @ y
    return LinearForecast(lam.copy(), proj, float(eta), float(np.linalg.norm(y)), spec.eigenvectors)


def residual_at(forecast: LinearForecast, t):
    """Predicted ||y - u(t)||; accepts an integer or an array of iterations."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    decay = np.abs(1.0 - forecast.eta * forecast.eigenvalues)
    terms = np.power(decay, 2.0 * t_arr[..., None]) * forecast.projections ** 2
    out = np.sqrt(terms.sum(axis=-1))
    return float(out) if out.ndim == 0 else out


def residual_curve(forecast: LinearForecast, steps: int) -> np.ndarray:
    """residual_at for t = 0..steps, by exact repeated multiplication."""
    factor = (1.0 - forecast.eta * forecast.eigenvalues) ** 2
    energy = forecast.projections ** 2
    out = np.empty(steps + 1)
    for t in range(steps + 1):
        out[t] = math.sqrt(energy.sum())
        energy = energy * factor
    return out


def predicted_iterations(lam: float, eta: float, query: ThresholdQuery, exact: bool = False) -> float:
    """Unrounded iteration estimate; ``inf`` for a null eigenvalue."""
    if lam <= NULL_EIGENVALUE:
        return math.inf
    rate = eta * lam
    if not 0 < rate < 1:
        raise ValueError(f"eta * lambda = {rate:.4g} is outside (0, 1)")
    if exact:
        return math.log(query.level) / math.log1p(-rate)
    return -math.log(query.level) / rate


def iterations_to_fraction(lam: float, eta: float, query: ThresholdQuery, exact: bool = False):
    """Iterations for the mode with eigenvalue ``lam`` to shrink to ``query.level``.

    Default is the small-step estimate ceil(-log(level) / (eta lambda)); with
    ``exact=True`` it is ceil(log(level) / log(1 - eta lambda)).  Null
    eigenvalues return ``math.inf`` (the mode never converges).
    """
    est = predicted_iterations(lam, eta, query, exact)
    return est if math.isinf(est) else int(math.ceil(est - 1e-12))


def generalization_bound(alphas, n: int) -> float:
    """sqrt(2 pi sum_k alpha_k^2 k^2 / n) with alphas[0] the k = 1 amplitude."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a = np.asarray(alphas, dtype=np.float64).reshape(-1)
    k = np.arange(1, a.shape[0] + 1)
    return float(math.sqrt(2 * math.pi * float(np.sum(a * a * k * k)) / n))


def grid_eigenvalue(variant: KernelVariant, k: int, d: int, n: int) -> float:
    """Gram eigenvalue for frequency k on n uniform points of S^d, from the continuum coefficient.

    On S^1 this is n z_k c_k / (2 pi); on S^d it is n c_k / Vol(S^d).  Odd d
    falls back to quadrature.
    """
    if d == 1:
        z = 2 * math.pi if k == 0 else math.pi
        return n * z * closed_form_coefficient(variant, k, 1) / (2 * math.pi)
    coef = closed_form_coefficient(variant, k, d) if d % 2 == 0 else eigen_quadrature(variant, k, d)
    return n * coef / sphere_area(d)


def threshold_table(variant: KernelVariant, d: int, ks, n: int, eta: float, query: ThresholdQuery):
    """Rows (k, lambda, predicted_iterations) for each frequency."""
    rows = []
    for k in ks:
        lam = grid_eigenvalue(variant, k, d, n)
        rows.append((int(k), lam, iterations_to_fraction(lam, eta, query)))
    return rows


def write_forecast_csv(path, forecast: LinearForecast, steps: int) -> None:
    curve = residual_curve(forecast, steps)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "predicted_residual"])
        for t, r in enumerate(curve):
            w.writerow([t, repr(float(r))])


def write_threshold_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "lambda", "predicted_iterations"])
        for k, lam, it in rows:
            w.writerow([k, repr(float(lam)), "inf" if math.isinf(it) else it])
