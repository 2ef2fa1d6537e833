"""Special functions and data geometry on the hypersphere.

Point sets are carried as :class:`SpherePoints`, an ``(n, D)`` array of unit
vectors plus the intrinsic sphere dimension ``d``.  When points have been
embedded in a larger ambient space the intrinsic coordinates are kept
alongside so that labels can be evaluated in the original frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NORM_TOL = 1e-12


@dataclass(frozen=True)
class SpherePoints:
    """Unit vectors on S^d, optionally embedded in R^D with D >= d+1."""

    coords: np.ndarray
    sphere_dim: int
    intrinsic: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        coords = np.ascontiguousarray(np.atleast_2d(np.asarray(self.coords, dtype=np.float64)))
        if self.sphere_dim < 1:
            raise ValueError(f"sphere_dim must be >= 1, got {self.sphere_dim}")
        if coords.shape[1] < self.sphere_dim + 1:
            raise ValueError(
                f"coordinates of length {coords.shape[1]} cannot hold points of S^{self.sphere_dim}"
            )
        norms = np.linalg.norm(coords, axis=1)
        if not np.all(np.abs(norms - 1.0) <= NORM_TOL * 10):
            raise ValueError("all points must have unit norm")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        intrinsic = self.intrinsic
        if intrinsic is None:
            if coords.shape[1] != self.sphere_dim + 1:
                raise ValueError("embedded points need their intrinsic coordinates")
            intrinsic = coords
        else:
            intrinsic = np.ascontiguousarray(np.atleast_2d(np.asarray(intrinsic, dtype=np.float64)))
            if intrinsic.shape != (coords.shape[0], self.sphere_dim + 1):
                raise ValueError("intrinsic coordinates have the wrong shape")
            intrinsic.setflags(write=False)
        object.__setattr__(self, "intrinsic", intrinsic)

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.coords.shape[1]

    @property
    def angles(self) -> np.ndarray:
        """Polar angle in [0, 2*pi) of circle points (d = 1 only)."""
        if self.sphere_dim != 1:
            raise ValueError("angles are only defined on S^1")
        return np.mod(np.arctan2(self.intrinsic[:, 1], self.intrinsic[:, 0]), 2 * np.pi)

    def inner_products(self) -> np.ndarray:
        """Clamped pairwise inner products, an (n, n) matrix."""
        return np.clip(self.coords @ self.coords.T, -1.0, 1.0)


@dataclass(frozen=True)
class HarmonicLabelSpec:
    """A pure harmonic target: cos(k*theta - phase) on S^1, zonal P_{k,d} about ``pole`` otherwise."""

    frequency: int
    sphere_dim: int
    phase: float = 0.0
    pole: np.ndarray | None = None

    def __post_init__(self):
        if self.frequency < 0:
            raise ValueError("frequency must be non-negative")
        if self.sphere_dim >= 2:
            if self.pole is None:
                raise ValueError("zonal labels on S^d, d >= 2, need a pole")
            pole = np.asarray(self.pole, dtype=np.float64).reshape(-1)
            if pole.shape[0] != self.sphere_dim + 1 or abs(np.linalg.norm(pole) - 1.0) > NORM_TOL * 10:
                raise ValueError("pole must be a unit vector of length d+1")
            object.__setattr__(self, "pole", pole)


def gegenbauer(k: int, d: int, t):
    """Gegenbauer polynomial P_{k,d}(t) normalised so that P_{k,d}(1) = 1.

    Uses the three-term recurrence

        (k + d - 1) P_{k+1} = (2k + d - 1) t P_k - k P_{k-1}

    with P_0 = 1 and P_1 = t.  Accepts scalars or arrays for ``t``.
    """
    if d < 2:
        raise ValueError(f"gegenbauer needs d >= 2, got d={d}")
    if k < 0:
        raise ValueError(f"degree must be non-negative, got k={k}")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(np.abs(t_arr) > 1.0 + 1e-12):
        raise ValueError("gegenbauer argument outside [-1, 1]")
    t_arr = np.clip(t_arr, -1.0, 1.0)
    prev = np.ones_like(t_arr)
    if k == 0:
        out = prev
    else:
        cur = t_arr.copy()
        for j in range(1, k):
            prev, cur = cur, ((2 * j + d - 1) * t_arr * cur - j * prev) / (j + d - 1)
        out = cur
    return float(out) if out.ndim == 0 else out


def circle_harmonic(k: int, phase: float, theta):
    """cos(k*theta - phase)."""
    return np.cos(k * np.asarray(theta, dtype=np.float64) - phase)


def harmonic_labels(points: SpherePoints, spec: HarmonicLabelSpec) -> np.ndarray:
    if points.sphere_dim != spec.sphere_dim:
        raise ValueError(
            f"points live on S^{points.sphere_dim} but labels are for S^{spec.sphere_dim}"
        )
    if spec.sphere_dim == 1:
        return circle_harmonic(spec.frequency, spec.phase, points.angles)
    t = np.clip(points.intrinsic @ spec.pole, -1.0, 1.0)
    return gegenbauer(spec.frequency, spec.sphere_dim, t)


def uniform_circle_grid(n: int) -> SpherePoints:
    if n < 2:
        raise ValueError("a circle grid needs at least 2 points")
    theta = 2 * np.pi * np.arange(n) / n
    return SpherePoints(np.column_stack([np.cos(theta), np.sin(theta)]), 1)


def is_uniform_circle_grid(points: SpherePoints, tol: float = 1e-9) -> bool:
    """True when the points are n equally spaced angles on S^1 starting at angle 0.

    Only the intrinsic frame is checked, so rotations into a larger ambient
    space are accepted.
    """
    if points.sphere_dim != 1 or len(points) < 2:
        return False
    n = len(points)
    expected = 2 * np.pi * np.arange(n) / n
    diff = np.angle(np.exp(1j * (points.angles - expected)))
    return bool(np.all(np.abs(diff) <= tol))


def make_rng(seed: int) -> np.random.Generator:
    """The one generator used everywhere: PCG64 seeded with an integer."""
    return np.random.Generator(np.random.PCG64(seed))


def sample_uniform_sphere(n: int, d: int, seed: int) -> SpherePoints:
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    g = make_rng(seed).standard_normal((n, d + 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return SpherePoints(g, d)


def random_pole(d: int, seed: int) -> np.ndarray:
    return sample_uniform_sphere(1, d, seed).coords[0].copy()


def random_isometry(in_dim: int, out_dim: int, seed: int) -> np.ndarray:
    """An (out_dim, in_dim) matrix with orthonormal columns (QR of a seeded Gaussian)."""
    if out_dim < in_dim:
        raise ValueError(f"cannot embed dimension {in_dim} isometrically into {out_dim}")
    q, r = np.linalg.qr(make_rng(seed).standard_normal((out_dim, in_dim)))
    # fix the sign ambiguity of QR so the map is a function of the seed alone
    return q * np.sign(np.diag(r))


def embed_random_rotation(points: SpherePoints, ambient_dim: int, seed: int) -> SpherePoints:
    d1 = points.sphere_dim + 1
    if ambient_dim < d1:
        raise ValueError(f"ambient_dim={ambient_dim} is smaller than d+1={d1}")
    q = random_isometry(d1, ambient_dim, seed)
    coords = points.intrinsic @ q.T
    # renormalise away the last ulp so the unit-norm invariant is exact
    coords /= np.linalg.norm(coords, axis=1, keepdims=True)
    return SpherePoints(coords, points.sphere_dim, intrinsic=points.intrinsic)


def sphere_area(d: int) -> float:
    """Surface measure of S^d, i.e. 2 pi^{(d+1)/2} / Gamma((d+1)/2)."""
    return 2 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2)
