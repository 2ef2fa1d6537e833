"""Infinite- and finite-width Gram matrices of the two-layer ReLU model."""

from __future__ import annotations

import csv
import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .harmonics import SpherePoints, make_rng

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-9


class KernelVariant(enum.Enum):
    BIAS_FREE = "bias-free"
    WITH_BIAS = "with-bias"

    @property
    def tag(self) -> int:
        return 0 if self is KernelVariant.BIAS_FREE else 1

    @classmethod
    def from_tag(cls, tag: int) -> "KernelVariant":
        return {0: cls.BIAS_FREE, 1: cls.WITH_BIAS}[int(tag)]

    @classmethod
    def parse(cls, value) -> "KernelVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "bias-free": cls.BIAS_FREE, "biasfree": cls.BIAS_FREE, "nobias": cls.BIAS_FREE,
            "no-bias": cls.BIAS_FREE, "free": cls.BIAS_FREE,
            "with-bias": cls.WITH_BIAS, "withbias": cls.WITH_BIAS, "bias": cls.WITH_BIAS,
        }
        if key not in aliases:
            raise ValueError(f"unknown kernel variant {value!r}")
        return aliases[key]


def _clamp(t):
    return np.clip(np.asarray(t, dtype=np.float64), -1.0, 1.0)


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def k_infinity(t):
    """Bias-free kernel t (pi - arccos t) / (2 pi)."""
    t = _clamp(t)
    return _scalar_or_array(t * (np.pi - np.arccos(t)) / (2 * np.pi))


def k_bar_infinity(t):
    """With-bias kernel (t + 1)(pi - arccos t) / (4 pi)."""
    t = _clamp(t)
    return _scalar_or_array((t + 1.0) * (np.pi - np.arccos(t)) / (4 * np.pi))


def kernel_function(variant: KernelVariant):
    return k_infinity if KernelVariant.parse(variant) is KernelVariant.BIAS_FREE else k_bar_infinity


def kernel_parts(t):
    """The four pieces K1..K4 with K1 + K2 = K and (K1 + K2 + K3 + K4) / 2 = K-bar."""
    t = _clamp(t)
    acos = np.arccos(t)
    k1 = t / 2
    k2 = -t * acos / (2 * np.pi)
    k3 = np.full_like(t, 0.5)
    k4 = -acos / (2 * np.pi)
    return tuple(_scalar_or_array(k) for k in (k1, k2, k3, k4))


def homogeneous_lift(x) -> np.ndarray:
    """Map unit vectors x to (x, 1)/sqrt(2); works row-wise on (n, D) arrays."""
    x = np.asarray(x, dtype=np.float64)
    ones = np.ones(x.shape[:-1] + (1,))
    return np.concatenate([x, ones], axis=-1) / np.sqrt(2.0)


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    variant: KernelVariant
    points: SpherePoints | None = None

    def __post_init__(self):
        h = np.asarray(self.entries, dtype=np.float64)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("a Gram matrix must be square")
        object.__setattr__(self, "entries", h)
        object.__setattr__(self, "variant", KernelVariant.parse(self.variant))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def is_symmetric(self, tol: float = SYMMETRY_TOL) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.T), initial=0.0) <= tol)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])

    def to_bytes(self) -> bytes:
        header = struct.pack("<QQ", self.n, self.variant.tag)
        return header + np.ascontiguousarray(self.entries, dtype="<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GramMatrix":
        n, tag = struct.unpack_from("<QQ", blob, 0)
        body = np.frombuffer(blob, dtype="<f8", offset=16)
        if body.size != n * n:
            raise ValueError(f"expected {n * n} entries, found {body.size}")
        return cls(body.reshape(n, n).astype(np.float64), KernelVariant.from_tag(tag))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "GramMatrix":
        return cls.from_bytes(Path(path).read_bytes())

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"c{j}" for j in range(self.n)])
            for row in self.entries:
                w.writerow([repr(float(v)) for v in row])


def gram_matrix(points: SpherePoints, variant: KernelVariant) -> GramMatrix:
    variant = KernelVariant.parse(variant)
    if len(points) < 1:
        raise ValueError("need at least one point")
    kern = kernel_function(variant)
    h = kern(points.inner_products())
    h = 0.5 * (h + h.T)
    return GramMatrix(np.atleast_2d(h), variant, points)


def empirical_gram(
    points: SpherePoints,
    variant: KernelVariant,
    m: int,
    kappa: float,
    seed: int,
    block: int = 4096,
) -> GramMatrix:
    """Finite-width Gram matrix H = Z^T Z at initialisation.

    Weights are N(0, kappa^2 I) and, for the bias variant, the bias
    coordinate starts at zero so the activity pattern is that of the raw
    points while the inner products are those of the lifted points.
    """
    variant = KernelVariant.parse(variant)
    if m < 1:
        raise ValueError("m must be >= 1")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    x = points.coords
    n, dim = x.shape
    w = kappa * make_rng(seed).standard_normal((m, dim))
    counts = np.zeros((n, n))
    for start in range(0, m, block):
        act = (x @ w[start:start + block].T >= 0.0).astype(np.float64)
        counts += act @ act.T
    inner = x @ x.T
    if variant is KernelVariant.WITH_BIAS:
        inner = (inner + 1.0) / 2.0
    return GramMatrix(inner * counts / m, variant, points)
