"""Small self-contained experiments: mode ordering, odd-frequency interpolation,
cross-entropy sweep and the three-source spectrum table."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..harmonics import (
    HarmonicLabelSpec,
    circle_harmonic,
    harmonic_labels,
    random_pole,
    sample_uniform_sphere,
    uniform_circle_grid,
)
from ..kernels import KernelVariant, gram_matrix
from ..nets import (
    DeepNetSpec,
    Init,
    Loss,
    TrainConfig,
    fit_readout,
    init_two_layer,
    readout_outputs,
    train_full_batch,
)
from ..spectra import (
    QuadratureError,
    closed_form_coefficient,
    eigen_quadrature,
    fourier_basis,
    matrix_spectrum,
    rayleigh_coefficient,
)
from .svg import Plot, panel_grid
from .sweep import SweepResult, SweepSpec, run_sweep


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _circle_inputs(theta: np.ndarray) -> np.ndarray:
    return np.column_stack([np.cos(theta), np.sin(theta)])


def frequency_energy(values: np.ndarray) -> np.ndarray:
    """Energy of a sampled periodic signal per frequency k = 0..n//2 (sums to ||values||^2)."""
    n = values.shape[0]
    spec = np.abs(np.fft.rfft(values)) ** 2 / n
    spec[1:] *= 2
    if n % 2 == 0:
        spec[-1] /= 2
    return spec


def dominant_frequency(vector: np.ndarray) -> int:
    return int(np.argmax(frequency_energy(vector)))


# ---------------------------------------------------------------------------
# two sines
# ---------------------------------------------------------------------------


@dataclass
class TwoSinesConfig:
    n: int = 256
    m: int = 8000
    kappa: float = 5.0
    eta: float = 0.02
    max_epochs: int = 2000
    low: int = 4
    high: int = 14
    with_bias: bool = True
    threshold: float = 0.1
    snapshots: tuple = (0, 50, 200, 1000)
    seed: int = 0


@dataclass
class TwoSinesReport:
    config: TwoSinesConfig
    target_energy: dict
    initial_energy: dict
    epochs_to_threshold: dict
    max_dc_fraction: float
    final_residual: float
    energy_trace: dict = field(repr=False, default_factory=dict)
    snapshots: dict = field(repr=False, default_factory=dict)

    @property
    def ratio(self) -> float | None:
        lo = self.epochs_to_threshold[self.config.low]
        hi = self.epochs_to_threshold[self.config.high]
        if lo is None or hi is None:
            return None
        return hi / max(lo, 1)

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["snapshots"] = list(self.config.snapshots)
        return {
            "config": cfg,
            "target_energy": {str(k): v for k, v in self.target_energy.items()},
            "initial_energy": {str(k): v for k, v in self.initial_energy.items()},
            "epochs_to_threshold": {str(k): v for k, v in self.epochs_to_threshold.items()},
            "epoch_ratio": self.ratio,
            "max_dc_fraction": self.max_dc_fraction,
            "final_residual": self.final_residual,
        }

    def plot(self) -> str:
        theta = 2 * np.pi * np.arange(self.config.n) / self.config.n
        target = np.sin(self.config.low * theta) + np.sin(self.config.high * theta)
        fits = Plot(title="target and network output", xlabel="theta", ylabel="value")
        fits.add(theta, target, label="target", color="#000000")
        for epoch in sorted(self.snapshots):
            fits.add(theta, self.snapshots[epoch], label=f"epoch {epoch}")
        modes = Plot(title="residual energy per mode", xlabel="epoch", ylabel="fraction of initial", logy=True)
        for k in (self.config.low, self.config.high):
            trace = np.asarray(self.energy_trace[k])
            modes.add(np.arange(trace.shape[0]), trace / trace[0], label=f"k={k}")
        return panel_grid([fits, modes], 2)

    def save(self, out_dir, fmt: str = "csv") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "two_sines.json", out / f"two_sines_modes.{fmt}", out / "two_sines.svg"]
        _write_json(paths[0], self.to_dict())
        low, high = self.config.low, self.config.high
        rows = [
            (t, repr(float(self.energy_trace[low][t])), repr(float(self.energy_trace[high][t])))
            for t in range(len(self.energy_trace[low]))
        ]
        write_table(paths[1], ["epoch", f"energy_k{low}", f"energy_k{high}"], rows, fmt)
        paths[2].write_text(self.plot(), encoding="utf-8")
        return paths


def demo_two_sines(config: TwoSinesConfig | None = None) -> TwoSinesReport:
    """Train on sin(low theta) + sin(high theta) and track each mode of the residual."""
    cfg = config or TwoSinesConfig()
    points = uniform_circle_grid(cfg.n)
    theta = points.angles
    y = np.sin(cfg.low * theta) + np.sin(cfg.high * theta)
    bases = {k: fourier_basis(cfg.n, k) for k in (0, cfg.low, cfg.high)}
    trace = {k: [] for k in bases}
    totals = []
    snaps = {}
    wanted = set(cfg.snapshots)

    def record(epoch, u):
        r = y - u
        totals.append(float(r @ r))
        for k, b in bases.items():
            p = b.T @ r
            trace[k].append(float(p @ p))
        if epoch in wanted:
            snaps[epoch] = u.copy()

    net = init_two_layer(cfg.m, 1, cfg.kappa, cfg.with_bias, cfg.seed)
    # run to the epoch budget; the mode thresholds are what matter here
    run = train_full_batch(net, points, y, TrainConfig(cfg.eta, cfg.max_epochs, 1e-6), callback=record)

    reached = {}
    for k in (cfg.low, cfg.high):
        e = np.asarray(trace[k])
        hit = np.flatnonzero(e <= cfg.threshold * e[0])
        reached[k] = int(hit[0]) if hit.size else None
    dc = max(d / t for d, t in zip(trace[0], totals) if t > 0)
    target = {k: float((bases[k].T @ y) @ (bases[k].T @ y)) for k in (cfg.low, cfg.high)}
    return TwoSinesReport(
        cfg,
        target,
        {k: trace[k][0] for k in (cfg.low, cfg.high)},
        reached,
        float(dc),
        float(run.residual_trace[-1]),
        {k: trace[k] for k in (cfg.low, cfg.high)},
        snaps,
    )


# ---------------------------------------------------------------------------
# odd-frequency interpolation
# ---------------------------------------------------------------------------


@dataclass
class OddConfig:
    n_train: int = 51
    m: int = 2000
    kappa: float = 1.0
    frequency: int = 3
    dense_n: int = 10_000
    with_bias: bool = False
    readout_only: bool = True
    eta: float = 0.01
    max_epochs: int = 5000
    seed: int = 0


@dataclass
class OddReport:
    config: OddConfig
    train_relative_residual: float
    dense_relative_error: float
    odd_energy_fraction: float
    dense_theta: np.ndarray = field(repr=False, default=None)
    dense_output: np.ndarray = field(repr=False, default=None)
    train_theta: np.ndarray = field(repr=False, default=None)
    train_labels: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "train_relative_residual": self.train_relative_residual,
            "dense_relative_error": self.dense_relative_error,
            "odd_energy_fraction": self.odd_energy_fraction,
        }

    def plot(self) -> Plot:
        k = self.config.frequency
        p = Plot(title=f"fit to cos({k} theta), {self.config.n_train} points", xlabel="theta", ylabel="value")
        p.add(self.dense_theta[::10], np.cos(k * self.dense_theta[::10]), label="target", color="#7f7f7f")
        p.add(self.dense_theta[::10], self.dense_output[::10], label="network", color="#ff7f0e")
        p.add(self.train_theta, self.train_labels, label="training points", style="points", color="#000000")
        return p

    def save(self, out_dir, fmt: str = "csv") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"odd_k{self.config.frequency}"
        paths = [out / f"{stem}.json", out / f"{stem}_curve.{fmt}", out / f"{stem}.svg"]
        _write_json(paths[0], self.to_dict())
        rows = [(repr(float(t)), repr(float(u))) for t, u in zip(self.dense_theta, self.dense_output)]
        write_table(paths[1], ["theta", "output"], rows, fmt)
        self.plot().save(paths[2])
        return paths


def demo_odd_interpolation(config: OddConfig | None = None) -> OddReport:
    """Fit cos(k theta) on a sparse grid and measure the off-sample error on a dense grid."""
    cfg = config or OddConfig()
    train = uniform_circle_grid(cfg.n_train)
    y = circle_harmonic(cfg.frequency, 0.0, train.angles)
    dense_theta = 2 * np.pi * np.arange(cfg.dense_n) / cfg.dense_n
    dense_x = _circle_inputs(dense_theta)
    net = init_two_layer(cfg.m, 1, cfg.kappa, cfg.with_bias, cfg.seed)
    if cfg.readout_only:
        readout = fit_readout(net, train.coords, y)
        u_train = readout_outputs(net, train.coords, readout)
        u_dense = readout_outputs(net, dense_x, readout)
    else:
        run = train_full_batch(net, train, y, TrainConfig(cfg.eta, cfg.max_epochs))
        u_train = run.final_params.outputs(train.coords)
        u_dense = run.final_params.outputs(dense_x)
    f_dense = np.cos(cfg.frequency * dense_theta)
    energy = frequency_energy(u_dense)
    odd = energy[3::2].sum()
    return OddReport(
        cfg,
        float(np.linalg.norm(y - u_train) / np.linalg.norm(y)),
        float(np.linalg.norm(f_dense - u_dense) / np.linalg.norm(f_dense)),
        float(odd / energy.sum()),
        dense_theta,
        u_dense,
        train.angles,
        y,
    )


# ---------------------------------------------------------------------------
# cross-entropy sweep
# ---------------------------------------------------------------------------


@dataclass
class CrossEntropyConfig:
    freqs: tuple = (1, 2, 3, 4, 5, 6)
    n: int = 256
    hidden_layers: int = 4
    width: int = 64
    skip_connections: bool = True
    eta: float = 0.05
    max_epochs: int = 20_000
    seeds: int = 1
    seed: int = 0
    workers: int = 1


def demo_cross_entropy(config: CrossEntropyConfig | None = None) -> SweepResult:
    """Deep residual network on thresholded cos(k theta) classes with logistic loss."""
    cfg = config or CrossEntropyConfig()
    spec = SweepSpec(
        d=1,
        model=DeepNetSpec(cfg.hidden_layers, cfg.width, cfg.skip_connections, True, Init.HE),
        freqs=tuple(cfg.freqs),
        n=cfg.n,
        m=cfg.width,
        eta=cfg.eta,
        max_epochs=cfg.max_epochs,
        seeds=cfg.seeds,
        loss=Loss.CROSS_ENTROPY,
        seed=cfg.seed,
        workers=cfg.workers,
    )
    return run_sweep(spec)


# ---------------------------------------------------------------------------
# spectrum table and eigenvector panels
# ---------------------------------------------------------------------------

SOURCES = ("closed-form", "quadrature", "matrix")


@dataclass
class SpectrumReport:
    rows: list
    top_frequencies: dict
    bottom_frequencies: dict
    eigenvectors: dict = field(repr=False, default_factory=dict)
    eig_n: int = 0

    def plot(self) -> str:
        panels = []
        theta = 2 * np.pi * np.arange(self.eig_n) / self.eig_n
        for variant, (top, bottom) in self.eigenvectors.items():
            for label, vecs, freqs in (("top", top, self.top_frequencies[variant]), ("bottom", bottom, self.bottom_frequencies[variant])):
                for j in range(vecs.shape[1]):
                    p = Plot(title=f"{variant} {label} {j + 1} (k={freqs[j]})", width=320, height=200)
                    p.add(theta, vecs[:, j])
                    panels.append(p)
        return panel_grid(panels, 3)


def spectrum_rows(d_list, k_max: int, variants, n_grid: int = 2048, sample_n: int = 1500, seed: int = 0) -> list:
    """(variant, d, k, source, value) rows; value is None where a source is unavailable."""
    rows = []
    for d in d_list:
        for variant in variants:
            if d == 1:
                spec = matrix_spectrum(gram_matrix(uniform_circle_grid(n_grid), variant))
                matrix_vals = {e.k: e.value for e in spec.entries}
            else:
                points = sample_uniform_sphere(sample_n, d, seed)
                gram = gram_matrix(points, variant)
                pole = random_pole(d, seed + 1)
                matrix_vals = {
                    k: rayleigh_coefficient(gram, harmonic_labels(points, HarmonicLabelSpec(k, d, pole=pole)), d)
                    for k in range(k_max + 1)
                }
            for k in range(k_max + 1):
                closed = closed_form_coefficient(variant, k, d) if d == 1 or d % 2 == 0 else None
                try:
                    quad = eigen_quadrature(variant, k, d)
                except QuadratureError:
                    quad = None
                for source, value in zip(SOURCES, (closed, quad, matrix_vals.get(k))):
                    rows.append((variant.value, d, k, source, value))
    return rows


def eigenvector_panels(variant: KernelVariant, n: int, top: int, bottom: int):
    """Leading and trailing Gram eigenvectors on an n-point circle grid, with their dominant frequencies."""
    spec = matrix_spectrum(gram_matrix(uniform_circle_grid(n), variant), method="dense")
    vt = spec.eigenvectors[:, :top]
    vb = spec.eigenvectors[:, n - bottom:][:, ::-1]
    return vt, vb, [dominant_frequency(v) for v in vt.T], [dominant_frequency(v) for v in vb.T]


def emit_spectrum_report(
    d_list,
    k_max: int,
    variants,
    out_dir=None,
    fmt: str = "csv",
    n_grid: int = 2048,
    eig_n: int = 1001,
    sample_n: int = 1500,
    seed: int = 0,
) -> SpectrumReport:
    """Three-source spectrum table plus top-6/bottom-3 eigenvector panels (top-9 with bias)."""
    variants = list(variants)
    rows = spectrum_rows(d_list, k_max, variants, n_grid, sample_n, seed)
    top_f, bottom_f, vectors = {}, {}, {}
    for variant in variants:
        top = 9 if variant is KernelVariant.WITH_BIAS else 6
        vt, vb, ft, fb = eigenvector_panels(variant, eig_n, top, 3)
        top_f[variant.value], bottom_f[variant.value] = ft, fb
        vectors[variant.value] = (vt, vb)
    report = SpectrumReport(rows, top_f, bottom_f, vectors, eig_n)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table = [(v, d, k, s, "" if x is None else repr(float(x))) for v, d, k, s, x in rows]
        write_table(out / f"spectrum.{fmt}", ["variant", "d", "k", "source", "value"], table, fmt)
        _write_json(out / "eigenvectors.json", {"top_frequencies": top_f, "bottom_frequencies": bottom_f, "n": eig_n})
        (out / "eigenvectors.svg").write_text(report.plot(), encoding="utf-8")
    return report


def write_table(path, header, rows, fmt: str = "csv") -> None:
    """Write rows as CSV, or as a JSON list of objects keyed by header."""
    if fmt == "json":
        records = []
        for row in rows:
            rec = {}
            for h, v in zip(header, row):
                if isinstance(v, str) and v not in ("", "inf"):
                    try:
                        v = float(v) if any(c in v for c in ".e") else int(v)
                    except ValueError:
                        pass
                rec[h] = None if v == "" else v
            records.append(rec)
        _write_json(path, records)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
