"""Convergence-time sweeps over label frequency and power-law fits."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dynamics import ThresholdQuery, grid_eigenvalue, iterations_to_fraction
from ..harmonics import (
    HarmonicLabelSpec,
    embed_random_rotation,
    harmonic_labels,
    random_pole,
    sample_uniform_sphere,
    uniform_circle_grid,
)
from ..kernels import KernelVariant
from ..nets import (
    DeepNetSpec,
    Init,
    Loss,
    TrainConfig,
    Verdict,
    init_deep,
    init_two_layer,
    threshold_class_labels,
    train_deep,
    train_full_batch,
)
from .config import ConfigError, check_keys, coerce, require
from .svg import Plot

SWEEP_KEYS = (
    "d", "variant", "deep", "freqs", "n", "m", "kappa", "eta", "stop_fraction",
    "max_epochs", "seeds", "ambient_dim", "loss", "seed", "workers",
)
DEEP_KEYS = ("hidden_layers", "width", "skip_connections", "bias", "init", "kappa")


class InsufficientPointsError(ValueError):
    """Fewer than three usable (k, epochs) pairs for a power-law fit."""


@dataclass(frozen=True)
class SweepSpec:
    d: int
    model: KernelVariant | DeepNetSpec
    freqs: tuple
    n: int
    m: int = 2000
    kappa: float = 1.0
    eta: float = 0.01
    stop_fraction: float = 0.05
    max_epochs: int = 5000
    seeds: int = 3
    ambient_dim: int | None = None
    loss: Loss = Loss.SQUARED
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        freqs = tuple(int(k) for k in self.freqs)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "loss", Loss.parse(self.loss))
        if not freqs:
            raise ValueError("frequency list is empty")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("frequency list must be strictly increasing")
        if freqs[0] < 0:
            raise ValueError("frequencies must be non-negative")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.d < 1 or self.n < 1 or self.m < 1:
            raise ValueError("d, n and m must be positive")
        if self.ambient_dim is not None and self.ambient_dim < self.d + 1:
            raise ValueError("ambient_dim must be at least d + 1")
        if self.loss is Loss.CROSS_ENTROPY and self.d != 1:
            raise ValueError("cross-entropy sweeps are defined on the circle only")

    @property
    def is_shallow(self) -> bool:
        return isinstance(self.model, KernelVariant)

    def to_dict(self) -> dict:
        out = {
            "d": self.d,
            "freqs": list(self.freqs),
            "n": self.n,
            "m": self.m,
            "kappa": self.kappa,
            "eta": self.eta,
            "stop_fraction": self.stop_fraction,
            "max_epochs": self.max_epochs,
            "seeds": self.seeds,
            "ambient_dim": self.ambient_dim,
            "loss": self.loss.value,
            "seed": self.seed,
        }
        if self.is_shallow:
            out["variant"] = self.model.value
        else:
            s = self.model
            out["deep"] = {
                "hidden_layers": s.hidden_layers,
                "width": s.width,
                "skip_connections": s.skip_connections,
                "bias": s.bias,
                "init": s.init.value,
                "kappa": s.kappa,
            }
        return out

    @classmethod
    def from_mapping(cls, cfg: dict) -> "SweepSpec":
        check_keys(cfg, SWEEP_KEYS, "sweep")
        if ("variant" in cfg) == ("deep" in cfg):
            raise ConfigError("sweep: give exactly one of 'variant' or 'deep'")
        if "variant" in cfg:
            try:
                model = KernelVariant.parse(cfg["variant"])
            except ValueError as exc:
                raise ConfigError(f"sweep.variant: {exc}") from exc
        else:
            deep = cfg["deep"]
            if not isinstance(deep, dict):
                raise ConfigError("sweep.deep must be a table")
            check_keys(deep, DEEP_KEYS, "sweep.deep")
            try:
                model = DeepNetSpec(
                    hidden_layers=require(deep, "hidden_layers", int, "sweep.deep"),
                    width=require(deep, "width", int, "sweep.deep"),
                    skip_connections=coerce(deep.get("skip_connections", False), bool, "sweep.deep.skip_connections"),
                    bias=coerce(deep.get("bias", True), bool, "sweep.deep.bias"),
                    init=Init(str(deep.get("init", "he")).lower()),
                    kappa=coerce(deep.get("kappa", 1.0), float, "sweep.deep.kappa"),
                )
            except ValueError as exc:
                raise ConfigError(f"sweep.deep: {exc}") from exc
        freqs = cfg.get("freqs")
        if not isinstance(freqs, list):
            raise ConfigError("sweep: 'freqs' must be a list of integers")
        ambient = cfg.get("ambient_dim")
        kwargs = dict(
            d=require(cfg, "d", int, "sweep"),
            model=model,
            freqs=tuple(coerce(k, int, "sweep.freqs") for k in freqs),
            n=require(cfg, "n", int, "sweep"),
            m=coerce(cfg.get("m", 2000), int, "sweep.m"),
            kappa=coerce(cfg.get("kappa", 1.0), float, "sweep.kappa"),
            eta=require(cfg, "eta", float, "sweep"),
            stop_fraction=coerce(cfg.get("stop_fraction", 0.05), float, "sweep.stop_fraction"),
            max_epochs=require(cfg, "max_epochs", int, "sweep"),
            seeds=coerce(cfg.get("seeds", 3), int, "sweep.seeds"),
            ambient_dim=None if ambient is None else coerce(ambient, int, "sweep.ambient_dim"),
            loss=cfg.get("loss", "squared"),
            seed=coerce(cfg.get("seed", 0), int, "sweep.seed"),
            workers=coerce(cfg.get("workers", 1), int, "sweep.workers"),
        )
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"sweep: {exc}") from exc


@dataclass(frozen=True)
class CellResult:
    k: int
    seed_index: int
    net_seed: int
    epochs_to_stop: int | None
    verdict: Verdict
    epochs_run: int


@dataclass(frozen=True)
class FrequencySummary:
    k: int
    median_epochs: float | None
    converged_seeds: int
    predicted: float | None
    scaled_prediction: float | None


@dataclass
class SweepResult:
    spec: SweepSpec
    cells: list
    frequencies: list
    exponent: float | None
    stderr: float | None
    fit_scale: float | None
    prediction_scale: float | None
    notes: list = field(default_factory=list)

    def cell(self, k: int, seed_index: int) -> CellResult:
        for c in self.cells:
            if c.k == k and c.seed_index == seed_index:
                return c
        raise KeyError((k, seed_index))

    def summary(self, k: int) -> FrequencySummary:
        for f in self.frequencies:
            if f.k == k:
                return f
        raise KeyError(k)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "cells": [
                {
                    "k": c.k,
                    "seed_index": c.seed_index,
                    "net_seed": c.net_seed,
                    "epochs_to_stop": c.epochs_to_stop,
                    "verdict": c.verdict.value,
                    "epochs_run": c.epochs_run,
                }
                for c in self.cells
            ],
            "frequencies": [
                {
                    "k": f.k,
                    "median_epochs": f.median_epochs,
                    "converged_seeds": f.converged_seeds,
                    "predicted_iterations": f.predicted,
                    "scaled_prediction": f.scaled_prediction,
                }
                for f in self.frequencies
            ],
            "exponent": self.exponent,
            "stderr": self.stderr,
            "fit_scale": self.fit_scale,
            "prediction_scale": self.prediction_scale,
            "notes": list(self.notes),
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_cells_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "seed_index", "net_seed", "epochs_to_stop", "verdict"])
            for c in self.cells:
                w.writerow([c.k, c.seed_index, c.net_seed, "" if c.epochs_to_stop is None else c.epochs_to_stop, c.verdict.value])

    def write_summary_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            header = ["k", "median_epochs", "converged_seeds"]
            if self.spec.is_shallow:
                header += ["predicted_iterations", "scaled_prediction"]
            w.writerow(header)
            for f in self.frequencies:
                row = [f.k, _csv_num(f.median_epochs), f.converged_seeds]
                if self.spec.is_shallow:
                    row += [_csv_num(f.predicted), _csv_num(f.scaled_prediction)]
                w.writerow(row)

    def plot(self) -> Plot:
        title = "convergence time vs frequency"
        if self.exponent is not None:
            title += f" (slope {self.exponent:.2f})"
        p = Plot(title=title, xlabel="frequency k", ylabel="epochs to 5% error", logx=True, logy=True)
        ks = [f.k for f in self.frequencies if f.median_epochs is not None and f.k > 0]
        p.add(ks, [self.summary(k).median_epochs for k in ks], label="measured", style="points")
        if self.spec.is_shallow and self.prediction_scale is not None:
            pk = [f.k for f in self.frequencies if f.scaled_prediction is not None and f.k > 0]
            p.add(pk, [self.summary(k).scaled_prediction for k in pk], label="scaled prediction")
        return p

    def save(self, out_dir, stem: str = "sweep") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{stem}.json", out / f"{stem}_cells.csv", out / f"{stem}_summary.csv", out / f"{stem}.svg"]
        self.write_json(paths[0])
        self.write_cells_csv(paths[1])
        self.write_summary_csv(paths[2])
        self.plot().save(paths[3])
        return paths


def _csv_num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return repr(float(v))


def cell_seed(base: int, k: int, seed_index: int) -> int:
    """Network seed for one sweep cell, independent of scheduling order."""
    return int(np.random.SeedSequence([base, k, seed_index]).generate_state(1)[0])


def sweep_task(spec: SweepSpec, k: int):
    """Points and labels used for frequency k (identical across seeds)."""
    if spec.d == 1:
        points = uniform_circle_grid(spec.n)
        label_spec = HarmonicLabelSpec(k, 1)
    else:
        points = sample_uniform_sphere(spec.n, spec.d, spec.seed)
        label_spec = HarmonicLabelSpec(k, spec.d, pole=random_pole(spec.d, spec.seed + 1))
    if spec.loss is Loss.CROSS_ENTROPY:
        points, labels = threshold_class_labels(points, k)
    else:
        labels = harmonic_labels(points, label_spec)
    if spec.ambient_dim is not None and spec.ambient_dim > spec.d + 1:
        points = embed_random_rotation(points, spec.ambient_dim, spec.seed + 2)
    return points, labels


def run_cell(spec: SweepSpec, k: int, seed_index: int) -> CellResult:
    points, labels = sweep_task(spec, k)
    net_seed = cell_seed(spec.seed, k, seed_index)
    dim = points.coords.shape[1]
    config = TrainConfig(spec.eta, spec.max_epochs, spec.stop_fraction, spec.loss, net_seed)
    if spec.is_shallow:
        net = init_two_layer(spec.m, spec.d, spec.kappa, spec.model is KernelVariant.WITH_BIAS, net_seed, dim)
        run = train_full_batch(net, points, labels, config)
    else:
        net = init_deep(spec.model, spec.d, net_seed, dim)
        run = train_deep(net, points, labels, config)
    return CellResult(k, seed_index, net_seed, run.epochs_to_stop, run.verdict, int(run.residual_trace.shape[0] - 1))


def _run_cell_args(args):
    return run_cell(*args)


def fit_power_law(pairs) -> tuple[float, float, float]:
    """OLS fit of log(epochs) = exponent log(k) + log(scale) over k >= 2.

    Pairs with k < 2 or non-finite epochs are dropped.  Returns
    (exponent, standard error of the exponent, scale).
    """
    usable = [(float(k), float(e)) for k, e in pairs if k >= 2 and e is not None and math.isfinite(e) and e > 0]
    if len(usable) < 3:
        raise InsufficientPointsError(f"need at least 3 converged pairs with k >= 2, got {len(usable)}")
    x = np.log([k for k, _ in usable])
    y = np.log([e for _, e in usable])
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0:
        raise InsufficientPointsError("all frequencies are equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    stderr = math.sqrt(float(np.sum(resid ** 2)) / (len(usable) - 2) / sxx)
    return slope, stderr, math.exp(intercept)


def _median(values) -> float | None:
    med = float(np.median(values))
    return None if math.isinf(med) else med


def run_sweep(spec: SweepSpec, progress=None) -> SweepResult:
    """Train one network per (frequency, seed) cell and aggregate.

    ``spec.workers > 1`` dispatches cells to a process pool; results are keyed
    by cell so the output does not depend on completion order.
    """
    jobs = [(spec, k, s) for k in spec.freqs for s in range(spec.seeds)]
    results: dict = {}
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for cell in pool.map(_run_cell_args, jobs):
                results[(cell.k, cell.seed_index)] = cell
                if progress:
                    progress(cell)
    else:
        for job in jobs:
            cell = run_cell(*job)
            results[(cell.k, cell.seed_index)] = cell
            if progress:
                progress(cell)
    cells = [results[key] for key in sorted(results)]
    return aggregate(spec, cells)


def aggregate(spec: SweepSpec, cells) -> SweepResult:
    notes = []
    medians = {}
    converged = {}
    for k in spec.freqs:
        eps = [c.epochs_to_stop if c.verdict is Verdict.CONVERGED else math.inf for c in cells if c.k == k]
        medians[k] = _median(eps)
        converged[k] = sum(1 for e in eps if math.isfinite(e))
        for c in cells:
            if c.k == k and c.verdict is not Verdict.CONVERGED:
                notes.append(f"k={k} seed_index={c.seed_index}: {c.verdict.value}")

    predicted = {}
    if spec.is_shallow:
        query = ThresholdQuery(spec.stop_fraction)
        for k in spec.freqs:
            lam = grid_eigenvalue(spec.model, k, spec.d, spec.n)
            rate = spec.eta * lam
            predicted[k] = iterations_to_fraction(lam, spec.eta, query) if rate < 1 else None
            if predicted[k] is not None and math.isinf(predicted[k]):
                predicted[k] = math.inf

    pairs = [(k, medians[k]) for k in spec.freqs if medians[k] is not None]
    try:
        exponent, stderr, fit_scale = fit_power_law(pairs)
    except InsufficientPointsError as exc:
        exponent = stderr = fit_scale = None
        notes.append(f"no exponent fit: {exc}")

    prediction_scale = None
    if spec.is_shallow:
        logs = [
            math.log(medians[k]) - math.log(predicted[k])
            for k in spec.freqs
            if k >= 2 and medians[k] is not None and medians[k] > 0
            and predicted[k] is not None and math.isfinite(predicted[k])
        ]
        if logs:
            prediction_scale = math.exp(sum(logs) / len(logs))

    summaries = []
    for k in spec.freqs:
        pred = predicted.get(k)
        scaled = None
        if pred is not None and prediction_scale is not None and math.isfinite(pred):
            scaled = prediction_scale * pred
        summaries.append(FrequencySummary(k, medians[k], converged[k], float(pred) if pred is not None else None, scaled))
    return SweepResult(spec, list(cells), summaries, exponent, stderr, fit_scale, prediction_scale, notes)
