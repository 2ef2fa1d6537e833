"""Command-line entry point: ``spectral-bias <command> [options]``.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from ..dynamics import (
    StepSizeError,
    ThresholdQuery,
    build_forecast,
    residual_curve,
    threshold_table,
)
from ..harmonics import HarmonicLabelSpec, harmonic_labels, random_pole, sample_uniform_sphere, uniform_circle_grid
from ..kernels import KernelVariant, gram_matrix
from ..spectra import QuadratureError
from .config import ConfigError, check_keys, coerce, load_config
from .demos import (
    CrossEntropyConfig,
    OddConfig,
    TwoSinesConfig,
    _write_json,
    demo_cross_entropy,
    demo_odd_interpolation,
    demo_two_sines,
    emit_spectrum_report,
    write_table,
)
from .sweep import SweepSpec, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _global_options() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base random seed")
    g.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (default: out)")
    g.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS, help="tabular output format")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = _Parser(prog="spectral-bias", description="Spectra and convergence experiments for two-layer ReLU networks.", parents=[common])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("spectrum", parents=[common], help="three-source eigenvalue table and eigenvector plots")
    sp.add_argument("--config")
    sp.add_argument("--d", type=int, nargs="+")
    sp.add_argument("--kmax", type=int)
    sp.add_argument("--variant", choices=("bias-free", "with-bias", "both"))
    sp.add_argument("--n-grid", type=int)
    sp.add_argument("--eig-n", type=int)
    sp.add_argument("--sample-n", type=int)

    sw = sub.add_parser("sweep", parents=[common], help="convergence time against label frequency")
    sw.add_argument("--config")
    sw.add_argument("--d", type=int)
    sw.add_argument("--variant")
    sw.add_argument("--freqs", help="comma-separated frequencies")
    for flag, kind in (("--n", int), ("--m", int), ("--kappa", float), ("--eta", float), ("--stop-fraction", float),
                       ("--max-epochs", int), ("--seeds", int), ("--ambient-dim", int), ("--workers", int)):
        sw.add_argument(flag, type=kind)

    fc = sub.add_parser("forecast", parents=[common], help="linear residual forecast and time-to-threshold table")
    fc.add_argument("--config")
    fc.add_argument("--d", type=int)
    fc.add_argument("--variant")
    for flag, kind in (("--n", int), ("--k", int), ("--eta", float), ("--steps", int), ("--kmax", int), ("--stop-fraction", float)):
        fc.add_argument(flag, type=kind)

    demo = sub.add_parser("demo", parents=[common], help="small experiments")
    dsub = demo.add_subparsers(dest="demo", parser_class=_Parser)
    for name in ("two-sines", "odd", "cross-entropy"):
        dp = dsub.add_parser(name, parents=[common])
        dp.add_argument("--config")
        dp.add_argument("--m", type=int)
        dp.add_argument("--eta", type=float)
        dp.add_argument("--max-epochs", type=int)
        if name == "odd":
            dp.add_argument("--frequency", type=int)
            dp.add_argument("--kappa", type=float)
        if name == "two-sines":
            dp.add_argument("--n", type=int)
            dp.add_argument("--kappa", type=float)
        if name == "cross-entropy":
            dp.add_argument("--n", type=int)
            dp.add_argument("--freqs")
            dp.add_argument("--seeds", type=int)
    return parser


def _merged_config(args, keys) -> dict:
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if hasattr(args, "seed"):
        cfg["seed"] = args.seed
    return cfg


def _parse_freqs(value):
    if isinstance(value, str):
        try:
            return [int(v) for v in value.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"--freqs: {exc}") from exc
    return value


def _variants(value) -> list[KernelVariant]:
    if value in (None, "both"):
        return [KernelVariant.BIAS_FREE, KernelVariant.WITH_BIAS]
    try:
        return [KernelVariant.parse(value)]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _dataclass_from(cls, cfg: dict, where: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    check_keys(cfg, fields, where)
    kwargs = {}
    for name, value in cfg.items():
        default = fields[name].default
        if isinstance(default, tuple):
            kwargs[name] = tuple(_parse_freqs(value))
        elif isinstance(default, (bool, int, float)):
            kwargs[name] = coerce(value, type(default), f"{where}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def cmd_spectrum(args, out: Path, fmt: str) -> int:
    cfg = _merged_config(args, ("d", "kmax", "variant", "n_grid", "eig_n", "sample_n"))
    check_keys(cfg, ("d", "kmax", "variant", "n_grid", "eig_n", "sample_n", "seed"), "spectrum")
    d_list = cfg.get("d", [1])
    d_list = [d_list] if isinstance(d_list, int) else list(d_list)
    if any(int(d) < 1 for d in d_list):
        raise ConfigError("spectrum: dimensions must be >= 1")
    report = emit_spectrum_report(
        [int(d) for d in d_list],
        coerce(cfg.get("kmax", 10), int, "spectrum.kmax"),
        _variants(cfg.get("variant")),
        out,
        fmt,
        n_grid=coerce(cfg.get("n_grid", 2048), int, "spectrum.n_grid"),
        eig_n=coerce(cfg.get("eig_n", 1001), int, "spectrum.eig_n"),
        sample_n=coerce(cfg.get("sample_n", 1500), int, "spectrum.sample_n"),
        seed=coerce(cfg.get("seed", 0), int, "spectrum.seed"),
    )
    print(f"wrote {len(report.rows)} spectrum rows to {out}")
    return EXIT_OK


def cmd_sweep(args, out: Path, fmt: str) -> int:
    keys = ("d", "variant", "freqs", "n", "m", "kappa", "eta", "stop_fraction", "max_epochs", "seeds", "ambient_dim", "workers")
    cfg = _merged_config(args, keys)
    if "freqs" in cfg:
        cfg["freqs"] = _parse_freqs(cfg["freqs"])
    if getattr(args, "variant", None) is not None:
        cfg.pop("deep", None)
    spec = SweepSpec.from_mapping(cfg)
    result = run_sweep(spec, progress=lambda c: print(f"k={c.k} seed={c.seed_index}: {c.epochs_to_stop} ({c.verdict.value})", flush=True))
    result.save(out)
    if fmt == "json":
        _write_json(out / "sweep_cells.json", result.to_dict()["cells"])
    if result.exponent is not None:
        print(f"fitted exponent {result.exponent:.3f} +/- {result.stderr:.3f}")
    else:
        print("no exponent fit (too few converged frequencies)")
    return EXIT_OK


def cmd_forecast(args, out: Path, fmt: str) -> int:
    cfg = _merged_config(args, ("d", "variant", "n", "k", "eta", "steps", "kmax", "stop_fraction"))
    check_keys(cfg, ("d", "variant", "n", "k", "eta", "steps", "kmax", "stop_fraction", "seed"), "forecast")
    d = coerce(cfg.get("d", 1), int, "forecast.d")
    n = coerce(cfg.get("n", 256), int, "forecast.n")
    k = coerce(cfg.get("k", 2), int, "forecast.k")
    eta = coerce(cfg.get("eta", 0.01), float, "forecast.eta")
    steps = coerce(cfg.get("steps", 200), int, "forecast.steps")
    kmax = coerce(cfg.get("kmax", 16), int, "forecast.kmax")
    frac = coerce(cfg.get("stop_fraction", 0.05), float, "forecast.stop_fraction")
    seed = coerce(cfg.get("seed", 0), int, "forecast.seed")
    if d < 1 or n < 1 or k < 0 or steps < 0 or kmax < 0:
        raise ConfigError("forecast: d, n must be positive and k, steps, kmax non-negative")
    try:
        query = ThresholdQuery(frac)
    except ValueError as exc:
        raise ConfigError(f"forecast.stop_fraction: {exc}") from exc
    variant = _variants(cfg.get("variant", "with-bias"))
    if len(variant) != 1:
        raise ConfigError("forecast: choose one variant")
    variant = variant[0]
    if d == 1:
        points = uniform_circle_grid(n)
        labels = harmonic_labels(points, HarmonicLabelSpec(k, 1))
    else:
        points = sample_uniform_sphere(n, d, seed)
        labels = harmonic_labels(points, HarmonicLabelSpec(k, d, pole=random_pole(d, seed + 1)))
    forecast = build_forecast(gram_matrix(points, variant), labels, eta)
    curve = residual_curve(forecast, steps)
    write_table(out / f"forecast.{fmt}", ["t", "predicted_residual"], [(t, repr(float(r))) for t, r in enumerate(curve)], fmt)
    rows = threshold_table(variant, d, range(kmax + 1), n, eta, query)
    write_table(
        out / f"thresholds.{fmt}",
        ["k", "lambda", "predicted_iterations"],
        [(kk, repr(float(lam)), "inf" if math.isinf(it) else it) for kk, lam, it in rows],
        fmt,
    )
    print(f"wrote forecast ({steps + 1} steps) and threshold table ({len(rows)} rows) to {out}")
    return EXIT_OK


def cmd_demo(args, out: Path, fmt: str) -> int:
    if args.demo is None:
        raise UsageError("demo: choose one of two-sines, odd, cross-entropy")
    if args.demo == "two-sines":
        cfg = _merged_config(args, ("m", "eta", "max_epochs", "n", "kappa"))
        report = demo_two_sines(_dataclass_from(TwoSinesConfig, cfg, "two-sines"))
        report.save(out, fmt)
        print(f"epochs to 10% mode energy: {report.epochs_to_threshold} (ratio {report.ratio})")
    elif args.demo == "odd":
        cfg = _merged_config(args, ("m", "eta", "max_epochs", "frequency", "kappa"))
        report = demo_odd_interpolation(_dataclass_from(OddConfig, cfg, "odd"))
        report.save(out, fmt)
        print(f"train residual {report.train_relative_residual:.4f}, dense error {report.dense_relative_error:.4f}")
    else:
        cfg = _merged_config(args, ("m", "eta", "max_epochs", "n", "freqs", "seeds"))
        if "m" in cfg:
            cfg["width"] = cfg.pop("m")
        result = demo_cross_entropy(_dataclass_from(CrossEntropyConfig, cfg, "cross-entropy"))
        result.save(out, "cross_entropy")
        print(f"fitted exponent {result.exponent}")
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "sweep": cmd_sweep, "forecast": cmd_forecast, "demo": cmd_demo}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "spectral-bias: error: a command is required")
        out = Path(getattr(args, "out_dir", "out"))
        fmt = getattr(args, "format", "csv")
        out.mkdir(parents=True, exist_ok=True)
        with np.errstate(over="raise", invalid="raise"):
            return COMMANDS[args.command](args, out, fmt)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ConfigError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except (StepSizeError, QuadratureError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
