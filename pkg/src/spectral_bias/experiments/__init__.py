"""Experiment harness: sweeps, demos, spectrum reports and the CLI."""

from .config import ConfigError, load_config
from .demos import (
    CrossEntropyConfig,
    OddConfig,
    TwoSinesConfig,
    demo_cross_entropy,
    demo_odd_interpolation,
    demo_two_sines,
    emit_spectrum_report,
)
from .sweep import InsufficientPointsError, SweepResult, SweepSpec, fit_power_law, run_sweep

__all__ = [
    "ConfigError",
    "CrossEntropyConfig",
    "InsufficientPointsError",
    "OddConfig",
    "SweepResult",
    "SweepSpec",
    "TwoSinesConfig",
    "demo_cross_entropy",
    "demo_odd_interpolation",
    "demo_two_sines",
    "emit_spectrum_report",
    "fit_power_law",
    "load_config",
    "run_sweep",
]
