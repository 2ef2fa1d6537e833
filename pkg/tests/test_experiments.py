"""Sweeps, demos, plots, config loading and the command-line interface."""

import csv
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from spectral_bias.experiments import (
    ConfigError,
    InsufficientPointsError,
    OddConfig,
    SweepSpec,
    demo_odd_interpolation,
    emit_spectrum_report,
    fit_power_law,
    load_config,
    run_sweep,
)
from spectral_bias.experiments.cli import main
from spectral_bias.experiments.demos import TwoSinesConfig, demo_two_sines, dominant_frequency, frequency_energy
from spectral_bias.experiments.svg import Plot, panel_grid
from spectral_bias.experiments.sweep import cell_seed, sweep_task
from spectral_bias.kernels import KernelVariant
from spectral_bias.nets import DeepNetSpec, Verdict


def tiny_spec(**kw):
    base = dict(d=1, model=KernelVariant.WITH_BIAS, freqs=(1, 2, 3, 4), n=32, m=200, kappa=3.0,
                eta=0.2, max_epochs=3000, seeds=2)
    base.update(kw)
    return SweepSpec(**base)


class TestPowerLaw:
    def test_exact_power(self):
        pairs = [(k, 7.0 * k ** 2) for k in range(1, 9)]
        slope, stderr, scale = fit_power_law(pairs)
        assert slope == pytest.approx(2.0)
        assert stderr == pytest.approx(0.0, abs=1e-12)
        assert scale == pytest.approx(7.0)

    def test_drops_low_and_missing(self):
        pairs = [(0, 1.0), (1, 999.0), (2, 8.0), (3, math.inf), (4, 64.0), (8, 512.0), (5, None)]
        assert fit_power_law(pairs)[0] == pytest.approx(3.0)

    def test_matches_numpy_polyfit(self):
        rng = np.random.default_rng(0)
        ks = np.arange(2, 12)
        eps = 3 * ks ** 1.7 * np.exp(0.1 * rng.standard_normal(ks.size))
        slope, _, scale = fit_power_law(zip(ks, eps))
        ref = np.polyfit(np.log(ks), np.log(eps), 1)
        assert slope == pytest.approx(ref[0])
        assert math.log(scale) == pytest.approx(ref[1])

    def test_too_few_points(self):
        with pytest.raises(InsufficientPointsError):
            fit_power_law([(2, 1.0), (3, 2.0), (1, 4.0)])


class TestSweepSpec:
    @pytest.mark.parametrize("kw", [dict(freqs=()), dict(freqs=(3, 2)), dict(freqs=(2, 2)), dict(seeds=0),
                                    dict(ambient_dim=1), dict(d=2, loss="cross-entropy"), dict(freqs=(-1, 2))])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            tiny_spec(**kw)

    def test_round_trip(self):
        spec = tiny_spec()
        cfg = spec.to_dict()
        assert SweepSpec.from_mapping(cfg) == spec

    def test_deep_round_trip(self):
        spec = tiny_spec(model=DeepNetSpec(2, 8, skip_connections=True))
        assert SweepSpec.from_mapping(spec.to_dict()) == spec

    @pytest.mark.parametrize("cfg", [
        dict(d=1, variant="with-bias", freqs=[1, 2], n=8, eta=0.1, max_epochs=1, colour="red"),
        dict(d=1, freqs=[1, 2], n=8, eta=0.1, max_epochs=1),
        dict(d=1, variant="sideways", freqs=[1, 2], n=8, eta=0.1, max_epochs=1),
        dict(d=1, variant="with-bias", freqs="1,2", n=8, eta=0.1, max_epochs=1),
        dict(d=1, variant="with-bias", freqs=[2, 1], n=8, eta=0.1, max_epochs=1),
        dict(d=1, variant="with-bias", freqs=[1, 2], n="many", eta=0.1, max_epochs=1),
        dict(d=1, variant="with-bias", freqs=[1, 2], eta=0.1, max_epochs=1),
        dict(d=1, deep={"width": 3}, freqs=[1, 2], n=8, eta=0.1, max_epochs=1),
    ])
    def test_mapping_errors(self, cfg):
        with pytest.raises(ConfigError):
            SweepSpec.from_mapping(cfg)

    def test_cell_seeds_distinct(self):
        seeds = {cell_seed(0, k, s) for k in range(10) for s in range(5)}
        assert len(seeds) == 50
        assert cell_seed(3, 2, 1) == cell_seed(3, 2, 1)

    def test_task_points(self):
        pts, y = sweep_task(tiny_spec(d=2, n=50, ambient_dim=6), 2)
        assert pts.coords.shape == (50, 6)
        assert y.shape == (50,)


@pytest.fixture(scope="module")
def tiny_result():
    return run_sweep(tiny_spec())


class TestSweep:
    def test_cells_complete(self, tiny_result):
        assert len(tiny_result.cells) == 8
        assert [(c.k, c.seed_index) for c in tiny_result.cells] == [(k, s) for k in (1, 2, 3, 4) for s in (0, 1)]
        assert all(c.verdict is Verdict.CONVERGED for c in tiny_result.cells)

    def test_median_and_predictions(self, tiny_result):
        for k in (1, 2, 3, 4):
            s = tiny_result.summary(k)
            eps = [tiny_result.cell(k, i).epochs_to_stop for i in (0, 1)]
            assert s.median_epochs == pytest.approx(np.median(eps))
            assert s.predicted > 0
        assert tiny_result.exponent is not None

    def test_slower_at_higher_frequency(self, tiny_result):
        assert tiny_result.summary(4).median_epochs > tiny_result.summary(2).median_epochs

    def test_non_convergence_is_reported(self):
        res = run_sweep(tiny_spec(freqs=(6,), max_epochs=3, seeds=1))
        assert res.cells[0].verdict is Verdict.DID_NOT_CONVERGE
        assert res.summary(6).median_epochs is None
        assert any("did-not-converge" in n for n in res.notes)

    def test_save(self, tiny_result, tmp_path):
        paths = tiny_result.save(tmp_path)
        names = sorted(p.name for p in paths)
        assert names == ["sweep.json", "sweep.svg", "sweep_cells.csv", "sweep_summary.csv"]
        payload = json.loads((tmp_path / "sweep.json").read_text())
        assert payload["spec"]["freqs"] == [1, 2, 3, 4]
        rows = list(csv.DictReader((tmp_path / "sweep_cells.csv").open()))
        assert len(rows) == 8
        ET.parse(tmp_path / "sweep.svg")

    def test_parallel_matches_serial(self, tiny_result, tmp_path):
        par = run_sweep(tiny_spec(workers=2))
        tiny_result.write_json(tmp_path / "a.json")
        par.write_json(tmp_path / "b.json")
        a = json.loads((tmp_path / "a.json").read_text())
        b = json.loads((tmp_path / "b.json").read_text())
        a["spec"].pop("workers", None)
        b["spec"].pop("workers", None)
        assert a == b

    def test_deep_sweep_runs(self):
        res = run_sweep(tiny_spec(model=DeepNetSpec(2, 16), freqs=(1, 2), seeds=1, eta=0.01, max_epochs=50))
        assert len(res.cells) == 2 and res.summary(1).predicted is None


class TestSvg:
    def test_plot_is_xml(self):
        p = Plot(title="a < b", logx=True, logy=True)
        p.add([1, 2, 4], [1, 4, 16], label="line")
        p.add([1, 2, 0], [1, math.nan, 3], style="points")
        root = ET.fromstring(p.render())
        assert root.tag.endswith("svg")

    def test_empty_and_grid(self):
        ET.fromstring(Plot().render())
        ET.fromstring(panel_grid([Plot(), Plot()], 2))
        with pytest.raises(ValueError):
            panel_grid([], 1)

    def test_deterministic(self):
        make = lambda: Plot(title="x").add([0, 1], [2, 3]).render()
        assert make() == make()


class TestDemos:
    def test_frequency_helpers(self):
        theta = 2 * np.pi * np.arange(64) / 64
        e = frequency_energy(np.cos(5 * theta))
        assert int(np.argmax(e)) == 5
        assert dominant_frequency(np.sin(7 * theta)) == 7

    def test_odd_interpolation(self):
        rep = demo_odd_interpolation(OddConfig(m=500, dense_n=2000))
        """An odd grid is interpolated exactly, yet the off-sample fit misses completely."""
        assert rep.train_relative_residual < 1e-8
        assert rep.dense_relative_error > 0.9
        assert rep.odd_energy_fraction < 1e-12

    def test_odd_with_bias_fits(self):
        rep = demo_odd_interpolation(OddConfig(m=500, dense_n=2000, with_bias=True, readout_only=False,
                                               eta=0.1, max_epochs=3000))
        assert rep.train_relative_residual <= 0.0625
        assert rep.dense_relative_error < 0.1

    def test_odd_gradient_descent_stalls_without_bias(self):
        rep = demo_odd_interpolation(OddConfig(m=500, dense_n=2000, readout_only=False, eta=0.1, max_epochs=500))
        assert rep.train_relative_residual > 0.95

    def test_odd_save(self, tmp_path):
        rep = demo_odd_interpolation(OddConfig(m=100, dense_n=200))
        paths = rep.save(tmp_path, "json")
        assert all(p.exists() for p in paths)
        assert len(json.loads(paths[1].read_text())) == 200

    def test_two_sines_small(self):
        rep = demo_two_sines(TwoSinesConfig(n=64, m=500, kappa=1.0, eta=0.05, max_epochs=50, low=2, high=6, snapshots=(0, 10)))
        assert rep.target_energy[2] == pytest.approx(32.0)
        assert rep.target_energy[6] == pytest.approx(32.0)
        assert sorted(rep.snapshots) == [0, 10]


@pytest.fixture(scope="module")
def report():
    return emit_spectrum_report([1, 2], 6, [KernelVariant.BIAS_FREE, KernelVariant.WITH_BIAS],
                                n_grid=256, eig_n=201, sample_n=300)


class TestSpectrumReport:

    def test_row_count(self, report):
        assert len(report.rows) == 2 * 2 * 7 * 3

    def test_sources_agree_on_circle(self, report):
        vals = {(v, d, k, s): x for v, d, k, s, x in report.rows}
        for v in ("bias-free", "with-bias"):
            for k in range(7):
                assert vals[(v, 1, k, "quadrature")] == pytest.approx(vals[(v, 1, k, "closed-form")], abs=1e-12)
                assert vals[(v, 1, k, "matrix")] == pytest.approx(vals[(v, 1, k, "closed-form")], rel=0.05, abs=1e-6)

    def test_top_eigenvectors(self, report):
        assert report.top_frequencies["bias-free"] == [1, 1, 0, 2, 2, 4]
        assert sorted(set(report.top_frequencies["with-bias"])) == [0, 1, 2, 3, 4]

    def test_writes_files(self, tmp_path):
        emit_spectrum_report([1], 3, [KernelVariant.WITH_BIAS], tmp_path, "json", n_grid=64, eig_n=65)
        rows = json.loads((tmp_path / "spectrum.json").read_text())
        assert len(rows) == 12
        ET.parse(tmp_path / "eigenvectors.svg")


class TestConfig:
    def test_toml_and_json(self, tmp_path):
        (tmp_path / "a.toml").write_text('d = 1\nfreqs = [1, 2]\n')
        (tmp_path / "a.json").write_text('{"d": 1, "freqs": [1, 2]}')
        assert load_config(tmp_path / "a.toml") == load_config(tmp_path / "a.json") == {"d": 1, "freqs": [1, 2]}

    def test_missing(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.toml")

    def test_malformed(self, tmp_path):
        (tmp_path / "bad.toml").write_text("d = = 1")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "bad.toml")

    def test_shipped_configs_parse(self):
        from pathlib import Path
        root = Path(__file__).resolve().parent.parent / "configs"
        for path in sorted(root.glob("sweep_*.toml")):
            SweepSpec.from_mapping(load_config(path))


class TestCli:
    def run(self, tmp_path, *argv):
        return main([*argv, "--out-dir", str(tmp_path)])

    def test_spectrum(self, tmp_path):
        assert self.run(tmp_path, "spectrum", "--d", "1", "2", "4", "--kmax", "10", "--n-grid", "256",
                        "--eig-n", "101", "--sample-n", "200") == 0
        rows = list(csv.reader((tmp_path / "spectrum.csv").open()))
        assert len(rows) - 1 == 2 * 11 * 3 * 3

    def test_missing_config(self, tmp_path, capsys):
        code = self.run(tmp_path, "sweep", "--config", str(tmp_path / "absent.toml"))
        assert code == 1
        assert "absent.toml" in capsys.readouterr().err

    def test_unknown_flag(self, tmp_path, capsys):
        assert self.run(tmp_path, "forecast", "--bogus", "1") == 1
        assert "bogus" in capsys.readouterr().err

    def test_no_command(self, capsys):
        assert main([]) == 1

    def test_help(self, capsys):
        assert main(["--help"]) == 0
        assert "spectrum" in capsys.readouterr().out

    def test_bad_config_value(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('d = 1\nvariant = "with-bias"\nfreqs = [1, 2, 3]\nn = "x"\neta = 0.1\nmax_epochs = 2\n')
        assert self.run(tmp_path, "sweep", "--config", str(cfg)) == 1

    def test_forecast(self, tmp_path):
        assert self.run(tmp_path, "forecast", "--n", "32", "--steps", "10", "--kmax", "4") == 0
        f = list(csv.reader((tmp_path / "forecast.csv").open()))
        t = list(csv.reader((tmp_path / "thresholds.csv").open()))
        assert len(f) == 12 and len(t) == 6

    def test_forecast_step_too_large(self, tmp_path, capsys):
        assert self.run(tmp_path, "forecast", "--n", "64", "--eta", "10") == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_sweep_and_rerun_identical(self, tmp_path):
        argv = ["sweep", "--d", "1", "--variant", "with-bias", "--freqs", "1,2,3", "--n", "16", "--m", "100",
                "--eta", "0.05", "--max-epochs", "2000", "--seeds", "1", "--seed", "4"]
        assert self.run(tmp_path / "a", *argv) == 0
        assert self.run(tmp_path / "b", *argv) == 0
        for name in ("sweep.json", "sweep_cells.csv", "sweep_summary.csv", "sweep.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_json_format(self, tmp_path):
        assert self.run(tmp_path, "forecast", "--n", "16", "--steps", "3", "--kmax", "2", "--format", "json") == 0
        assert len(json.loads((tmp_path / "forecast.json").read_text())) == 4

    def test_demo_odd(self, tmp_path):
        assert self.run(tmp_path, "demo", "odd", "--m", "200") == 0
        assert (tmp_path / "odd_k3.json").exists()

    def test_demo_requires_name(self, tmp_path):
        assert self.run(tmp_path, "demo") == 1

    def test_demo_unknown_key(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("wobble = 3\n")
        assert self.run(tmp_path, "demo", "odd", "--config", str(cfg)) == 1
