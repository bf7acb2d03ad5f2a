"""Experiment drivers, file formats and CLI behaviour."""

import os
import subprocess
import sys

import numpy as np
import pytest

from cvlattice.cli import main
from cvlattice.config import load_config
from cvlattice.runner import (
    run_degenerate_check,
    run_oracle_compare,
    run_propagator,
    run_scattering,
    run_single_qumode,
)

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def cfg_for(tmp_path, experiment, *overrides):
    out = str(tmp_path / experiment)
    return load_config(experiment, None, [f'outdir="{out}"', *overrides])


class TestSingleQumode:
    def test_zero_time_discrepancy_zero(self, tmp_path):
        cfg = cfg_for(tmp_path, "single-qumode", "times=[0.0]")
        metrics = run_single_qumode(cfg)
        assert metrics["l2_error_t0"] == 0.0

    def test_short_run_small_error_and_files(self, tmp_path):
        cfg = cfg_for(tmp_path, "single-qumode", "times=[2.0]")
        metrics = run_single_qumode(cfg)
        assert metrics["l2_relative_error_t2"] < 0.01
        header, rows = read_csv(os.path.join(cfg.outdir, "densities.csv"))
        assert header == ["t", "q_index", "q", "trotter_density", "exact_density"]
        assert len(rows) == cfg.m_points
        assert os.path.exists(os.path.join(cfg.outdir, "config-echo.toml"))

    def test_snapshot_time_must_align_with_dt(self, tmp_path):
        from cvlattice.config import ConfigError

        cfg = cfg_for(tmp_path, "single-qumode", "times=[0.015]")
        with pytest.raises(ConfigError):
            run_single_qumode(cfg)


class TestPropagator:
    def test_zero_amplitude_zero_field(self, tmp_path):
        cfg = cfg_for(
            tmp_path,
            "propagator",
            "impulse_amplitude=0.0",
            "n_sites=16",
            "total_time=1.0",
            "record_stride=50",
        )
        run_propagator(cfg)
        _, rows = read_csv(os.path.join(cfg.outdir, "field.csv"))
        values = np.array([float(r[2]) for r in rows])
        assert np.max(np.abs(values)) < 1e-12

    def test_zero_time_headers_only(self, tmp_path):
        cfg = cfg_for(tmp_path, "propagator", "total_time=0.0", "n_sites=8")
        run_propagator(cfg)
        for name in ("field.csv", "energy.csv", "norms.csv", "slice.csv"):
            header, rows = read_csv(os.path.join(cfg.outdir, name))
            assert rows == []

    def test_slice_matches_field_column(self, tmp_path):
        cfg = cfg_for(
            tmp_path, "propagator", "n_sites=16", "total_time=2.0", "record_stride=100"
        )
        metrics = run_propagator(cfg)
        site = int(metrics["impulse_site"])
        fh, frows = read_csv(os.path.join(cfg.outdir, "field.csv"))
        sh, srows = read_csv(os.path.join(cfg.outdir, "slice.csv"))
        field_at_site = [r[2] for r in frows if int(r[1]) == site]
        assert field_at_site == [r[1] for r in srows]

    def test_momentum_quadrature_runs(self, tmp_path):
        cfg = cfg_for(
            tmp_path,
            "propagator",
            'impulse_quadrature="momentum"',
            "n_sites=16",
            "total_time=1.0",
            "record_stride=100",
        )
        metrics = run_propagator(cfg)
        assert "max_field_outside_cone" in metrics


class TestScattering:
    def _packet_file(self, tmp_path, n, lam=0.0):
        path = tmp_path / "scatter.toml"
        path.write_text(
            f"""
n_sites = {n}
mass = 1.0
coupling = {lam}
total_time = 4.0
record_stride = 100
outdir = "{tmp_path}/scatter-out"

[[wavepacket]]
center = {0.3 * n}
momentum = 0.3
sigma = 0.09

[[wavepacket]]
center = {0.7 * n}
momentum = -0.3
sigma = 0.09
"""
        )
        return str(path)

    def test_two_packet_run_writes_all_files(self, tmp_path):
        cfg = load_config("scattering", self._packet_file(tmp_path, 64))
        metrics = run_scattering(cfg)
        for name in ("field.csv", "energy.csv", "norms.csv", "metrics.csv", "centroids.csv"):
            assert os.path.exists(os.path.join(cfg.outdir, name))
        assert "collision_time" in metrics
        header, rows = read_csv(os.path.join(cfg.outdir, "centroids.csv"))
        assert header == ["t", "centroid_0", "centroid_1"]

    def test_single_packet_speed_metric(self, tmp_path):
        cfg = cfg_for(
            tmp_path,
            "scattering",
            "n_sites=64",
            "total_time=4.0",
            "record_stride=100",
        )
        cfg.wavepackets.append({"center": 20.0, "momentum": 0.3, "sigma": 0.12, "amplitude": 1.0})
        metrics = run_scattering(cfg)
        assert metrics["packet_speed"] > 0

    def test_wavepacket_required(self, tmp_path):
        from cvlattice.config import ConfigError

        cfg = cfg_for(tmp_path, "scattering", "n_sites=16", "total_time=1.0")
        with pytest.raises(ConfigError):
            run_scattering(cfg)

    def test_psi_raw_format(self, tmp_path):
        cfg = cfg_for(
            tmp_path,
            "scattering",
            "n_sites=8",
            "m_points=32",
            "extent=12.0",
            "l_trunc=16",
            "total_time=0.1",
            "record_stride=5",
            "write_psi=true",
        )
        cfg.wavepackets.append({"center": 4.0, "momentum": 0.3, "sigma": 0.3, "amplitude": 0.2})
        run_scattering(cfg)
        raw = os.path.join(cfg.outdir, "psi.raw")
        with open(raw, "rb") as fh:
            header = fh.read(64).decode("ascii")
            assert header.startswith("CVLATTICE N=8 M=32 SNAPSHOTS=3")
            data = np.frombuffer(fh.read(), dtype="<c16")
        assert data.shape == (3 * 8 * 32,)
        # final snapshot rows are unit-norm wavefunctions
        last = data[-8 * 32 :].reshape(8, 32)
        xi = 12.0 / 32
        assert np.allclose(xi * np.sum(np.abs(last) ** 2, axis=1), 1.0, atol=1e-9)


class TestDegenerateCheck:
    def test_uniform_lattice_tracks_single_mode(self, tmp_path):
        cfg = cfg_for(
            tmp_path,
            "degenerate-check",
            "n_sites=8",
            "total_time=5.0",
            "record_stride=100",
        )
        metrics = run_degenerate_check(cfg)
        assert metrics["max_intersite_deviation"] < 1e-10
        assert metrics["max_single_mode_deviation"] < 1e-10
        # the pure-anharmonic reference differs only by Trotter commutators
        assert metrics["max_anharmonic_density_deviation"] < 0.05


class TestOracleCompare:
    def test_distances_and_monotonicity_fields(self, tmp_path):
        cfg = cfg_for(
            tmp_path,
            "oracle-compare",
            "total_time=0.25",
            "dt_halvings=1",
            "fock_cutoff=8",
        )
        metrics = run_oracle_compare(cfg)
        assert "l2_distance_dt0.01" in metrics
        assert "cutoff_convergence_l2" in metrics
        assert set(metrics) >= {"monotone_in_dt"}
        header, rows = read_csv(os.path.join(cfg.outdir, "densities.csv"))
        assert header == ["site", "q_index", "q", "sim_density", "exact_density"]
        assert len(rows) == cfg.n_sites * cfg.m_points


class TestDeterminismAndRoundTrip:
    def test_bit_identical_outputs(self, tmp_path):
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        for out in (out_a, out_b):
            cfg = load_config(
                "propagator",
                None,
                [f'outdir="{out}"', "n_sites=24", "total_time=2.0", "record_stride=50"],
            )
            run_propagator(cfg)
        for name in ("field.csv", "energy.csv", "norms.csv", "slice.csv", "metrics.csv"):
            with open(os.path.join(out_a, name), "rb") as fa:
                da = fa.read()
            with open(os.path.join(out_b, name), "rb") as fb:
                db = fb.read()
            assert da == db, name

    def test_csv_round_trip_17_digits(self, tmp_path):
        cfg = cfg_for(
            tmp_path, "propagator", "n_sites=12", "total_time=1.0", "record_stride=100"
        )
        run_propagator(cfg)
        from cvlattice.lattice import LatticeState, SimulationParams, build_gates, evolve
        from cvlattice.prep import delta_impulse

        p = SimulationParams(
            n_sites=12, mass=1.0, dt=0.01, total_time=1.0, record_stride=100
        )
        state = LatticeState.vacuum(p)
        delta_impulse(state, 6, 1.0)
        series = evolve(state, build_gates(p))
        _, rows = read_csv(os.path.join(cfg.outdir, "field.csv"))
        reread = np.array([float(r[2]) for r in rows]).reshape(series.field_vev.shape)
        assert np.array_equal(reread, series.field_vev)


class TestCli:
    def test_cli_success_and_output(self, tmp_path, capsys):
        out = str(tmp_path / "cli-run")
        code = main(
            [
                "propagator",
                f'outdir="{out}"',
                "n_sites=12",
                "total_time=0.5",
                "record_stride=50",
            ]
        )
        assert code == 0
        captured = capsys.readouterr()
        assert "slice_pearson_r" in captured.out or "max_field_outside_cone" in captured.out
        assert os.path.exists(os.path.join(out, "field.csv"))

    def test_cli_config_error_exit_2(self, capsys):
        assert main(["propagator", "n_sites=banana"]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_cli_unknown_key_exit_2(self, capsys):
        assert main(["propagator", "bogus_key=3"]) == 2

    def test_cli_subprocess_entry(self, tmp_path):
        out = str(tmp_path / "sub")
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "cvlattice.cli",
                "single-qumode",
                f'outdir="{out}"',
                "times=[0.5]",
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "l2_error" in proc.stdout

    def test_cli_subprocess_bad_config_exit_2(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "cvlattice.cli", "propagator", "--config", "/no/such.toml"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 2

    def test_numerical_failure_exit_3(self, monkeypatch, capsys):
        from cvlattice.lattice import NumericalFailure
        import cvlattice.runner

        failure = NumericalFailure(421)
        assert failure.step == 421
        assert "421" in str(failure)

        def boom(config):
            raise NumericalFailure(421)

        monkeypatch.setitem(cvlattice.runner.RUNNERS, "propagator", boom)
        assert main(["propagator", "total_time=1.0", "n_sites=8"]) == 3
        err = capsys.readouterr().err
        assert "numerical failure" in err and "421" in err
