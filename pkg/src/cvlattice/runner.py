"""Experiment drivers and result serialization.

Each driver consumes a validated ExperimentConfig, runs deterministically
and writes one directory of outputs:

    config-echo.toml   resolved configuration
    field.csv          t, site, value          (lattice experiments)
    energy.csv         t, site, value
    norms.csv          t, max_drift
    metrics.csv        name, value
    densities.csv      per-experiment density comparisons
    slice.csv          t, field, propagator    (propagator experiment)
    centroids.csv      t, centroid per packet  (scattering experiment)
    psi.raw            optional raw snapshots (64-byte ASCII header,
                       little-endian float64 re/im pairs, site-major)

Floats are printed with 17 significant digits so re-reading reproduces
the in-memory values exactly.
"""

from __future__ import annotations

import os
from typing import Iterable, Sequence

import numpy as np

from cvlattice.config import ConfigError, ExperimentConfig, echo_toml
from cvlattice.gates import apply_diagonal_step, build_potential_phase, build_rotation
from cvlattice.lattice import (
    LatticeState,
    NumericalFailure,
    ObservableSeries,
    SimulationParams,
    build_gates,
    energy_density,
    evolve,
    field_expectation,
    trotter_step,
)
from cvlattice.oracle import DenseQumodeEvolver, exact_few_site, retarded_propagator
from cvlattice.prep import (
    WavepacketSpec,
    delta_impulse,
    gaussian_wavepacket,
    momentum_impulse,
    two_wavepackets,
)
from cvlattice.qumode import build_grid, displaced_ground_state, fock_table, ground_state

__all__ = ["run_experiment", "RUNNERS"]

_FMT = "%.17g"


def _fmt(value: float) -> str:
    return _FMT % float(value)


def _write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else _fmt(c) for c in row) + "\n")


def _write_series(outdir: str, series: ObservableSeries, header_only: bool = False) -> None:
    n = series.field_vev.shape[1]
    def site_rows(matrix):
        if header_only:
            return
        for k, t in enumerate(series.times):
            for s in range(n):
                yield (t, "%d" % s, matrix[k, s])

    _write_csv(os.path.join(outdir, "field.csv"), ("t", "site", "value"), site_rows(series.field_vev))
    _write_csv(
        os.path.join(outdir, "energy.csv"), ("t", "site", "value"), site_rows(series.energy_density)
    )
    norm_rows = (
        [] if header_only else [(t, d) for t, d in zip(series.times, series.norm_drift)]
    )
    _write_csv(os.path.join(outdir, "norms.csv"), ("t", "max_drift"), norm_rows)


def _write_metrics(outdir: str, metrics: dict) -> None:
    _write_csv(
        os.path.join(outdir, "metrics.csv"),
        ("name", "value"),
        ((k, v) for k, v in metrics.items()),
    )


def _write_psi_raw(path: str, snapshots: Sequence[np.ndarray]) -> None:
    n, m = snapshots[0].shape
    header = f"CVLATTICE N={n} M={m} SNAPSHOTS={len(snapshots)}"
    header = header.ljust(63) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for snap in snapshots:
            fh.write(np.ascontiguousarray(snap, dtype="<c16").tobytes())


def _prepare_outdir(config: ExperimentConfig) -> str:
    outdir = config.outdir
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "config-echo.toml"), "w") as fh:
        fh.write(echo_toml(config))
    return outdir


def _sim_params(config: ExperimentConfig) -> SimulationParams:
    return SimulationParams(
        n_sites=config.n_sites,
        mass=config.mass,
        dt=config.dt,
        total_time=config.total_time,
        spacing=config.spacing,
        coupling=config.coupling,
        record_stride=config.record_stride,
        m_points=config.m_points,
        extent=config.extent,
        l_trunc=config.l_trunc,
    )


def _periodic_distance(n_sites: int, site: int) -> np.ndarray:
    idx = np.arange(n_sites)
    raw = np.abs(idx - site)
    return np.minimum(raw, n_sites - raw)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.sum(a * a) * np.sum(b * b))
    return float(np.sum(a * b) / denom) if denom > 0 else 0.0


# ---------------------------------------------------------------------------
# single-qumode benchmark


def _benchmark_potential(epsilon: float):
    def v(q):
        return -(1.0 + epsilon / 4.0) / 2.0 * q**3 + 0.125 * q**4

    return v


def run_single_qumode(config: ExperimentConfig) -> dict:
    """Split-step vs dense-diagonalization densities for one anharmonic mode."""
    outdir = _prepare_outdir(config)
    grid = build_grid(config.m_points, config.extent)
    table = fock_table(grid, config.mass, config.l_trunc)
    rot = build_rotation(table, config.dt)
    potential = _benchmark_potential(config.epsilon)
    pot = build_potential_phase(grid, potential, config.dt)

    if config.initial_displacement != 0.0:
        psi = displaced_ground_state(grid, config.mass, config.initial_displacement)
    else:
        psi = ground_state(grid, config.mass)
    psi0 = psi

    times = sorted(set(float(t) for t in config.times))
    if any(t < 0 for t in times):
        raise ConfigError("snapshot times must be non-negative")
    steps = []
    for t in times:
        n = t / config.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError(f"snapshot time {t} is not a multiple of dt={config.dt}")
        steps.append(int(round(n)))

    oracle = DenseQumodeEvolver(grid, config.mass, potential)
    dens_rows = []
    norm_rows = []
    metrics = {}
    step = 0
    worst = 0.0
    for target_t, target_step in zip(times, steps):
        while step < target_step:
            psi, nrm = apply_diagonal_step(psi, rot, pot)
            worst = max(worst, abs(nrm - 1.0))
            step += 1
            if not np.all(np.isfinite(psi.amplitudes)):
                raise NumericalFailure(step)
        exact = oracle.evolve(psi0, target_t)
        d_sim = psi.density()
        d_ex = exact.density()
        xi = grid.spacing
        l2 = float(np.sqrt(xi * np.sum((d_sim - d_ex) ** 2)))
        rel = l2 / float(np.sqrt(xi * np.sum(d_ex**2)))
        metrics[f"l2_error_t{target_t:g}"] = l2
        metrics[f"l2_relative_error_t{target_t:g}"] = rel
        norm_rows.append((target_t, worst))
        worst = 0.0
        for j in range(grid.m_points):
            dens_rows.append((target_t, "%d" % j, grid.points[j], d_sim[j], d_ex[j]))

    _write_csv(
        os.path.join(outdir, "densities.csv"),
        ("t", "q_index", "q", "trotter_density", "exact_density"),
        dens_rows,
    )
    _write_csv(os.path.join(outdir, "norms.csv"), ("t", "max_drift"), norm_rows)
    # uniform run layout: lattice-series files stay header-only here
    _write_csv(os.path.join(outdir, "field.csv"), ("t", "site", "value"), [])
    _write_csv(os.path.join(outdir, "energy.csv"), ("t", "site", "value"), [])
    _write_metrics(outdir, metrics)
    return metrics


# ---------------------------------------------------------------------------
# propagator


def run_propagator(config: ExperimentConfig) -> dict:
    """Impulse response of the free lattice against the causal propagator."""
    outdir = _prepare_outdir(config)
    params = _sim_params(config)
    state = LatticeState.vacuum(params)
    site = config.impulse_site if config.impulse_site >= 0 else params.n_sites // 2
    if config.impulse_quadrature == "momentum":
        momentum_impulse(state, site, config.impulse_amplitude)
    else:
        delta_impulse(state, site, config.impulse_amplitude)

    header_only = params.n_steps == 0
    snapshots: list[np.ndarray] = []
    hook = (lambda s: snapshots.append(s.psi.copy())) if config.write_psi else None
    series = evolve(state, on_record=hook)
    _write_series(outdir, series, header_only=header_only)

    t = series.times
    slice_field = series.field_vev[:, site]
    reference = np.asarray(retarded_propagator(params.mass, 0.0, t))
    slice_rows = [] if header_only else list(zip(t, slice_field, reference))
    _write_csv(os.path.join(outdir, "slice.csv"), ("t", "field", "propagator"), slice_rows)

    metrics = {"impulse_site": float(site), "impulse_amplitude": config.impulse_amplitude}
    amp = abs(config.impulse_amplitude)
    if not header_only:
        # causality: field outside the widened cone |x - x0| > t + 3a
        dist = _periodic_distance(params.n_sites, site) * params.spacing
        outside = dist[None, :] > (t[:, None] + 3.0 * params.spacing)
        worst_outside = float(np.max(np.abs(series.field_vev[outside]))) if outside.any() else 0.0
        metrics["max_field_outside_cone"] = worst_outside
        metrics["max_field_outside_cone_relative"] = worst_outside / amp if amp > 0 else 0.0
        # deep time-like correlation, excluding the 3-lattice-unit band at the cone
        mask = t > 3.0 * params.spacing
        if mask.sum() >= 3:
            metrics["slice_pearson_r"] = _pearson(slice_field[mask], reference[mask])
        metrics["max_norm_drift"] = float(series.norm_drift.max())
    _write_metrics(outdir, metrics)
    if config.write_psi and snapshots:
        _write_psi_raw(os.path.join(outdir, "psi.raw"), snapshots)
    return metrics


# ---------------------------------------------------------------------------
# scattering


def _centroid(weights: np.ndarray, positions: np.ndarray) -> float:
    total = weights.sum()
    return float((weights * positions).sum() / total) if total > 0 else float("nan")


def run_scattering(config: ExperimentConfig) -> dict:
    """Wavepacket propagation and collision under the quartic interaction."""
    outdir = _prepare_outdir(config)
    params = _sim_params(config)
    if not 1 <= len(config.wavepackets) <= 2:
        raise ConfigError("scattering needs one or two [[wavepacket]] tables")
    specs = [WavepacketSpec(**p) for p in config.wavepackets]
    state = LatticeState.vacuum(params)
    if len(specs) == 2:
        two_wavepackets(state, specs[0], specs[1])
    else:
        gaussian_wavepacket(state, specs[0])

    header_only = params.n_steps == 0
    vacuum_energy = None
    if not header_only:
        vacuum_energy = _vacuum_energy_per_site(params)
    snapshots: list[np.ndarray] = []
    hook = (lambda s: snapshots.append(s.psi.copy())) if config.write_psi else None
    series = evolve(state, on_record=hook)
    _write_series(outdir, series, header_only=header_only)

    n = params.n_sites
    x = np.arange(n) * params.spacing
    metrics = {}
    cent_rows = []
    if not header_only:
        # packet centroids from the field-squared envelope: whole lattice
        # for a single packet, one half each while two stay separated
        if len(specs) == 1:
            masks = [np.ones(n, dtype=bool)]
        else:
            masks = [np.arange(n) < n // 2, np.arange(n) >= n // 2]
        w = series.field_vev**2
        for k, t in enumerate(series.times):
            row = [t]
            for mask in masks:
                row.append(_centroid(w[k, mask], x[mask]))
            cent_rows.append(tuple(row))
        # speed of the first packet: full run for a lone packet, first
        # quarter (pre-collision) when two packets approach
        window = series.times[-1] if len(specs) == 1 else series.times[-1] / 4.0
        fit = [r for r in cent_rows if r[0] <= window]
        if len(fit) >= 2:
            tt = np.array([r[0] for r in fit])
            cc = np.array([r[1] for r in fit])
            good = np.isfinite(cc)
            if good.sum() >= 2:
                speed = float(np.polyfit(tt[good], cc[good], 1)[0])
                metrics["packet_speed"] = speed
                metrics["packet_speed_abs"] = abs(speed)
        # collision time: peak of the central excess energy density
        central = _periodic_distance(n, n // 2) <= max(2, n // 50)
        excess = series.energy_density[:, central].max(axis=1) - vacuum_energy
        k_max = int(np.argmax(excess))
        metrics["collision_time"] = float(series.times[k_max])
        metrics["collision_peak_energy"] = float(excess[k_max])
        metrics["max_norm_drift"] = float(series.norm_drift.max())
    headers = ["t"] + [f"centroid_{i}" for i in range(len(specs))]
    _write_csv(os.path.join(outdir, "centroids.csv"), headers, cent_rows)
    _write_metrics(outdir, metrics)
    if config.write_psi and snapshots:
        _write_psi_raw(os.path.join(outdir, "psi.raw"), snapshots)
    return metrics


def _vacuum_energy_per_site(params: SimulationParams) -> float:
    vac = LatticeState.vacuum(params)
    return float(energy_density(vac).max())


# ---------------------------------------------------------------------------
# degenerate lattice check


def run_degenerate_check(config: ExperimentConfig) -> dict:
    """Uniform anharmonic lattice against its single-mode reduction.

    On a degenerate lattice the hopping phases and the q^2/a^2 gradient
    remnant cancel per step, so every site must track a single mode
    evolved with the same diagonal gates followed by the alpha = 0 hop
    phase.  Deviations measure only floating-point noise of the FFT
    round trip.
    """
    outdir = _prepare_outdir(config)
    params = _sim_params(config)
    gates = build_gates(params)
    grid = gates.grid

    psi0 = displaced_ground_state(grid, params.mass, config.displacement)
    state = LatticeState(params, grid, np.tile(psi0.amplitudes, (params.n_sites, 1)))

    # single-mode reference: identical diagonal gates, then the uniform
    # (alpha = 0) hop phase, with the same renormalization cadence
    ref = psi0.amplitudes.copy()
    hop0 = gates.hop.phases[0]

    # independent anharmonic-only reference (no gradient remnant, no hop):
    # equal to the lattice evolution up to Trotter-commutator terms
    anh_pot = build_potential_phase(grid, params.interaction, params.dt)
    anh = psi0

    xi = grid.spacing
    max_intersite = 0.0
    max_vs_single = 0.0
    max_vs_anharmonic = 0.0
    times, fields, energies, drifts = [], [], [], []

    def snapshot(worst):
        times.append(state.time)
        fields.append(field_expectation(state))
        energies.append(energy_density(state))
        drifts.append(worst)

    snapshot(0.0)
    worst = 0.0
    for step in range(1, params.n_steps + 1):
        worst = max(worst, trotter_step(state, gates))
        ref = gates.fused.T @ ref
        ref = ref / grid.norm(ref)
        ref = hop0 * ref
        ref = ref / grid.norm(ref)
        anh, _ = apply_diagonal_step(anh, gates.rotation, anh_pot)
        dev_sites = np.sqrt(xi * np.sum(np.abs(state.psi - state.psi[0]) ** 2, axis=1)).max()
        dev_ref = np.sqrt(xi * np.sum(np.abs(state.psi[0] - ref) ** 2))
        dev_anh = np.sqrt(xi * np.sum((np.abs(state.psi[0]) ** 2 - anh.density()) ** 2))
        max_intersite = max(max_intersite, float(dev_sites))
        max_vs_single = max(max_vs_single, float(dev_ref))
        max_vs_anharmonic = max(max_vs_anharmonic, float(dev_anh))
        if step % params.record_stride == 0 or step == params.n_steps:
            state.check_finite(step)
            snapshot(worst)
            worst = 0.0

    series = ObservableSeries(
        times=np.array(times),
        field_vev=np.array(fields),
        energy_density=np.array(energies),
        total_energy=np.array([e.sum() for e in energies]),
        norm_drift=np.array(drifts),
    )
    _write_series(outdir, series, header_only=params.n_steps == 0)
    metrics = {
        "max_intersite_deviation": max_intersite,
        "max_single_mode_deviation": max_vs_single,
        "max_anharmonic_density_deviation": max_vs_anharmonic,
        "steps": float(params.n_steps),
    }
    _write_metrics(outdir, metrics)
    return metrics


# ---------------------------------------------------------------------------
# few-site oracle comparison


def run_oracle_compare(config: ExperimentConfig) -> dict:
    """Split-step lattice against the entanglement-exact few-site oracle."""
    outdir = _prepare_outdir(config)
    if config.n_sites > 3:
        raise ConfigError("oracle-compare supports at most 3 sites")
    displacements = [config.displacement] + [0.0] * (config.n_sites - 1)
    grid = build_grid(config.m_points, config.extent)

    exact = exact_few_site(
        config.n_sites,
        config.fock_cutoff,
        config.mass,
        config.coupling,
        config.spacing,
        displacements,
        config.total_time,
        grid=grid,
    )
    exact_double = exact_few_site(
        config.n_sites,
        2 * config.fock_cutoff,
        config.mass,
        config.coupling,
        config.spacing,
        displacements,
        config.total_time,
        grid=grid,
    )
    cutoff_shift = float(
        np.sqrt(grid.spacing * np.sum((exact.site_densities - exact_double.site_densities) ** 2))
    )

    metrics = {"cutoff_convergence_l2": cutoff_shift}
    xi = grid.spacing
    dens_rows = []
    dts = [config.dt / 2**k for k in range(config.dt_halvings + 1)]
    for k, dt in enumerate(dts):
        params = SimulationParams(
            n_sites=config.n_sites,
            mass=config.mass,
            dt=dt,
            total_time=config.total_time,
            spacing=config.spacing,
            coupling=config.coupling,
            record_stride=max(1, int(round(config.total_time / dt))),
            m_points=config.m_points,
            extent=config.extent,
            l_trunc=config.l_trunc,
        )
        state = LatticeState.vacuum(params)
        if config.displacement != 0.0:
            delta_impulse(state, 0, config.displacement)
        gates = build_gates(params)
        for step in range(params.n_steps):
            trotter_step(state, gates)
        state.check_finite(params.n_steps)
        sim_dens = np.abs(state.psi) ** 2
        per_site = np.sqrt(xi * np.sum((sim_dens - exact.site_densities) ** 2, axis=1))
        combined = float(np.sqrt(np.sum(per_site**2)))
        metrics[f"l2_distance_dt{dt:.17g}"] = combined
        for n in range(config.n_sites):
            metrics[f"l2_distance_site{n}_dt{dt:.17g}"] = float(per_site[n])
        if k == 0:
            for n in range(config.n_sites):
                for j in range(grid.m_points):
                    dens_rows.append(
                        ("%d" % n, "%d" % j, grid.points[j], sim_dens[n, j], exact.site_densities[n, j])
                    )
    distances = [metrics[f"l2_distance_dt{dt:.17g}"] for dt in dts]
    metrics["monotone_in_dt"] = float(all(b < a for a, b in zip(distances, distances[1:])))

    _write_csv(
        os.path.join(outdir, "densities.csv"),
        ("site", "q_index", "q", "sim_density", "exact_density"),
        dens_rows,
    )
    _write_csv(os.path.join(outdir, "field.csv"), ("t", "site", "value"), [])
    _write_csv(os.path.join(outdir, "energy.csv"), ("t", "site", "value"), [])
    _write_csv(os.path.join(outdir, "norms.csv"), ("t", "max_drift"), [])
    _write_metrics(outdir, metrics)
    return metrics


RUNNERS = {
    "single-qumode": run_single_qumode,
    "propagator": run_propagator,
    "scattering": run_scattering,
    "degenerate-check": run_degenerate_check,
    "oracle-compare": run_oracle_compare,
}


def run_experiment(config: ExperimentConfig) -> dict:
    return RUNNERS[config.experiment](config)
