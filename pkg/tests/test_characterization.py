"""Measured properties of the entanglement-truncated hopping scheme.

These tests document, as executable statements, why several acceptance
thresholds are out of reach for the product-state truncation that this
artifact (faithfully) implements:

* In the free theory the stacked site wavefunctions decouple over the
  site-Fourier modes, where mode k evolves under a harmonic oscillator
  of frequency omega_k while the shared vacuum reference stays at
  frequency omega.  A single-excitation signal therefore beats at

      Omega_k = (3 omega_k - omega) / 2  =  omega_k + (omega_k - omega)/2

  instead of omega_k, which multiplies non-relativistic group velocities
  by 3/2 and moves the causal front out accordingly.

* For a position impulse the response is cosine-type in time (the time
  derivative of the causal propagator), while the J0 shape belongs to a
  momentum (field time derivative) impulse; a momentum impulse recovers
  the J0 phase but keeps the distorted dispersion.
"""

import numpy as np
import pytest

from cvlattice.lattice import LatticeState, SimulationParams, build_gates, evolve
from cvlattice.oracle import bessel_j0, dispersion
from cvlattice.prep import WavepacketSpec, gaussian_wavepacket, momentum_impulse


def pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    return float(np.sum(a * b) / np.sqrt(np.sum(a * a) * np.sum(b * b)))


class TestSchemeDispersion:
    @pytest.mark.parametrize("alpha", [2, 5])
    def test_single_mode_beat_frequency(self, alpha):
        n = 32
        p = SimulationParams(n_sites=n, mass=1.0, dt=0.01, total_time=10.0, record_stride=10)
        disp = dispersion(n, 1.0, 1.0)
        k0 = disp.momenta[alpha]
        state = LatticeState.vacuum(p)
        spec = WavepacketSpec(center=0.0, momentum=k0, sigma=1e-6, amplitude=0.05)
        gaussian_wavepacket(state, spec)
        series = evolve(state, build_gates(p))
        x = np.arange(n)
        amp = series.field_vev @ np.exp(-1j * k0 * x) / n
        phase = np.unwrap(np.angle(amp))
        beat = -np.polyfit(series.times, phase, 1)[0]
        w_k = disp.omegas[alpha]
        omega_scheme = (3.0 * w_k - 1.0) / 2.0
        assert beat == pytest.approx(omega_scheme, abs=2e-3)
        # and clearly distinct from the physical mode frequency
        assert abs(beat - w_k) > 10 * abs(beat - omega_scheme)

    def test_group_velocity_ratio_three_halves(self):
        # packet speed over the physical group velocity, frozen ~1.4
        # (3/2 from the dispersion slope, reduced a little by envelope
        # distortion at finite sigma)
        p = SimulationParams(n_sites=128, mass=1.0, dt=0.01, total_time=50.0, record_stride=100)
        state = LatticeState.vacuum(p)
        gaussian_wavepacket(state, WavepacketSpec(center=30.0, momentum=0.3, sigma=0.09))
        series = evolve(state, build_gates(p))
        x = np.arange(128)
        cents = [(row**2 @ x) / np.sum(row**2) for row in series.field_vev]
        speed = np.polyfit(series.times, cents, 1)[0]
        v_phys = 0.3 / np.sqrt(1.09)
        assert 1.25 < speed / v_phys < 1.55


@pytest.fixture(scope="module")
def slices():
    out = {}
    for quad in ("position", "momentum"):
        p = SimulationParams(n_sites=100, mass=1.0, dt=0.01, total_time=40.0, record_stride=25)
        state = LatticeState.vacuum(p)
        n0 = 50
        if quad == "momentum":
            momentum_impulse(state, n0, 1.0)
        else:
            from cvlattice.prep import delta_impulse

            delta_impulse(state, n0, 1.0)
        series = evolve(state, build_gates(p))
        out[quad] = (series.times, series.field_vev[:, n0])
    return out


class TestSplitStepOrder:
    def test_dt_halving_reduces_benchmark_error_twofold(self):
        # first-order splitting: the t-fixed density error scales ~ dt,
        # so halving dt buys a factor ~2 (measured 2.07 at t=100; the
        # same ratio holds at t=20 used here for speed)
        from cvlattice.gates import apply_diagonal_step, build_potential_phase, build_rotation
        from cvlattice.oracle import DenseQumodeEvolver
        from cvlattice.qumode import build_grid, fock_table, ground_state

        grid = build_grid(200, 20.0)
        table = fock_table(grid, 1.0, 80)
        eps = 0.1

        def v(q):
            return -(1.0 + eps / 4.0) / 2.0 * q**3 + 0.125 * q**4

        oracle = DenseQumodeEvolver(grid, 1.0, v)
        psi0 = ground_state(grid, 1.0)
        exact = oracle.evolve(psi0, 20.0).density()
        errs = []
        for dt in (0.01, 0.005):
            rot = build_rotation(table, dt)
            pot = build_potential_phase(grid, v, dt)
            psi = psi0
            for _ in range(int(round(20.0 / dt))):
                psi, _ = apply_diagonal_step(psi, rot, pot)
            errs.append(np.sqrt(grid.spacing * np.sum((psi.density() - exact) ** 2)))
        ratio = errs[0] / errs[1]
        assert 1.6 < ratio < 2.8


class TestImpulseQuadrature:

    def test_momentum_impulse_carries_the_j0_phase(self, slices):
        # model: mode sum with the scheme's beat frequencies, sine in
        # time for the momentum kick, amplitude ~ 1/omega_k per mode
        t, sl = slices["momentum"]
        mask = t > 3.0
        disp = dispersion(100, 1.0, 1.0)
        omega_scheme = (3.0 * disp.omegas - 1.0) / 2.0
        model = np.mean(np.sin(np.outer(t, omega_scheme)) / disp.omegas, axis=1)
        assert pearson(sl[mask], model[mask]) > 0.85
        r_j0 = pearson(sl[mask], 0.5 * np.asarray(bessel_j0(t[mask])))
        assert 0.3 < r_j0 < 0.95  # same quadrature as J0, distorted dispersion

    def test_position_impulse_is_cosine_type(self, slices):
        t, sl = slices["position"]
        mask = t > 3.0
        disp = dispersion(100, 1.0, 1.0)
        omega_scheme = (3.0 * disp.omegas - 1.0) / 2.0
        model_cos = np.mean(np.cos(np.outer(t, omega_scheme)) / disp.omegas**2, axis=1)
        r_cos = pearson(sl[mask], model_cos[mask])
        r_j0 = pearson(sl[mask], 0.5 * np.asarray(bessel_j0(t[mask])))
        assert r_cos > 0.8
        assert abs(r_j0) < 0.5
