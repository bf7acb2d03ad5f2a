"""Initial lattice states: impulses, Gaussian wavepackets, proto profiles.

Wavepackets occupy only the lowest two Fock levels of each site,

    |psi_n> = c0_n |0> + c1_n |1>,
    c1_n = A * sum_alpha (2 w_alpha N)^{-1/2}
               exp(-(k_alpha - kbar)^2 / (2 sigma^2)) exp(i k_alpha (x_n - xbar)),

with the momentum sum over signed k_alpha (alpha and N - alpha paired as
+-k) so that kbar > 0 yields a right mover.  c0_n is fixed real and
non-negative by per-site unit normalization, which is exact by
construction rather than relying on a closed-form normalization factor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from cvlattice.lattice import LatticeState, SimulationParams
from cvlattice.oracle import dispersion
from cvlattice.qumode import displaced_ground_state, fock_table

__all__ = [
    "WavepacketSpec",
    "delta_impulse",
    "momentum_impulse",
    "single_excitation_amplitudes",
    "gaussian_wavepacket",
    "two_wavepackets",
    "proto_wavepacket_profile",
]


@dataclass(frozen=True)
class WavepacketSpec:
    """Gaussian packet: lattice-position center, mean momentum, momentum
    spread sigma, and an overall amplitude scale."""

    center: float
    momentum: float
    sigma: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"momentum spread must be positive, got {self.sigma}")


def _check_nonrelativistic(spec: WavepacketSpec, omega: float):
    if abs(spec.momentum) >= omega or spec.sigma >= omega:
        warnings.warn(
            f"wavepacket (kbar={spec.momentum}, sigma={spec.sigma}) is not "
            f"non-relativistic relative to omega={omega}; the decoupled "
            "vacuum is a poor approximation for such modes",
            stacklevel=3,
        )


def delta_impulse(state: LatticeState, site: int, amplitude: float) -> LatticeState:
    """Displace one site's ground state along q; all others stay vacuum.

    The field profile at t=0 is `amplitude` at the chosen site and zero
    elsewhere, a one-site-wide approximation to a delta function.
    """
    n = int(site)
    if not 0 <= n < state.params.n_sites:
        raise ValueError(f"site {site} outside 0..{state.params.n_sites - 1}")
    psi = displaced_ground_state(state.grid, state.params.mass, amplitude)
    state.psi[n] = psi.amplitudes
    return state


def momentum_impulse(state: LatticeState, site: int, amplitude: float) -> LatticeState:
    """Displace one site's ground state along p instead of q.

    Leaves <q> = 0 everywhere but kicks <p> = amplitude at the chosen
    site, i.e. an impulse in the field's conjugate momentum (the field
    time derivative), which is the initial condition whose response is
    the retarded propagator itself.
    """
    n = int(site)
    if not 0 <= n < state.params.n_sites:
        raise ValueError(f"site {site} outside 0..{state.params.n_sites - 1}")
    state.psi[n] = state.psi[n] * np.exp(1j * amplitude * state.grid.points)
    state.renormalize()
    return state


def single_excitation_amplitudes(spec: WavepacketSpec, params: SimulationParams) -> np.ndarray:
    """The complex c1 field of a packet, before per-site normalization."""
    n = params.n_sites
    a = params.spacing
    disp = dispersion(n, a, params.mass)
    k = disp.signed_momenta
    w = disp.omegas
    envelope = np.exp(-((k - spec.momentum) ** 2) / (2.0 * spec.sigma**2))
    weights = envelope / np.sqrt(2.0 * w * n)
    x = a * np.arange(n)
    phases = np.exp(1j * np.outer(x - spec.center, k))
    return spec.amplitude * (phases @ weights)


def _excite(state: LatticeState, c1: np.ndarray) -> LatticeState:
    """Load per-site Fock-{0,1} amplitudes into grid wavefunctions."""
    mags = np.abs(c1)
    if np.any(mags > 1.0):
        raise ValueError(
            f"excitation amplitude exceeds 1 (max {mags.max():.4f}); "
            "reduce the wavepacket amplitude scale"
        )
    c0 = np.sqrt(1.0 - mags**2)
    table = fock_table(state.grid, state.params.mass, 1)
    g = table.column(0)
    u = table.column(1)
    state.psi = c0[:, None] * g[None, :] + c1[:, None] * u[None, :]
    state.renormalize()
    return state


def gaussian_wavepacket(state: LatticeState, spec: WavepacketSpec) -> LatticeState:
    """Prepare a single Gaussian packet on the vacuum lattice."""
    _check_nonrelativistic(spec, state.params.mass)
    return _excite(state, single_excitation_amplitudes(spec, state.params))


def two_wavepackets(
    state: LatticeState, spec_left: WavepacketSpec, spec_right: WavepacketSpec
) -> LatticeState:
    """Superpose two packets' excitation fields, then normalize per site.

    Warns if the packet envelopes overlap appreciably (cosine similarity
    of |c1| envelopes above 1e-6), since overlapping preparations are
    not independent excitations.
    """
    c_left = single_excitation_amplitudes(spec_left, state.params)
    c_right = single_excitation_amplitudes(spec_right, state.params)
    _check_nonrelativistic(spec_left, state.params.mass)
    _check_nonrelativistic(spec_right, state.params.mass)
    el, er = np.abs(c_left), np.abs(c_right)
    denom = np.linalg.norm(el) * np.linalg.norm(er)
    if denom > 0:
        overlap = float(np.dot(el, er) / denom)
        if overlap >= 1e-6:
            warnings.warn(
                f"wavepacket envelopes overlap (similarity {overlap:.2e}); "
                "packets are not well separated",
                stacklevel=2,
            )
    return _excite(state, c_left + c_right)


def proto_wavepacket_profile(
    spec: WavepacketSpec, n_sites: int, omega: float, spacing: float = 1.0
) -> np.ndarray:
    """Displacement schedule for device-style packet preparation.

    Returns the real per-site field values

        (A / (omega N)) sum_alpha exp(-(k_alpha - kbar)^2 / (2 sigma^2))
                                   cos(k_alpha (x_n - xbar)),

    one displacement per site.  Being real, the profile superposes a
    left mover and a right mover; free evolution splits it in two.
    """
    disp = dispersion(n_sites, spacing, omega)
    k = disp.signed_momenta
    envelope = np.exp(-((k - spec.momentum) ** 2) / (2.0 * spec.sigma**2))
    x = spacing * np.arange(n_sites)
    cosines = np.cos(np.outer(x - spec.center, k))
    return spec.amplitude / (omega * n_sites) * (cosines @ envelope)
