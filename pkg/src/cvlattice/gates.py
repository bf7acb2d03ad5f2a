"""The three split-step operators: rotation, potential phase, hopping.

One evolution step applies, in order,

    psi  ->  U_hop . U_R . diag(e^{-i dt V(q)}) . psi

per site, where U_R is the harmonic rotation gate assembled in the Fock
basis, V is the effective on-site potential (gradient remnant q^2/a^2
plus the interaction), and the hopping transform mixes sites through a
circulant matrix that is diagonal in the site-Fourier basis with phases

    c_alpha(q) = exp(+i dt cos(2 pi alpha / N) q^2 / a^2).

Sign conventions: the nearest-neighbour coupling enters the Hamiltonian
as -(1/a^2) q_{n+1} q_n, so the hop carries e^{+i...} and the
compensating +q^2/a^2 sits in the potential.  On a degenerate lattice
(all sites equal) only the alpha = 0 Fourier mode is populated and the
two phases cancel exactly; tests pin both signs through that property.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from cvlattice.qumode import FockBasisTable, QuadratureGrid, QumodeWavefunction

__all__ = [
    "RotationGate",
    "PotentialPhase",
    "HopPhases",
    "build_rotation",
    "build_potential_phase",
    "apply_diagonal_step",
    "build_hop_phases",
    "apply_hop",
]


@dataclass(frozen=True)
class RotationGate:
    """Dense M x M matrix of the truncated harmonic rotation.

    U[i, j] = xi * sum_{l<=l_trunc} <q_i|l> e^{-i dt w (l + 1/2)} <l|q_j>.
    Unitary on the span of the tabulated Fock modes; outside it the gate
    projects, which is the only norm-leakage source in a step.
    """

    matrix: np.ndarray = field(repr=False)
    omega: float
    dt: float
    l_trunc: int


@dataclass(frozen=True)
class PotentialPhase:
    """Diagonal phases e^{-i dt V(q_i)}; exactly unit modulus."""

    diagonal: np.ndarray = field(repr=False)
    dt: float


@dataclass(frozen=True)
class HopPhases:
    """Site-Fourier phases of the truncated hopping transform.

    phases[alpha, j] = exp(+i dt cos(2 pi alpha / N) q_j^2 / a^2).
    """

    phases: np.ndarray = field(repr=False)
    n_sites: int
    spacing: float
    dt: float


def build_rotation(table: FockBasisTable, dt: float) -> RotationGate:
    """Assemble the rotation gate from a Fock table.

    dt may be negative to step backwards in time.
    """
    phases = np.exp(-1j * dt * table.frequency * (np.arange(table.l_trunc + 1) + 0.5))
    mat = table.grid.spacing * ((table.values * phases) @ table.values.T)
    return RotationGate(matrix=mat, omega=table.frequency, dt=float(dt), l_trunc=table.l_trunc)


def build_potential_phase(
    grid: QuadratureGrid,
    potential: Union[Callable[[np.ndarray], np.ndarray], np.ndarray],
    dt: float,
) -> PotentialPhase:
    """Diagonal phase gate for an arbitrary on-site potential.

    potential is a function of q evaluated on the grid, or a precomputed
    vector of values at the grid points.
    """
    v = potential(grid.points) if callable(potential) else np.asarray(potential, dtype=float)
    if v.shape != (grid.m_points,):
        raise ValueError(f"potential values have shape {v.shape}, expected ({grid.m_points},)")
    if not np.all(np.isfinite(v)):
        raise ValueError("potential is not finite on all grid points")
    return PotentialPhase(diagonal=np.exp(-1j * dt * v), dt=float(dt))


def apply_diagonal_step(
    psi: QumodeWavefunction, rot: RotationGate, pot: PotentialPhase
) -> tuple[QumodeWavefunction, float]:
    """Apply the potential phase then the rotation gate to one mode.

    Returns the renormalized wavefunction and the pre-renormalization
    norm (1 minus truncation leakage for that step).
    """
    out = rot.matrix @ (pot.diagonal * psi.amplitudes)
    nrm = psi.grid.norm(out)
    return QumodeWavefunction(psi.grid, out), nrm


def build_hop_phases(grid: QuadratureGrid, n_sites: int, a: float, dt: float) -> HopPhases:
    """Phase table c_alpha(q_j) for the truncated hopping transform."""
    if n_sites < 2:
        raise ValueError(f"hopping needs at least 2 sites, got {n_sites}")
    if not a > 0:
        raise ValueError(f"lattice spacing must be positive, got {a}")
    cosines = np.cos(2.0 * np.pi * np.arange(n_sites) / n_sites)
    phases = np.exp(1j * dt * np.outer(cosines, grid.points**2) / a**2)
    return HopPhases(phases=phases, n_sites=int(n_sites), spacing=float(a), dt=float(dt))


def apply_hop(site_amplitudes: np.ndarray, hop: HopPhases, grid: QuadratureGrid) -> tuple[np.ndarray, float]:
    """Mix the N site wavefunctions through the circulant hopping transform.

    site_amplitudes is the (N, M) stack of per-site amplitude vectors.
    At every grid index j independently, the length-N vector across sites
    is Fourier transformed with U[alpha, m] = nu^{alpha m} / sqrt(N)
    (nu = e^{2 pi i / N}), multiplied by c_alpha(q_j), and transformed
    back.  Implemented with FFTs over the site axis; with numpy's kernel
    conventions the unitary pair is ifft followed by fft, the sqrt(N)
    factors cancelling.

    Each output row is renormalized; returns (new stack, max relative
    norm deviation before renormalization).
    """
    psi = np.asarray(site_amplitudes)
    if psi.ndim != 2 or psi.shape[0] != hop.n_sites:
        raise ValueError(
            f"site stack has shape {psi.shape}, expected ({hop.n_sites}, {grid.m_points})"
        )
    if psi.shape[1] != grid.m_points:
        raise ValueError("site stack and hop phases live on different grids")
    tilde = np.fft.ifft(psi, axis=0)
    tilde *= hop.phases
    out = np.fft.fft(tilde, axis=0)
    norms = np.sqrt(grid.spacing * np.sum(np.abs(out) ** 2, axis=1))
    drift = float(np.max(np.abs(norms - 1.0)))
    out /= norms[:, None]
    return out, drift
