"""Quadrature grids, single-mode wavefunctions and Fock-basis tables.

A qumode is represented by complex amplitudes psi(q_j) on a uniform grid
of M quadrature points covering [-L/2, L/2).  States are normalized with
the quadrature-sum norm  xi * sum_j |psi(q_j)|^2 = 1  where xi = L/M is
the grid spacing.  The Fock table holds harmonic-oscillator eigenfunctions

    <q|l> = (w/pi)^{1/4} (2^l l!)^{-1/2} H_l(sqrt(w) q) exp(-w q^2 / 2)

evaluated by the normalized three-term recurrence, which is stable to
l of a few hundred (no factorials appear at any stage).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QuadratureGrid",
    "QumodeWavefunction",
    "FockBasisTable",
    "build_grid",
    "fock_table",
    "ground_state",
    "displaced_ground_state",
    "fock_decompose",
    "fock_compose",
]

@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform discretisation q_j = j*xi - L/2, j = 0..M-1, xi = L/M."""

    m_points: int
    extent: float
    spacing: float = field(init=False)
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.m_points < 2:
            raise ValueError(f"need at least 2 grid points, got {self.m_points}")
        if not self.extent > 0:
            raise ValueError(f"grid extent must be positive, got {self.extent}")
        xi = self.extent / self.m_points
        pts = np.arange(self.m_points) * xi - self.extent / 2.0
        pts.setflags(write=False)
        object.__setattr__(self, "spacing", xi)
        object.__setattr__(self, "points", pts)

    def norm(self, amplitudes: np.ndarray) -> float:
        """Quadrature-sum norm of an amplitude vector on this grid."""
        return float(np.sqrt(self.spacing * np.sum(np.abs(amplitudes) ** 2)))

    def wavenumbers(self) -> np.ndarray:
        """FFT wavenumbers conjugate to q, for spectral derivatives."""
        return 2.0 * np.pi * np.fft.fftfreq(self.m_points, d=self.spacing)


class QumodeWavefunction:
    """Complex amplitudes of one mode on a shared grid, unit-normalized.

    The constructor renormalizes, so any instance satisfies the norm
    invariant to machine precision.  Instances are treated as immutable;
    gate application returns new objects.
    """

    __slots__ = ("grid", "amplitudes")

    def __init__(self, grid: QuadratureGrid, amplitudes: np.ndarray):
        amps = np.asarray(amplitudes, dtype=complex)
        if amps.shape != (grid.m_points,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, expected ({grid.m_points},)"
            )
        nrm = grid.norm(amps)
        if not nrm > 0 or not np.isfinite(nrm):
            raise ValueError("cannot normalize: zero or non-finite amplitudes")
        amps = amps / nrm
        amps.setflags(write=False)
        self.grid = grid
        self.amplitudes = amps

    def norm(self) -> float:
        return self.grid.norm(self.amplitudes)

    def density(self) -> np.ndarray:
        """Probability density |psi(q_j)|^2."""
        return np.abs(self.amplitudes) ** 2

    def mean_q(self) -> float:
        """<q> by quadrature sum."""
        return float(self.grid.spacing * np.sum(self.grid.points * self.density()))

    def mean_q2(self) -> float:
        return float(self.grid.spacing * np.sum(self.grid.points**2 * self.density()))

    def mean_p(self) -> float:
        """<p> via spectral differentiation (grid treated as periodic)."""
        ft = np.fft.fft(self.amplitudes)
        k = self.grid.wavenumbers()
        w = np.abs(ft) ** 2
        return float(np.sum(k * w) / np.sum(w))

    def mean_p2(self) -> float:
        """<p^2> via spectral differentiation."""
        ft = np.fft.fft(self.amplitudes)
        k = self.grid.wavenumbers()
        w = np.abs(ft) ** 2
        return float(np.sum(k**2 * w) / np.sum(w))

    def overlap(self, other: "QumodeWavefunction") -> complex:
        """Quadrature-sum inner product <self|other>."""
        return complex(self.grid.spacing * np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "QumodeWavefunction") -> float:
        return abs(self.overlap(other)) ** 2


@dataclass(frozen=True)
class FockBasisTable:
    """Precomputed eigenfunction values <q_i|l> for one frequency.

    values[i, l] holds <q_i|l> for l = 0..l_trunc.  Rows are grid points.
    """

    grid: QuadratureGrid
    frequency: float
    l_trunc: int
    values: np.ndarray = field(repr=False)

    def column(self, l: int) -> np.ndarray:
        return self.values[:, l]


def build_grid(m_points: int, extent: float) -> QuadratureGrid:
    """Uniform quadrature grid with M points over [-L/2, L/2)."""
    return QuadratureGrid(int(m_points), float(extent))


def fock_table(grid: QuadratureGrid, omega: float, l_trunc: int = 80) -> FockBasisTable:
    """Tabulate <q_i|l> for l <= l_trunc at frequency omega.

    Uses phi_{l+1}(x) = sqrt(2/(l+1)) x phi_l(x) - sqrt(l/(l+1)) phi_{l-1}(x)
    with x = sqrt(omega) q and phi_0 = pi^{-1/4} exp(-x^2/2); the physical
    normalization is <q|l> = omega^{1/4} phi_l(sqrt(omega) q).
    """
    if not omega > 0:
        raise ValueError(f"oscillator frequency must be positive, got {omega}")
    if l_trunc < 0:
        raise ValueError(f"Fock truncation must be non-negative, got {l_trunc}")
    x = np.sqrt(omega) * grid.points
    vals = np.empty((grid.m_points, l_trunc + 1))
    vals[:, 0] = omega**0.25 * np.pi**-0.25 * np.exp(-0.5 * x * x)
    if l_trunc >= 1:
        vals[:, 1] = np.sqrt(2.0) * x * vals[:, 0]
    for l in range(1, l_trunc):
        vals[:, l + 1] = np.sqrt(2.0 / (l + 1)) * x * vals[:, l] - np.sqrt(
            l / (l + 1.0)
        ) * vals[:, l - 1]
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("Fock table overflowed; grid extent too large for l_trunc")
    vals.setflags(write=False)
    return FockBasisTable(grid=grid, frequency=float(omega), l_trunc=int(l_trunc), values=vals)


def ground_state(grid: QuadratureGrid, omega: float) -> QumodeWavefunction:
    """Gaussian ground state of the frequency-omega oscillator."""
    if not omega > 0:
        raise ValueError(f"oscillator frequency must be positive, got {omega}")
    return QumodeWavefunction(grid, np.exp(-0.5 * omega * grid.points**2))


def displaced_ground_state(grid: QuadratureGrid, omega: float, d: float) -> QumodeWavefunction:
    """Ground state displaced along q by d: psi(q) ~ exp(-omega (q-d)^2 / 2).

    The displacement is analytic (shifted Gaussian), not an interpolation,
    so <q> = d holds to grid precision.  Requires the shifted state to fit
    well inside the grid: |d| + 5/sqrt(omega) < L/2.
    """
    if not omega > 0:
        raise ValueError(f"oscillator frequency must be positive, got {omega}")
    if abs(d) + 5.0 / np.sqrt(omega) >= grid.extent / 2.0:
        raise ValueError(
            f"displacement {d} leaves too little grid support "
            f"(need |d| + 5/sqrt(omega) < {grid.extent / 2.0})"
        )
    return QumodeWavefunction(grid, np.exp(-0.5 * omega * (grid.points - d) ** 2))


def fock_decompose(psi: QumodeWavefunction, table: FockBasisTable) -> np.ndarray:
    """Coefficients c_l = xi * sum_i <q_i|l> psi(q_i)."""
    if psi.grid is not table.grid and not np.array_equal(psi.grid.points, table.grid.points):
        raise ValueError("wavefunction and Fock table live on different grids")
    return table.grid.spacing * (psi.amplitudes @ table.values)


def fock_compose(coefficients: np.ndarray, table: FockBasisTable) -> QumodeWavefunction:
    """Rebuild a grid wavefunction from Fock coefficients.

    Inverse of fock_decompose up to leakage above l_trunc; the result is
    renormalized on the grid.
    """
    c = np.asarray(coefficients, dtype=complex)
    if c.shape[0] > table.l_trunc + 1:
        raise ValueError("more coefficients than tabulated Fock modes")
    amps = table.values[:, : c.shape[0]] @ c
    return QumodeWavefunction(table.grid, amps)
