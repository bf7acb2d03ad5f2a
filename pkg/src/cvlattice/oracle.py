"""Independent references: dispersion, retarded propagator, dense evolvers.

Everything here is deliberately built along different numerical routes
than the split-step evolution it validates: the propagator comes from
the closed-form Bessel expression, the single-mode reference evolves by
one dense diagonalization (no step splitting), and the few-site
reference evolves the full tensor-product Fock space including all
inter-site entanglement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from cvlattice.qumode import QuadratureGrid, QumodeWavefunction, fock_table

__all__ = [
    "DispersionTable",
    "dispersion",
    "bessel_j0",
    "retarded_propagator",
    "DenseQumodeEvolver",
    "exact_single_qumode",
    "FewSiteResult",
    "exact_few_site",
]


@dataclass(frozen=True)
class DispersionTable:
    """Mode frequencies and momenta of the free lattice.

    omegas[alpha] = sqrt(omega^2 + (4/a^2) sin^2(pi alpha / N));
    momenta[alpha] = 2 pi alpha / (a N); signed_momenta folds
    alpha > N/2 to negative values (alpha and N - alpha are a +-k pair).
    """

    n_sites: int
    spacing: float
    mass: float
    omegas: np.ndarray = field(repr=False)
    momenta: np.ndarray = field(repr=False)
    signed_momenta: np.ndarray = field(repr=False)


def dispersion(n_sites: int, a: float, omega: float) -> DispersionTable:
    if n_sites < 1:
        raise ValueError(f"need at least 1 site, got {n_sites}")
    if not (a > 0 and omega > 0):
        raise ValueError("lattice spacing and mass must be positive")
    alpha = np.arange(n_sites)
    # fold alpha so that omega_alpha = omega_{N-alpha} holds bit-exactly
    folded = np.minimum(alpha, n_sites - alpha)
    omegas = np.sqrt(omega**2 + (4.0 / a**2) * np.sin(np.pi * folded / n_sites) ** 2)
    momenta = 2.0 * np.pi * alpha / (a * n_sites)
    signed = 2.0 * np.pi * np.where(alpha <= n_sites // 2, alpha, alpha - n_sites) / (a * n_sites)
    for arr in (omegas, momenta, signed):
        arr.setflags(write=False)
    return DispersionTable(
        n_sites=n_sites, spacing=a, mass=omega, omegas=omegas, momenta=momenta, signed_momenta=signed
    )


# Hankel symbols (0, m) for the large-argument expansion of J0, generated
# by (0, m+1) = (0, m) * (-(2m+1)^2) / (8 (m+1)).
_N_HANKEL = 14


def _hankel_symbols(n: int) -> np.ndarray:
    c = np.empty(n)
    c[0] = 1.0
    for m in range(n - 1):
        c[m + 1] = c[m] * (-((2 * m + 1) ** 2)) / (8.0 * (m + 1))
    return c

_HANKEL = _hankel_symbols(_N_HANKEL)
_SERIES_CUT = 14.0


def _j0_series(x: np.ndarray) -> np.ndarray:
    """Defining power series sum_k (-1)^k (x/2)^{2k} / (k!)^2."""
    z = 0.25 * x * x
    out = np.ones_like(x)
    term = np.ones_like(x)
    for k in range(1, 40):
        term *= -z / (k * k)
        out += term
        if np.all(np.abs(term) < 1e-17):
            break
    return out


def _j0_asymptotic(x: np.ndarray) -> np.ndarray:
    """Hankel expansion J0 = sqrt(2/(pi x)) (P cos chi - Q sin chi)."""
    inv = 1.0 / x
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for m in range(_N_HANKEL // 2):
        sign = (-1.0) ** m
        p += sign * _HANKEL[2 * m] * inv ** (2 * m)
        q += sign * _HANKEL[2 * m + 1] * inv ** (2 * m + 1)
    chi = x - 0.25 * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j0(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """J0 to <= 1e-10 absolute error for any real argument.

    Power series below |x| = 14, Hankel asymptotic expansion above.
    """
    arr = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
    out = np.empty_like(arr)
    small = arr <= _SERIES_CUT
    if np.any(small):
        out[small] = _j0_series(arr[small])
    if np.any(~small):
        out[~small] = _j0_asymptotic(arr[~small])
    return float(out[0]) if np.isscalar(x) or np.ndim(x) == 0 else out.reshape(np.shape(x))


def retarded_propagator(
    m: float, x: Union[float, np.ndarray], t: Union[float, np.ndarray]
) -> Union[float, np.ndarray]:
    """Causal response of the free field in 1+1 dimensions.

    (1/2) Theta(t) Theta(t^2 - x^2) J0(m sqrt(t^2 - x^2)); zero outside
    the forward light cone, one half on the cone itself.
    """
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    xa, ta = np.broadcast_arrays(xa, ta)
    tau2 = ta**2 - xa**2
    inside = (ta > 0) & (tau2 >= 0)
    out = np.zeros(xa.shape)
    if np.any(inside):
        out[inside] = 0.5 * np.asarray(bessel_j0(m * np.sqrt(tau2[inside])))
    scalar = np.ndim(x) == 0 and np.ndim(t) == 0
    return float(out.flat[0]) if scalar else out


class DenseQumodeEvolver:
    """Exact single-mode evolution by one dense diagonalization.

    H = p^2/2 + omega^2 q^2/2 + V(q) on the grid, with the kinetic term
    built spectrally (same discretization convention as the split-step
    evolution, so comparisons isolate the Trotter error).  No step
    splitting: evolve(psi, t) phase-rotates the eigencomponents.
    """

    def __init__(
        self,
        grid: QuadratureGrid,
        omega: float,
        potential: Union[Callable[[np.ndarray], np.ndarray], np.ndarray, None] = None,
    ):
        if not omega > 0:
            raise ValueError(f"oscillator frequency must be positive, got {omega}")
        m = grid.m_points
        k = grid.wavenumbers()
        fmat = np.fft.fft(np.eye(m), axis=0)
        kin = (fmat.conj().T @ (k[:, None] ** 2 / 2.0 * fmat)).real / m
        if potential is None:
            v = np.zeros(m)
        else:
            v = potential(grid.points) if callable(potential) else np.asarray(potential, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("potential is not finite on all grid points")
        h = kin + np.diag(0.5 * omega**2 * grid.points**2 + v)
        self.grid = grid
        self.eigvals, self.eigvecs = np.linalg.eigh(h)

    def evolve(self, psi0: QumodeWavefunction, t: float) -> QumodeWavefunction:
        if t == 0.0:
            return psi0
        c = self.eigvecs.conj().T @ psi0.amplitudes
        amps = self.eigvecs @ (np.exp(-1j * self.eigvals * t) * c)
        return QumodeWavefunction(self.grid, amps)


def exact_single_qumode(
    grid: QuadratureGrid,
    potential: Union[Callable[[np.ndarray], np.ndarray], np.ndarray, None],
    omega: float,
    psi0: QumodeWavefunction,
    t: float,
) -> QumodeWavefunction:
    """One-shot exact single-mode evolution (see DenseQumodeEvolver)."""
    return DenseQumodeEvolver(grid, omega, potential).evolve(psi0, t)


@dataclass
class FewSiteResult:
    """Exact tensor-space evolution output.

    state_vector is the full wavefunction over the (cutoff+1)^N Fock
    space; reduced[n] is site n's density matrix; site_densities holds
    the corresponding quadrature densities when a grid was supplied.
    """

    state_vector: np.ndarray
    reduced: list
    site_densities: Optional[np.ndarray]


def _ladder(dim: int) -> np.ndarray:
    a = np.zeros((dim, dim))
    for n in range(1, dim):
        a[n - 1, n] = math.sqrt(n)
    return a


def _embed(op: np.ndarray, n_sites: int, site: int) -> np.ndarray:
    dim = op.shape[0]
    out = np.array([[1.0]])
    for s in range(n_sites):
        out = np.kron(out, op if s == site else np.eye(dim))
    return out


def _embed_pair(op_a: np.ndarray, site_a: int, op_b: np.ndarray, site_b: int, n_sites: int) -> np.ndarray:
    dim = op_a.shape[0]
    out = np.array([[1.0]])
    for s in range(n_sites):
        if s == site_a:
            out = np.kron(out, op_a)
        elif s == site_b:
            out = np.kron(out, op_b)
        else:
            out = np.kron(out, np.eye(dim))
    return out


def _coherent_vector(alpha: float, dim: int) -> np.ndarray:
    c = np.empty(dim)
    c[0] = 1.0
    for n in range(1, dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    c *= math.exp(-0.5 * alpha * alpha)
    return c / np.linalg.norm(c)


def exact_few_site(
    n_sites: int,
    fock_cutoff: int,
    omega: float,
    coupling: float,
    spacing: float,
    displacements: Sequence[float],
    t: float,
    grid: Optional[QuadratureGrid] = None,
) -> FewSiteResult:
    """Evolve a small periodic lattice exactly in the tensor Fock space.

    Sites start as coherent states displaced along q by the given
    amounts (0 for vacuum).  The Hamiltonian is the same lattice-unit
    Hamiltonian the split-step scheme approximates, including every
    hopping bond, evolved by dense diagonalization; this is the
    entanglement-exact yardstick for the product-state truncation.
    """
    if n_sites < 2 or n_sites > 3:
        raise ValueError(f"few-site oracle supports 2 or 3 sites, got {n_sites}")
    if len(displacements) != n_sites:
        raise ValueError("need one displacement per site")
    dim = fock_cutoff + 1
    if dim**n_sites > 20_000:
        raise ValueError(
            f"tensor dimension {dim**n_sites} exceeds the 20000 dense-diagonalization cap"
        )
    a_op = _ladder(dim)
    q_op = (a_op + a_op.T) / math.sqrt(2.0 * omega)
    p2_op = -0.5 * omega * (a_op.T - a_op) @ (a_op.T - a_op)
    q2_op = q_op @ q_op
    h_site = (
        0.5 * p2_op
        + 0.5 * omega**2 * q2_op
        + q2_op / spacing**2
        + (coupling / 24.0) * q2_op @ q2_op
    )
    total = np.zeros((dim**n_sites, dim**n_sites))
    for n in range(n_sites):
        total += _embed(h_site, n_sites, n)
        total -= _embed_pair(q_op, n, q_op, (n + 1) % n_sites, n_sites) / spacing**2
    evals, evecs = np.linalg.eigh(total)

    psi0 = np.array([1.0])
    for d in displacements:
        psi0 = np.kron(psi0, _coherent_vector(d * math.sqrt(omega / 2.0), dim))
    psi_t = evecs @ (np.exp(-1j * evals * t) * (evecs.conj().T @ psi0))

    tensor = psi_t.reshape((dim,) * n_sites)
    reduced = []
    for n in range(n_sites):
        mat = np.moveaxis(tensor, n, 0).reshape(dim, -1)
        reduced.append(mat @ mat.conj().T)

    densities = None
    if grid is not None:
        table = fock_table(grid, omega, fock_cutoff)
        phi = table.values
        densities = np.empty((n_sites, grid.m_points))
        for n in range(n_sites):
            # imaginary (antisymmetric) part of rho cancels in the
            # symmetric phi contraction
            densities[n] = np.einsum("il,lm,im->i", phi, reduced[n].real, phi)
    return FewSiteResult(state_vector=psi_t, reduced=reduced, site_densities=densities)
