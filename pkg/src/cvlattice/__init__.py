"""Classical emulator for a lattice of continuous-variable modes.

Each lattice site carries the wavefunction of one quantum-mechanical
oscillator over a discretised quadrature axis.  Nearest-neighbour
couplings reproduce the Hamiltonian of (1+1)-dimensional scalar field
theory, and real-time evolution proceeds by split-step application of a
rotation gate, a diagonal potential phase, and an entanglement-truncated
hopping transform.

Submodule attributes are re-exported lazily so that the command line can
pin the BLAS thread count before numpy loads.
"""

_EXPORTS = {
    "qumode": [
        "QuadratureGrid",
        "QumodeWavefunction",
        "FockBasisTable",
        "build_grid",
        "fock_table",
        "ground_state",
        "displaced_ground_state",
        "fock_decompose",
        "fock_compose",
    ],
    "gates": [
        "RotationGate",
        "PotentialPhase",
        "HopPhases",
        "build_rotation",
        "build_potential_phase",
        "apply_diagonal_step",
        "build_hop_phases",
        "apply_hop",
    ],
    "lattice": [
        "SimulationParams",
        "LatticeState",
        "ObservableSeries",
        "GateSet",
        "NumericalFailure",
        "build_gates",
        "trotter_step",
        "field_expectation",
        "energy_density",
        "total_energy",
        "evolve",
    ],
    "prep": [
        "WavepacketSpec",
        "delta_impulse",
        "momentum_impulse",
        "gaussian_wavepacket",
        "two_wavepackets",
        "proto_wavepacket_profile",
        "single_excitation_amplitudes",
    ],
    "oracle": [
        "DispersionTable",
        "dispersion",
        "bessel_j0",
        "retarded_propagator",
        "DenseQumodeEvolver",
        "exact_single_qumode",
        "FewSiteResult",
        "exact_few_site",
    ],
    "config": ["ConfigError", "ExperimentConfig", "load_config"],
}

_ATTR_TO_MODULE = {name: mod for mod, names in _EXPORTS.items() for name in names}
__all__ = sorted(_ATTR_TO_MODULE)
__version__ = "0.1.0"


def __getattr__(name):
    module_name = _ATTR_TO_MODULE.get(name)
    if module_name is None:
        raise AttributeError(f"module 'cvlattice' has no attribute '{name}'")
    import importlib

    module = importlib.import_module(f"cvlattice.{module_name}")
    value = getattr(module, name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(__all__))
