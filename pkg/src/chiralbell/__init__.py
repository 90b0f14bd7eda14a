"""Two coupled dissipative qubits steered around exceptional points.

Submodules
----------
linalg       small dense complex kernels (eigensolver wrapper, batched expm)
model        configurations, operators and the hybrid Liouvillian
spectra      closed-form spectra, exceptional points, eigenvalue sweeps
dynamics     loop trajectories and time-ordered propagation
metrics      Bell fidelity, concurrence, purity, PT classification
experiments  JSON experiment specs, sweeps and figure reproduction
"""

from .dynamics import PropagationRecord, Trajectory, one_cycle_propagator, propagate
from .metrics import bell_fidelity, concurrence, pt_symmetry_check, purity
from .model import (
    SystemConfig,
    bell_states,
    build_effective_hamiltonian,
    build_liouvillian,
    build_reduced_liouvillian,
    derived_rates,
)
from .spectra import analytic_heff_eigs, analytic_liouvillian_eigs, locate_ep, spectrum_sweep

__version__ = "0.1.0"

__all__ = [
    "PropagationRecord",
    "SystemConfig",
    "Trajectory",
    "analytic_heff_eigs",
    "analytic_liouvillian_eigs",
    "bell_fidelity",
    "bell_states",
    "build_effective_hamiltonian",
    "build_liouvillian",
    "build_reduced_liouvillian",
    "concurrence",
    "derived_rates",
    "locate_ep",
    "one_cycle_propagator",
    "propagate",
    "pt_symmetry_check",
    "purity",
    "spectrum_sweep",
]
