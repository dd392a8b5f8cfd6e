"""Exact diagonalization of the quantum Rabi model with parity diagnostics.

The library diagonalizes the two-level/single-mode Hamiltonian in a
truncated Fock basis, tracks the conserved parity of every computed
eigenstate, and quantifies where pairs of near-degenerate levels stop
being parity-pure while their pairwise parity sum stays pinned at zero.
"""

from .eigensolve import (
    ResidualReport,
    SolverError,
    Spectrum,
    eig_sym_dense,
    eig_sym_tridiag,
    refine_rayleigh,
    residual_report,
)
from .model import (
    ModelParams,
    Truncation,
    build_hamiltonian,
    build_parity,
    critical_coupling,
    parity_diagonal,
    sector_hamiltonian,
    shifted_energy,
)
from .parity import (
    FockPopulations,
    OnsetResult,
    PairParity,
    fock_populations,
    onset_coupling,
    pair_report,
    parity_expectation,
    sector_weights,
    subspace_parity_trace,
)
from .position import (
    PositionGrid,
    TwoComponentWavefunction,
    hermite_basis,
    position_wavefunction,
    symmetry_defect,
)
from .sweeps import (
    SentinelResult,
    SweepResult,
    convergence_sentinel,
    convergence_sweep,
    coupling_sweep,
    grid_values,
    phase_boundary_scan,
    solve_point,
    tail_population,
)

__version__ = "0.1.0"

__all__ = [
    "FockPopulations",
    "ModelParams",
    "OnsetResult",
    "PairParity",
    "PositionGrid",
    "ResidualReport",
    "SentinelResult",
    "SolverError",
    "Spectrum",
    "SweepResult",
    "Truncation",
    "TwoComponentWavefunction",
    "__version__",
    "build_hamiltonian",
    "build_parity",
    "convergence_sentinel",
    "convergence_sweep",
    "coupling_sweep",
    "critical_coupling",
    "eig_sym_dense",
    "eig_sym_tridiag",
    "fock_populations",
    "grid_values",
    "hermite_basis",
    "onset_coupling",
    "pair_report",
    "parity_diagonal",
    "parity_expectation",
    "phase_boundary_scan",
    "position_wavefunction",
    "refine_rayleigh",
    "residual_report",
    "sector_hamiltonian",
    "sector_weights",
    "shifted_energy",
    "solve_point",
    "subspace_parity_trace",
    "symmetry_defect",
    "tail_population",
]
