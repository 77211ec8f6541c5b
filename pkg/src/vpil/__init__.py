"""Numerical laboratory for the Vlasov-Poisson system with the isotropic Landau collision operator.

Modules
-------
grids          phase-space grids, weights, cutoffs and difference stencils
fields         Newtonian potentials, self-consistent fields and field energy
collision      ``Q(f, f) = a Delta f + f^2`` and its time steppers
transport      conservative semi-Lagrangian advection sweeps
simulation     Strang-split integrator, snapshots and initial data
linear_scheme  linearised iteration with frozen coefficients
diagnostics    moments, entropy, virial identities and CSV output
criterion      fixed-point lemma, Lambert bounds and the cubic blow-up bound
oracles        closed-form potentials for verification
config, cli    run configuration and the ``vpil`` command
"""

from .collision import CollisionSettings, StabilityError, collision_step, q_iso_apply
from .criterion import (
    CriterionInput,
    CriterionReport,
    PhiParams,
    collapse_monitor,
    cubic_bound,
    phi_iterate,
    phi_threshold_and_roots,
)
from .diagnostics import DiagnosticsRecord, entropy_dissipation, measure_all, virial_consistency
from .fields import (
    SolverError,
    inverse_laplacian_3d,
    inverse_laplacian_conservative,
    inverse_laplacian_radial,
    self_consistent_field,
)
from .grids import Grid3, PhaseGrid, RadialGrid, WeightParams
from .linear_scheme import IterationReport, LinearConfig, picard_sequence
from .simulation import SimConfig, SimState, read_snapshot, run, step, write_snapshot
from .transport import CFLError, advect_axis

__version__ = "0.1.0"

__all__ = [
    "CFLError",
    "CollisionSettings",
    "CriterionInput",
    "CriterionReport",
    "DiagnosticsRecord",
    "Grid3",
    "IterationReport",
    "LinearConfig",
    "PhaseGrid",
    "PhiParams",
    "RadialGrid",
    "SimConfig",
    "SimState",
    "SolverError",
    "StabilityError",
    "WeightParams",
    "advect_axis",
    "collapse_monitor",
    "collision_step",
    "cubic_bound",
    "entropy_dissipation",
    "inverse_laplacian_3d",
    "inverse_laplacian_conservative",
    "inverse_laplacian_radial",
    "measure_all",
    "phi_iterate",
    "phi_threshold_and_roots",
    "picard_sequence",
    "q_iso_apply",
    "read_snapshot",
    "run",
    "self_consistent_field",
    "step",
    "virial_consistency",
    "write_snapshot",
]
