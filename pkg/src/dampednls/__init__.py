"""Spectral simulator and invariant checks for a damped focusing wave model.

The model is a cubic Schrodinger equation in an anisotropic harmonic trap
with an extra power-law damping term.  The package provides a Fourier
pseudospectral split-step propagator, exact closed forms for the damping
substep, independent low-order oracles, diagnostics that monitor the mass
and energy balance laws, and a scenario runner with on-disk traces.
"""

from .grid import (
    Grid,
    boundary_density_ratio,
    coordinate_mesh,
    integrate,
    inverse_transform,
    make_grid,
    spectral_gradient,
    spectral_upsample,
    transform,
)
from .fields import (
    WaveFunction,
    aliasing_defect,
    current_density,
    density,
    density_gradient,
    gradient_norm,
    lp_norm,
    mass,
    position_norm,
    sigma_norm,
)
from .model import (
    BudgetConstants,
    EnergyBalanceTerms,
    ModelParams,
    POTENTIAL_BALANCE_COEFF,
    dissipation_budget,
    ekappa_rhs_terms,
    energy_e0,
    energy_ekappa,
    energy_ekappa_p,
    energy_elin,
    potential,
    sigma_norm_ceiling,
    space_time_bounds,
)
from .oracle import (
    CrankNicolsonError,
    crank_nicolson_evolve,
    hermite_ground_state,
    ode_substep_oracle,
)
from .diagnostics import (
    DecayReport,
    DiagnosticsRecord,
    RunningDiagnostics,
    TRACE_COLUMNS,
    continuity_residual,
    decay_report,
    ekappa_balance_residual,
    mass_balance_residual,
    qhd_momentum_residual,
    record,
)
from .propagator import (
    Scheme,
    Status,
    StatusKind,
    StepperConfig,
    Trajectory,
    evolve,
    kinetic_substep,
    lie_step,
    linear_damping_transform_check,
    local_substep,
    strang_step,
)
from .io import (
    SNAPSHOT_MAGIC,
    SnapshotFormatError,
    TraceFormatError,
    read_snapshot,
    read_trace,
    write_snapshot,
    write_trace,
)
from .scenarios import (
    BoundaryMassWarning,
    CheckRow,
    ConfigError,
    ConvergenceStudy,
    PRESETS,
    ScenarioConfig,
    VerificationReport,
    build_initial,
    convergence_study,
    parse_config,
    preset_config,
    render_config,
    resolve_output_root,
    run_preset,
    run_scenario,
    verify_run,
)
from .cli import main

__version__ = "0.1.0"
