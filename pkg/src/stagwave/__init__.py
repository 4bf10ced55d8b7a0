"""Explicit staggered (leap-frog) 2D elastodynamics with internal variables.

Velocity/proto-stress leap-frog stepping coupled to local dissipative
flow rules (viscoplastic creep, adhesive delamination), with per-step
energy auditing and a power-iteration stable-step estimator.
"""

from .elastic2d import (
    BoundarySpec,
    Grid2D,
    MaterialParams,
    PlaneStrainStaggeredOps,
    TractionPatch,
    assemble_load_program,
    wave_speeds,
)
from .errors import (
    BlowUpError,
    ConfigError,
    EstimationError,
    FlowRuleError,
    StagwaveError,
)
from .integrator import (
    EnergyLedger,
    LoadProgram,
    RunResult,
    StaggeredState,
    average_load_F,
    central_difference_step,
    difference_load_G,
    energy_report,
    estimate_tau_max,
    init_half_step,
    run,
    spectral_sup,
    step,
    zero_state,
)
from .processes import (
    AdhesiveParams,
    AdhesiveProcess,
    NullProcess,
    ViscoplasticParams,
    ViscoplasticProcess,
    viscoplastic_increment,
)
from .scenarios import (
    LoadingSpec,
    ProcessSpec,
    ScenarioConfig,
    compile_scenario,
    config_from_text,
    config_to_text,
    convergence_study,
    mode_I,
    mode_II,
    n_steps_for,
    resolve_tau,
    run_convergence_study,
)

__version__ = "0.1.0"
