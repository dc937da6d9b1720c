"""Counter-factual carving of cavity-coupled qubit ensembles.

A source atom probes an N-qubit ensemble through a shared cavity mode.
Post-selecting on the probe *not* having decayed removes selected Dicke
components exponentially fast.  This package provides

- the joint single-excitation state space (``basis``),
- Hamiltonian / collapse-channel builders and analytic rates (``model``),
- Lindblad and conditional no-jump propagators (``dynamics``),
- closed-form infidelity scalings and carve planning (``analytics``),
- iterative Stark phase/amplitude control (``phase_control``),
- an experiment runner with a ``carve-sim`` CLI (``experiments``/``cli``).

Internally every frequency and rate is angular (rad/us); constructors that
take MHz values multiply by 2*pi.
"""

from .basis import (
    JointBasis,
    JointBasisState,
    JointState,
    EnsembleState,
    build_basis,
    css_state,
    dicke_projector,
)
from .model import (
    PhysicalParams,
    DriveTone,
    RateTable,
    LevelModel,
    build_h_target,
    build_h_source,
    collapse_channels,
    kappa_m,
    gamma_m,
    optimal_delta_cap,
    dressed_effective_h,
    exact_resonances,
    dispersive_resonances,
    rate_table,
)
from .dynamics import (
    EvolutionResult,
    CarveOutcome,
    NoCrossingError,
    CarveAnnihilatedError,
    evolve_master,
    evolve_no_jump,
    postselect_source_down,
    trace_out_probe,
    find_t_1e,
    carve_outcome,
    spin_echo_permutation,
)
from .analytics import (
    ScalingPoint,
    GhzRates,
    CarvePlan,
    cf_infidelity,
    f_infidelity,
    transmission,
    f_infidelity_transmission,
    ghz_rates,
    ghz_infidelity,
    plan_dicke_carve,
    multi_tone_infidelity,
    level_decay_rates,
)
from .phase_control import (
    PulseSpec,
    CorrectionLedger,
    stark_pulse,
    amplitude_pulse,
    disturbance,
    iterate_corrections,
    success_bound,
    verify_schedule_numerically,
)

__version__ = "0.1.0"

__all__ = [
    "JointBasis", "JointBasisState", "JointState", "EnsembleState",
    "build_basis", "css_state", "dicke_projector",
    "PhysicalParams", "DriveTone", "RateTable", "LevelModel",
    "build_h_target", "build_h_source", "collapse_channels",
    "kappa_m", "gamma_m", "optimal_delta_cap", "dressed_effective_h",
    "exact_resonances", "dispersive_resonances", "rate_table",
    "EvolutionResult", "CarveOutcome", "NoCrossingError", "CarveAnnihilatedError",
    "evolve_master", "evolve_no_jump", "postselect_source_down",
    "trace_out_probe", "find_t_1e", "carve_outcome", "spin_echo_permutation",
    "ScalingPoint", "GhzRates", "CarvePlan",
    "cf_infidelity", "f_infidelity", "transmission", "f_infidelity_transmission",
    "ghz_rates", "ghz_infidelity", "plan_dicke_carve", "multi_tone_infidelity",
    "level_decay_rates",
    "PulseSpec", "CorrectionLedger", "stark_pulse", "amplitude_pulse",
    "disturbance", "iterate_corrections", "success_bound",
    "verify_schedule_numerically",
]
