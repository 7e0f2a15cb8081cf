"""Numerical laboratory for complex Monge-Ampere equations on flat tori.

Solves the elliptic exponential equation and its parabolic flow on the
periodic torus with spectral calculus, builds the explicit barriers behind
the quantitative stability estimates, and verifies comparison principles
and stability bounds as falsifiable experiments.
"""

__version__ = "0.1.0"

from .barriers import (
    BarrierConstants,
    elliptic_barrier,
    parabolic_barrier,
    parabolic_constants,
    uniform_bound_barriers,
    varying_form_rescale,
)
from .elliptic import (
    SolveReport,
    build_reference_density,
    default_tolerance,
    solve_exponential,
    solve_normalized,
)
from .errors import (
    CoarseBranchRequired,
    ConvergenceError,
    DegenerateReference,
    IntegrationError,
    MarginViolation,
    MassMismatchError,
    PositivityError,
)
from .experiments import (
    FlowData,
    PerturbationFamily,
    StabilityReport,
    StabilityRow,
    elliptic_stability_run,
    interpolation_check,
    oracle_battery,
    parabolic_stability_run,
    varying_forms_run,
)
from .geometry import (
    FormPath,
    HermitianField,
    HermitianForm,
    ScalarField,
    TorusGrid,
    complex_hessian,
    form_distance,
    interpolate_family,
    read_field,
    write_field,
)
from .ma_ops import (
    Density,
    NormalizedVolume,
    is_theta_psh,
    lp_norm,
    ma_density,
    oscillation,
    positive_part,
)
from .oracles import (
    OracleVerdict,
    comparison_elliptic,
    comparison_parabolic,
    domination_check,
)
from .parabolic import (
    FlowSnapshot,
    FlowTrajectory,
    ForcingSpec,
    classify_residual,
    evolve,
    forcing_gap_sup,
    phi_dot_bound_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
