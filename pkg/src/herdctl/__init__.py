"""Herding control of non-cooperative evaders.

Evaders follow known repulsion models; herders are steered so that the
net repulsion matches a commanded velocity field. The library offers a
continuous-time design (the action gets its own dynamics) and a
discrete-time design (damped least-squares root finding per sample),
plus a deterministic simulation harness and scenario IO.
"""

from .diff import (
    FiniteDiffSettings,
    JacobianPair,
    RankCondition,
    damped_right_pinv,
    jacobian_u,
    jacobians,
    rank_condition,
)
from .dynamics import (
    EPS_COLLISION,
    DesiredDynamics,
    ExponentialModel,
    HerdConfig,
    InverseModel,
    desired_dynamics,
    evader_velocity,
    h_star,
    residual_h,
    stacked_dynamics,
)
from .errors import (
    CollisionSingularity,
    DimensionMismatch,
    HerdingError,
    InvariantViolation,
    NonSymmetricInput,
    NotSettled,
    SchemaError,
    SingularSystem,
)
from .explicit import ExplicitGains, GasCondition, action_derivative, gas_condition
from .implicit import LMConfig, LMResult, lm_solve, rate_limit_action
from .reference import (
    ReferenceSample,
    StaticReference,
    TimeVaryingReference,
    reference_at,
)
from .scenario import (
    ControllerConfig,
    Scenario,
    bundled_scenario,
    bundled_scenario_names,
    load_scenario,
    parse_scenario,
    resolve_scenario,
    serialize_scenario,
    with_sample_time,
    write_run,
)
from .sim import (
    RunRecord,
    SimSettings,
    euler_step,
    lyapunov_violations,
    run,
    settling_time,
)

__version__ = "0.1.0"

__all__ = [
    "EPS_COLLISION",
    "CollisionSingularity",
    "ControllerConfig",
    "DesiredDynamics",
    "DimensionMismatch",
    "ExplicitGains",
    "ExponentialModel",
    "FiniteDiffSettings",
    "GasCondition",
    "HerdConfig",
    "HerdingError",
    "InvariantViolation",
    "InverseModel",
    "JacobianPair",
    "LMConfig",
    "LMResult",
    "NonSymmetricInput",
    "NotSettled",
    "RankCondition",
    "ReferenceSample",
    "RunRecord",
    "Scenario",
    "SchemaError",
    "SimSettings",
    "SingularSystem",
    "StaticReference",
    "TimeVaryingReference",
    "action_derivative",
    "bundled_scenario",
    "bundled_scenario_names",
    "damped_right_pinv",
    "desired_dynamics",
    "euler_step",
    "evader_velocity",
    "gas_condition",
    "h_star",
    "jacobian_u",
    "jacobians",
    "lm_solve",
    "load_scenario",
    "lyapunov_violations",
    "parse_scenario",
    "rank_condition",
    "rate_limit_action",
    "reference_at",
    "residual_h",
    "resolve_scenario",
    "run",
    "serialize_scenario",
    "settling_time",
    "stacked_dynamics",
    "with_sample_time",
    "write_run",
]
