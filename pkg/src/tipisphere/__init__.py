"""tipisphere: predictive-information-driven play for a tabletop sphere robot.

A two-network controller climbs its time-local predictive information
online while a deterministic 2D plant simulates the robot on a walled
round table; a frozen pre-adapted baseline, behavior metrics with
independent oracles, a batch harness and a live WebSocket session
complete the apparatus.
"""

from .baseline import (
    BalanceCommand,
    BalanceGains,
    FrozenParams,
    ReactiveSession,
    balance_to_wheels,
    load_frozen,
    pre_adapt,
    reactive_act,
    save_frozen,
)
from .controller import (
    CHANNELS,
    ControllerParams,
    CovarianceEstimator,
    LearningConfig,
    LoopWindow,
    ModelParams,
    StepDiagnostics,
    TipiController,
    controller_act,
    controller_gradient,
    covariance_update,
    init_params,
    loop_jacobian,
    loop_psi,
    model_update,
    params_digest,
    tipi_value,
    update_window,
)
from .errors import (
    ConfigError,
    InputError,
    NotWarmedUpError,
    NumericAbort,
    NumericDomainError,
)
from .harness import compare, run_batch, run_session
from .metrics import (
    DiscreteJoint,
    TrajectoryLog,
    discrete_mi,
    gaussian_ar1_mi,
    occupancy_entropy,
    read_jsonl,
    rms_xi,
    running_tipi,
    summarize_log,
    write_jsonl,
)
from .session import ConstantPolicy, Session, SessionConfig, schedule_to_timeline
from .sim import (
    ActivePerturbations,
    PerturbationEvent,
    PerturbationSchedule,
    RobotBody,
    RobotState,
    SensorNoise,
    SpherePlant,
    TableGeometry,
    apply_perturbation_schedule,
    generate_nudge_schedule,
    read_sensors,
    step_physics,
    wrap_angle,
)

__version__ = "0.1.0"
