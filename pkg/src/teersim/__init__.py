"""Deterministic teleoperation simulator and control stack for
transcatheter edge-to-edge repair device delivery."""

from .config import (
    DOF_NAMES,
    DitherSpec,
    FrictionParams,
    PhantomConfig,
    SessionConfig,
    SheathGeometry,
    SpeedLimits,
    SystemGeometry,
    load_config,
)
from .control import (
    MODES,
    STEP_MODE,
    ControlMode,
    ManualAction,
    VelocityCommand,
    clamp,
    map_gamepad,
    set_mode,
    step_manual,
    step_robotic,
)
from .disturbance import DisturbanceState, dither_offset, step_coupling, step_torsion
from .hid import GamepadFrame, MalformedFrameError, normalize
from .kinematics import ChainPoses, JointState, Pose, chain_fk, sheath_fk, two_plane_fk
from .phantom import (
    PlacementScore,
    ValvePhantom,
    build_phantom,
    check_atrium_collision,
    score_placement,
)
from .trials import (
    MalformedLogError,
    Script,
    ScriptError,
    StepTimings,
    TrialLog,
    extract_timings,
    placement_spread,
    replay,
    run_trial,
)

__version__ = "0.1.0"
