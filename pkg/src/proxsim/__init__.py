"""Deterministic 2D simulator and evaluation harness for an intention-guided
proxy-following column robot, plus a live steering service."""

from .geometry import (
    Arena,
    Pose,
    SimConfig,
    UserState,
    VOI,
    Vec2,
    clamp_to_arena,
    normalize_angle,
)
from .intention import (
    CommandPosition,
    WeightEntry,
    WeightVector,
    angular_offset,
    apply_prior,
    apply_stickiness,
    command_position,
    compute_weights,
    distance_score,
    orientation_score,
    raw_weight,
)
from .proxy import ObstacleState, ProxyState, obstacle_force, obstacle_radius, spring_force, step_proxy
from .robot import RobotState, latch_estop, release_estop, speed_cap, step_robot
from .walker import Walker, WalkerParams, default_personas
from .engine import FrameRecord, SimEngine
from .harness import (
    TrialResult,
    TrialSpec,
    derive_seed,
    generate_trial,
    replay_trace,
    run_sweep,
    run_trial,
    summarize,
    two_phase_sweep,
)
from .persistence import (
    Scenario,
    Trace,
    TraceFrame,
    load_scenario,
    load_trace,
    save_scenario,
    save_trace,
    write_results,
)

__version__ = "0.1.0"
