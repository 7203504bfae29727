"""Robust imitation learning of action and mode-switching policies from
partially automated demonstrations, plus the kinematic pick-and-place
workbench the experiments run on."""

from .core import (
    ACTION_DIM,
    ACTION_LIMITS,
    AUTO_MODES,
    FULL_MANUAL_MODE,
    MANUAL_MODES,
    MODE_COUNT,
    ActionDelta,
    DisturbanceLevel,
    Step,
    Trajectory,
    is_manual,
    next_mode,
)
from .config import ExperimentConfig, default_config_json, from_dict, load_config, save_config, to_dict
from .env import AUTO2_THRESHOLDS, ConfigError, Env, EnvConfig, EnvState, ObjectState
from .learner import (
    VARIANTS,
    EvalMetrics,
    IterationRecord,
    MethodVariant,
    collect_iteration,
    evaluate_bundle,
    fit_iteration,
    get_variant,
    manual_nll,
    normalize_method,
    run_experiment,
    update_sigma,
)
from .nn import MlpParams, Normalizer, TrainReport, TrainSpec, TrainingError, backward, fit, forward
from .policies import (
    Datasets,
    FeatureSpec,
    PolicyBundle,
    build_datasets,
    load_bundle,
    predict_action,
    predict_mode,
    rollout,
    save_bundle,
    state_features,
)
from .rng import RngStream, derive_stream
from .scripted_operator import (
    AUTO_ACTIONS,
    OperatorConfig,
    OperatorFault,
    ScriptedOperator,
    auto_action,
    inject_disturbance,
)
from .trajio import TrajectoryParseError, read_trajectories, write_trajectories

__version__ = "0.1.0"
