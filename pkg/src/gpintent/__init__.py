"""Online GP hand-trajectory prediction and intention-aware robot targets.

The package has three layers: ``gp_core`` (Matern-3/2 regression with a
dense and a hierarchical low-rank backend), ``predictor`` (sliding-window
online training and extrapolation), and the interaction layer (``scene``,
``strategies``, ``simulator``) used by the benchmark harness (``trajgen``,
``bench``, ``cli``).
"""

from .errors import (BehindUserError, GpIntentError, NoCandidateError,
                     NotReadyError, NumericalError, OutOfOrderError,
                     SceneFormatError, TrajectoryFormatError)
from .gp_core import (Backend, FittedChannel, KernelParams, OptimizeResult,
                      TrainingSet, fit, fit_joint, log_marginal_likelihood,
                      optimize_hyperparams, posterior_mean, posterior_var)
from .predictor import (DEFAULT_HORIZON_FRACTION, DEFAULT_RATE_HZ,
                        DEFAULT_SIGMA_N, DEFAULT_WINDOW, EgpModel, Horizon,
                        OnlinePredictor, Prediction, SlidingWindow,
                        TimedSample, WindowStatus, baseline_predict,
                        cold_start_params, egp_predict, egp_train,
                        finite_difference_velocity, smooth)
from .scene import (GazeRay, HumanSphere, InteractionPoint, PartitionPlane,
                    Region, SafePoint, SceneConfig, default_scene,
                    distance_to_sphere, gaze_score, gaze_select, load_scene,
                    nearest_point, nearest_safe_point, region_of,
                    write_scene)
from .simulator import (RobotState, RobotTrajectory, RunLog, RunMetrics,
                        SimConfig, build_trajectory, compute_metrics, run)
from .strategies import (Decision, DecisionSource, StrategyKind,
                         StrategyParams, StrategyState)
from .trajgen import (GenParams, TrajectoryRecord, gen_corpus,
                      gen_trajectory, mape, min_jerk, read_csv, rmse,
                      synth_gaze, write_csv)

__version__ = "0.1.0"

__all__ = [
    "Backend", "BehindUserError", "Decision", "DecisionSource",
    "DEFAULT_HORIZON_FRACTION", "DEFAULT_RATE_HZ", "DEFAULT_SIGMA_N",
    "DEFAULT_WINDOW", "EgpModel", "FittedChannel", "GazeRay", "GenParams",
    "GpIntentError", "Horizon", "HumanSphere", "InteractionPoint",
    "KernelParams", "NoCandidateError", "NotReadyError", "NumericalError",
    "OnlinePredictor", "OptimizeResult", "OutOfOrderError", "PartitionPlane",
    "Prediction", "Region", "RobotState", "RobotTrajectory", "RunLog",
    "RunMetrics", "SafePoint", "SceneConfig", "SceneFormatError",
    "SimConfig", "SlidingWindow", "StrategyKind", "StrategyParams",
    "StrategyState", "TimedSample", "TrainingSet", "TrajectoryFormatError",
    "TrajectoryRecord", "WindowStatus", "baseline_predict",
    "build_trajectory", "cold_start_params", "compute_metrics",
    "default_scene", "distance_to_sphere", "egp_predict", "egp_train",
    "finite_difference_velocity", "fit", "fit_joint", "gaze_score",
    "gaze_select", "gen_corpus", "gen_trajectory", "load_scene",
    "log_marginal_likelihood", "mape", "min_jerk", "nearest_point",
    "nearest_safe_point", "optimize_hyperparams", "posterior_mean",
    "posterior_var", "read_csv", "region_of", "rmse", "run", "smooth",
    "synth_gaze", "write_csv", "write_scene",
]
