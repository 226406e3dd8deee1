from . import calibration, channel, evaluation, liblog, oracle, policies, reporters, sweep, utils
from .calibration import CalibrationError, CalibrationReport, average_interference, calibrate_lambda, calibrate_policy
from .channel import ChannelSample, SampleSet, SystemConfig, build_sample_set
from .evaluation import EvaluationResult, evaluate_policy, instantaneous_rate, rate_ordering_check
from .policies import CalibratedPolicy, PolicyKind, policy_power, saturation_check, solve_stationarity
from .sweep import SweepRow, SweepSpec, run_sweep, write_csv

__all__ = ["calibration", "channel", "evaluation", "liblog", "oracle", "policies", "reporters", "sweep", "utils",
           "SystemConfig", "ChannelSample", "SampleSet", "build_sample_set",
           "PolicyKind", "CalibratedPolicy", "policy_power", "solve_stationarity", "saturation_check",
           "CalibrationError", "CalibrationReport", "average_interference", "calibrate_lambda", "calibrate_policy",
           "EvaluationResult", "evaluate_policy", "instantaneous_rate", "rate_ordering_check",
           "SweepSpec", "SweepRow", "run_sweep", "write_csv"]
