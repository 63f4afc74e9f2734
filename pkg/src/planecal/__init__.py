"""Plane-constrained kinematic calibration of 6-joint serial robots.

Forward kinematics and the D-H error Jacobian, the gauge-block plane
constraint, a square-root cubature Kalman filter (with an EKF baseline), a
Levenberg-Marquardt refinement of parameters and planes, a synthetic
dial-indicator rig, and the calibration pipeline tying them together.
"""
from .error_model import ParamDelta, apply_delta, position_jacobian, predicted_position_error
from .errors import CalibrationError
from .filters import NoiseConfig, SqrtState, ekf_identify, measurement_update, sckf_identify, time_update
from .kinematics import DhRow, DhTable, forward_kinematics, link_transform, nominal_table, tool_position
from .lm import LmSettings, LmState, lm_optimize, lm_step, residual_and_jacobians
from .measurements import Sample, apply_dial_to_model
from .metrics import MetricSet, compute_metrics
from .pipeline import METHODS, CalibrationReport, PipelineConfig, calibrate, compare
from .plane import Plane, build_identification_system, fit_plane, objective, plane_residual
from .simulate import SimScenario, benchmark_scenario, generate, score_against_truth

__version__ = "0.1.0"
