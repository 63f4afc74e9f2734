"""Square-root cubature Kalman filter and an EKF baseline for D-H error estimation.

Both filters treat the 24 parameter errors as a constant state (identity
dynamics) and process one scalar measurement per sample: the plane residual of
the sample's first-order position ``P' + J x``. The dial reading is already
folded into ``P'``, so the observed residual is zero for every sample.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .error_model import ANGLE_MASK, N_PARAMS, ParamDelta
from .errors import FilterDivergenceError, InnovationDegenerateError, InvalidInputError
from .kinematics import DhTable
from .measurements import Sample, linearize
from .plane import Planes, PointSet, as_planes, plane_residuals

INNOVATION_FLOOR = 1e-14

# prior variances: rad^2 for alpha/theta, mm^2 for a/d
PRIOR_ANGLE_VAR = 1e-4
PRIOR_LENGTH_VAR = 1e-2
PROCESS_VAR = 1e-12
MEASUREMENT_SIGMA = 0.01


@dataclass(frozen=True, eq=False)
class SqrtState:
    """Mean ``x`` and lower-triangular factor ``S`` with covariance ``S @ S.T``."""

    x: np.ndarray
    S: np.ndarray

    @property
    def P(self) -> np.ndarray:
        return self.S @ self.S.T

    @classmethod
    def from_covariance(cls, x, P) -> "SqrtState":
        return cls(np.asarray(x, dtype=float), np.linalg.cholesky(np.asarray(P, dtype=float)))


@dataclass(frozen=True, eq=False)
class NoiseConfig:
    """Square-root process noise ``sq`` (n x n) and measurement noise ``sr`` (mm)."""

    sq: np.ndarray
    sr: float

    def __post_init__(self):
        sq = np.atleast_2d(np.asarray(self.sq, dtype=float))
        if np.any(np.diag(sq) < 0) or self.sr < 0:
            raise InvalidInputError("noise square-root factors must have non-negative diagonals")
        object.__setattr__(self, "sq", sq)
        object.__setattr__(self, "sr", float(self.sr))

    @classmethod
    def default(cls, n: int = N_PARAMS, process_var: float = PROCESS_VAR,
                measurement_sigma: float = MEASUREMENT_SIGMA) -> "NoiseConfig":
        return cls(np.sqrt(process_var) * np.eye(n), measurement_sigma)


def default_prior(angle_var: float = PRIOR_ANGLE_VAR,
                  length_var: float = PRIOR_LENGTH_VAR) -> SqrtState:
    var = np.where(ANGLE_MASK, angle_var, length_var)
    return SqrtState(np.zeros(N_PARAMS), np.diag(np.sqrt(var)))


def cubature_points(n: int) -> np.ndarray:
    """Unit cubature directions, shape (n, 2n): ``sqrt(n) * [I, -I]``."""
    eye = np.eye(n)
    return np.sqrt(n) * np.hstack([eye, -eye])


def tria(A) -> np.ndarray:
    """Lower-triangular ``S`` with ``S @ S.T == A @ A.T`` and a non-negative diagonal.

    QR of ``A.T``; the leading square block of R, transposed.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    R = scipy.linalg.qr(A.T, mode="r")[0][:n, :n]
    if R.shape[0] < n:
        R = np.vstack([R, np.zeros((n - R.shape[0], n))])
    S = R.T
    sign = np.sign(np.diag(S))
    sign[sign == 0] = 1.0
    return S * sign


def _check_state(state: SqrtState):
    if not (np.all(np.isfinite(state.x)) and np.all(np.isfinite(state.S))):
        raise FilterDivergenceError("non-finite filter state")


def time_update(state: SqrtState, noise: NoiseConfig) -> SqrtState:
    _check_state(state)
    n = state.x.size
    xi = cubature_points(n)
    m = xi.shape[1]
    X = state.S @ xi + state.x[:, None]
    # identity dynamics
    x_pred = X.mean(axis=1)
    chi = (X - x_pred[:, None]) / np.sqrt(m)
    return SqrtState(x_pred, tria(np.hstack([chi, noise.sq])))


def measurement_update(state: SqrtState, measurement_fn: Callable[[np.ndarray], float],
                       z: float, noise: NoiseConfig) -> SqrtState:
    """Scalar cubature measurement update in square-root form."""
    _check_state(state)
    n = state.x.size
    xi = cubature_points(n)
    m = xi.shape[1]
    X = state.S @ xi + state.x[:, None]
    Z = np.array([measurement_fn(X[:, i]) for i in range(m)], dtype=float)
    z_pred = Z.mean()
    zeta = ((Z - z_pred) / np.sqrt(m))[None, :]
    s_zz = tria(np.hstack([zeta, [[noise.sr]]]))[0, 0]
    if abs(s_zz) < INNOVATION_FLOOR:
        raise InnovationDegenerateError(f"innovation square root {s_zz:.3e} is degenerate")
    gamma = (X - state.x[:, None]) / np.sqrt(m)
    p_xz = gamma @ zeta.T
    K = p_xz / s_zz**2
    x_new = state.x + K[:, 0] * (z - z_pred)
    S_new = tria(np.hstack([gamma - K @ zeta, K * noise.sr]))
    return SqrtState(x_new, S_new)


@dataclass
class FilterTrace:
    """Objective and residual RMSE over the training points, before and after each step."""

    objective: list = field(default_factory=list)
    rmse: list = field(default_factory=list)
    min_eig: list = field(default_factory=list)
    final_state: Optional[SqrtState] = None
    final_covariance: Optional[np.ndarray] = None

    @property
    def iterations(self) -> int:
        return max(len(self.objective) - 1, 0)

    def record(self, points: PointSet, planes, x, P=None):
        r = plane_residuals(points.predicted(x), planes, points.plane_ids)
        self.objective.append(float(r @ r) / (2 * len(r)))
        self.rmse.append(float(np.sqrt(np.mean(r**2))))
        if P is not None:
            self.min_eig.append(float(np.linalg.eigvalsh(0.5 * (P + P.T))[0]))


def _measurement_fn(points: PointSet, planes, i: int):
    plane = planes[points.plane_ids[i]]
    p0 = points.positions[i] - plane.gamma
    row = plane.beta @ points.jacobians[i]
    offset = float(p0 @ plane.beta)
    return lambda x: offset + float(row @ x)


def sckf_filter(points: PointSet, planes: Planes, init: Optional[SqrtState] = None,
                noise: Optional[NoiseConfig] = None) -> tuple[SqrtState, FilterTrace]:
    planes = as_planes(planes)
    if len(points) == 0:
        raise InvalidInputError("filter needs at least one sample")
    state = init or default_prior()
    noise = noise or NoiseConfig.default(state.x.size)
    trace = FilterTrace()
    trace.record(points, planes, state.x, state.P)
    for i in range(len(points)):
        state = time_update(state, noise)
        state = measurement_update(state, _measurement_fn(points, planes, i), 0.0, noise)
        trace.record(points, planes, state.x, state.P)
    return state, trace


def sckf_identify(samples: Sequence[Sample], planes: Planes, model: DhTable,
                  init: Optional[SqrtState] = None, noise: Optional[NoiseConfig] = None):
    """Run the square-root cubature filter over the samples in order.

    Returns the posterior mean as a :class:`ParamDelta` and the per-step trace.
    """
    state, trace = sckf_filter(linearize(samples, model), planes, init, noise)
    trace.final_state = state
    return ParamDelta(state.x), trace


def ekf_filter(points: PointSet, planes: Planes, P0=None, noise: Optional[NoiseConfig] = None,
               x0=None) -> tuple[np.ndarray, np.ndarray, FilterTrace]:
    """Classical covariance-form EKF; raises if the covariance stops being PSD."""
    planes = as_planes(planes)
    if len(points) == 0:
        raise InvalidInputError("filter needs at least one sample")
    P = default_prior().P if P0 is None else np.array(P0, dtype=float)
    x = np.zeros(P.shape[0]) if x0 is None else np.array(x0, dtype=float)
    noise = noise or NoiseConfig.default(x.size)
    Q = noise.sq @ noise.sq.T
    R = noise.sr**2
    trace = FilterTrace()
    trace.record(points, planes, x, P)
    for i in range(len(points)):
        P = P + Q
        h = _measurement_fn(points, planes, i)
        plane = planes[points.plane_ids[i]]
        H = plane.beta @ points.jacobians[i]
        s = float(H @ P @ H) + R
        if not np.isfinite(s) or s <= 0:
            raise FilterDivergenceError(f"step {i}: innovation variance {s}")
        K = P @ H / s
        x = x + K * (0.0 - h(x))
        P = P - np.outer(K, H @ P)
        trace.record(points, planes, x, P)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(np.diag(P)))))
        if not np.all(np.isfinite(P)) or trace.min_eig[-1] < -tol:
            raise FilterDivergenceError(
                f"step {i}: covariance lost positive semi-definiteness "
                f"(min eigenvalue {trace.min_eig[-1]:.3e})")
    return x, P, trace


def ekf_identify(samples: Sequence[Sample], planes: Planes, model: DhTable, P0=None,
                 noise: Optional[NoiseConfig] = None):
    x, P, trace = ekf_filter(linearize(samples, model), planes, P0, noise)
    trace.final_covariance = P
    return ParamDelta(x), trace
