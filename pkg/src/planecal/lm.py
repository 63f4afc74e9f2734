"""Levenberg-Marquardt refinement of D-H corrections together with the planes.

The residual of point i on plane k is ``phi_i = -(P'_i + J_i w - gamma_k) . beta_k``
and the data term is ``f = sum(phi**2) / (2N)``. Each iteration solves the
damped normal equations ``(A^T A / N + lam I) step = -A^T phi / N`` (descent
sign), either jointly (the default) or block by block (w, then gamma, then
beta, with residuals refreshed in between), and keeps the candidate only if ``f``
strictly drops.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .error_model import N_PARAMS
from .errors import IllConditionedError, InvalidInputError
from .plane import Plane, PointSet

LAMBDA_MIN = 1e-12
LAMBDA_MAX = 1e12


@dataclass(frozen=True, eq=False)
class LmState:
    """Corrections ``w`` (24,), plane points ``gamma0`` (K, 3), unit normals ``beta0`` (K, 3)."""

    w: np.ndarray
    gamma0: np.ndarray
    beta0: np.ndarray
    lam: float = 1e-3

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(N_PARAMS)
        g = np.array(self.gamma0, dtype=float).reshape(-1, 3)
        b = np.array(self.beta0, dtype=float).reshape(-1, 3)
        if g.shape != b.shape:
            raise InvalidInputError("gamma0 and beta0 must describe the same number of planes")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "gamma0", g)
        object.__setattr__(self, "beta0", b)
        object.__setattr__(self, "lam", float(np.clip(self.lam, LAMBDA_MIN, LAMBDA_MAX)))

    @classmethod
    def from_planes(cls, w, planes, lam: float = 1e-3) -> "LmState":
        planes = [planes] if isinstance(planes, Plane) else list(planes)
        return cls(w, [p.gamma for p in planes], [p.beta for p in planes], lam)

    @property
    def planes(self) -> list[Plane]:
        return [Plane(g, b) for g, b in zip(self.gamma0, self.beta0)]

    @property
    def n_planes(self) -> int:
        return self.gamma0.shape[0]


@dataclass(frozen=True)
class LmSettings:
    lambda_init: float = 1e-3
    lambda_down: float = 0.7
    lambda_up: float = 2.0
    f_rtol: float = 1e-10
    step_tol: float = 1e-12
    max_iter: int = 500
    mode: Literal["block", "joint"] = "joint"


@dataclass
class LmTrace:
    objective: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    step_w: list = field(default_factory=list)
    step_gamma: list = field(default_factory=list)
    step_beta: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    f0: float = float("nan")
    converged: bool = False
    reason: str = ""
    gradient_norm: float = float("nan")

    @property
    def iterations(self) -> int:
        return len(self.objective)

    @property
    def n_accepted(self) -> int:
        return int(sum(self.accepted))

    def accepted_objectives(self) -> list[float]:
        return [self.f0] + [f for f, a in zip(self.objective, self.accepted) if a]

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "objective", "lam", "step_w", "step_gamma", "step_beta", "accepted",
            "f0", "converged", "reason", "gradient_norm")}


def _plane_rows(state: LmState, points: PointSet):
    ids = points.plane_ids
    if len(points) and ids.max() >= state.n_planes:
        raise InvalidInputError(f"points reference plane {ids.max()}, state has {state.n_planes}")
    return state.gamma0[ids], state.beta0[ids]


def residuals(state: LmState, points: PointSet) -> np.ndarray:
    g, b = _plane_rows(state, points)
    return -np.einsum("ij,ij->i", points.predicted(state.w) - g, b)


def data_objective(state: LmState, points: PointSet) -> float:
    r = residuals(state, points)
    return float(r @ r) / (2 * len(r))


def residual_and_jacobians(state: LmState, points: PointSet):
    """Residuals and their partials w.r.t. w (N, 24), gamma0 (N, 3K), beta0 (N, 3K).

    Row i of the plane blocks is non-zero only in the three columns of the
    plane that point i touches.
    """
    n = len(points)
    if n == 0:
        raise InvalidInputError("LM needs at least one sample")
    g, b = _plane_rows(state, points)
    pos = points.predicted(state.w)
    r = -np.einsum("ij,ij->i", pos - g, b)
    d_w = -np.einsum("ikp,ik->ip", points.jacobians, b)
    K = state.n_planes
    d_g = np.zeros((n, 3 * K))
    d_b = np.zeros((n, 3 * K))
    cols = 3 * points.plane_ids[:, None] + np.arange(3)
    rows = np.arange(n)[:, None]
    d_g[rows, cols] = b
    d_b[rows, cols] = -(pos - g)
    return r, d_w, d_g, d_b


def _tangent_projector(state: LmState) -> np.ndarray:
    """Block-diagonal projector removing the radial part of each normal."""
    K = state.n_planes
    T = np.zeros((3 * K, 3 * K))
    for k, b in enumerate(state.beta0):
        T[3 * k:3 * k + 3, 3 * k:3 * k + 3] = np.eye(3) - np.outer(b, b)
    return T


def gradient(state: LmState, points: PointSet) -> np.ndarray:
    """Gradient of the data term w.r.t. (w, gamma0, beta0), beta part on the unit sphere."""
    r, d_w, d_g, d_b = residual_and_jacobians(state, points)
    A = np.hstack([d_w, d_g, d_b @ _tangent_projector(state)])
    return A.T @ r / len(r)


def damped_step(A: np.ndarray, r: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(A^T A / N + lam I) s = -A^T r / N`` via the stacked least-squares form."""
    n, p = A.shape
    M = np.vstack([A / np.sqrt(n), np.sqrt(lam) * np.eye(p)])
    rhs = np.concatenate([-r / np.sqrt(n), np.zeros(p)])
    s, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if not np.all(np.isfinite(s)):
        raise IllConditionedError(f"damped normal equations not solvable at lambda={lam:g}")
    return s


def _with(state: LmState, w=None, gamma=None, beta=None) -> LmState:
    return replace(
        state,
        w=state.w if w is None else w,
        gamma0=state.gamma0 if gamma is None else gamma.reshape(-1, 3),
        beta0=state.beta0 if beta is None else beta.reshape(-1, 3),
    )


def _normalize(beta: np.ndarray) -> np.ndarray:
    beta = beta.reshape(-1, 3)
    return beta / np.linalg.norm(beta, axis=1, keepdims=True)


def lm_step(state: LmState, points: PointSet, settings: LmSettings = LmSettings()):
    """One LM iteration. Returns ``(new_state, accepted, info)``.

    On acceptance lambda shrinks by ``lambda_down`` and the normals are
    renormalized; on rejection only lambda grows.
    """
    if state.lam <= 0:
        raise InvalidInputError("lambda must be positive")
    f0 = data_objective(state, points)
    lam = state.lam
    if settings.mode == "joint":
        r, d_w, d_g, d_b = residual_and_jacobians(state, points)
        T = _tangent_projector(state)
        s = damped_step(np.hstack([d_w, d_g, d_b @ T]), r, lam)
        sw, sg = s[:N_PARAMS], s[N_PARAMS:N_PARAMS + d_g.shape[1]]
        sb = T @ s[N_PARAMS + d_g.shape[1]:]
        cand = _with(state, state.w + sw, state.gamma0.ravel() + sg,
                     _normalize(state.beta0.ravel() + sb))
    else:
        r, d_w, _, _ = residual_and_jacobians(state, points)
        sw = damped_step(d_w, r, lam)
        cand = _with(state, w=state.w + sw)
        r, _, d_g, _ = residual_and_jacobians(cand, points)
        sg = damped_step(d_g, r, lam)
        cand = _with(cand, gamma=cand.gamma0.ravel() + sg)
        r, _, _, d_b = residual_and_jacobians(cand, points)
        T = _tangent_projector(cand)
        sb = T @ damped_step(d_b @ T, r, lam)
        cand = _with(cand, beta=_normalize(cand.beta0.ravel() + sb))
    f1 = data_objective(cand, points)
    info = {
        "f_old": f0, "f_new": f1, "lam": lam,
        "step_w": float(np.linalg.norm(sw)),
        "step_gamma": float(np.linalg.norm(sg)),
        "step_beta": float(np.linalg.norm(sb)),
    }
    if np.isfinite(f1) and f1 < f0:
        return replace(cand, lam=lam * settings.lambda_down), True, info
    return replace(state, lam=lam * settings.lambda_up), False, info


def lm_optimize(init: LmState, points: PointSet, settings: LmSettings = LmSettings()):
    """Iterate :func:`lm_step` until the objective or the steps stall.

    Stops when the relative objective change of an accepted step is below
    ``f_rtol``, when all block step norms fall below ``step_tol``, when the
    objective reaches exactly zero, or after ``max_iter`` iterations (then
    ``trace.converged`` is False).
    """
    if len(points) < 4:
        raise InvalidInputError(f"LM needs at least 4 samples, got {len(points)}")
    state = init
    trace = LmTrace(f0=data_objective(state, points))
    f = trace.f0
    for _ in range(settings.max_iter):
        if f == 0.0:
            trace.converged, trace.reason = True, "zero objective"
            break
        prev = state
        state, accepted, info = lm_step(state, points, settings)
        tiny = max(info["step_w"], info["step_gamma"], info["step_beta"]) < settings.step_tol
        if tiny:
            # a sub-tolerance step is never taken, even if rounding lowers f
            state, accepted = prev, False
        trace.objective.append(info["f_new"] if accepted else f)
        trace.lam.append(info["lam"])
        trace.step_w.append(info["step_w"])
        trace.step_gamma.append(info["step_gamma"])
        trace.step_beta.append(info["step_beta"])
        trace.accepted.append(accepted)
        if tiny:
            trace.converged, trace.reason = True, "step tolerance"
            break
        if accepted:
            f_new = info["f_new"]
            if abs(f - f_new) / max(f, 1e-30) < settings.f_rtol:
                f = f_new
                trace.converged, trace.reason = True, "objective tolerance"
                break
            f = f_new
        elif state.lam >= LAMBDA_MAX:
            trace.converged, trace.reason = True, "lambda saturated"
            break
    else:
        trace.reason = "max iterations"
    trace.gradient_norm = float(np.linalg.norm(gradient(state, points)))
    return state, trace
