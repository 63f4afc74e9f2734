"""Linear map from D-H parameter errors to tool position error.

Parameter vectors are flattened in four blocks of six,
``[dalpha_1..6 | da_1..6 | dd_1..6 | dtheta_1..6]`` (rad, mm, mm, rad), which is
``params.T.ravel()`` for a (6, 4) D-H array.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .kinematics import ALPHA, THETA, DhTable, _check_q, chain

N_PARAMS = 24
BLOCKS = ("alpha", "a", "d", "theta")
PARAM_NAMES = [f"{b}{i}" for b in BLOCKS for i in range(1, 7)]
ANGLE_MASK = np.array([b in ("alpha", "theta") for b in BLOCKS for _ in range(6)])

ANGLE_STEP = 1e-6
LENGTH_REL_STEP = 1e-6


@dataclass(frozen=True, eq=False)
class ParamDelta:
    """D-H parameter corrections, held as the flat 24-vector."""

    vector: np.ndarray

    def __post_init__(self):
        v = np.array(self.vector, dtype=float).reshape(-1)
        if v.shape != (N_PARAMS,):
            raise InvalidInputError(f"ParamDelta needs 24 entries, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("ParamDelta contains non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @classmethod
    def zeros(cls) -> "ParamDelta":
        return cls(np.zeros(N_PARAMS))

    @classmethod
    def from_blocks(cls, delta_alpha=0.0, delta_a=0.0, delta_d=0.0, delta_theta=0.0):
        blocks = [np.broadcast_to(np.asarray(b, float), (6,)) for b in
                  (delta_alpha, delta_a, delta_d, delta_theta)]
        return cls(np.concatenate(blocks))

    @property
    def blocks(self) -> np.ndarray:
        """(4, 6) view: rows alpha, a, d, theta."""
        return self.vector.reshape(4, 6)

    delta_alpha = property(lambda self: self.blocks[0])
    delta_a = property(lambda self: self.blocks[1])
    delta_d = property(lambda self: self.blocks[2])
    delta_theta = property(lambda self: self.blocks[3])

    def __neg__(self):
        return ParamDelta(-self.vector)

    def __add__(self, other):
        return ParamDelta(self.vector + _vec(other))

    def __sub__(self, other):
        return ParamDelta(self.vector - _vec(other))

    def __eq__(self, other):
        return isinstance(other, ParamDelta) and np.array_equal(self.vector, other.vector)

    def __repr__(self):
        return f"ParamDelta({self.vector.tolist()!r})"


def _vec(dx) -> np.ndarray:
    if isinstance(dx, ParamDelta):
        return dx.vector
    v = np.asarray(dx, dtype=float)
    if v.shape != (N_PARAMS,):
        raise InvalidInputError(f"parameter delta must have 24 entries, got shape {v.shape}")
    return v


def apply_delta(table: DhTable, dx) -> DhTable:
    return DhTable(table.params + _vec(dx).reshape(4, 6).T)


def _steps(params: np.ndarray) -> np.ndarray:
    """Per-parameter central-difference steps, same (..., 6, 4) layout as params."""
    h = LENGTH_REL_STEP * np.maximum(1.0, np.abs(params))
    h[..., [ALPHA, THETA]] = ANGLE_STEP
    return h


def position_jacobians(params, q) -> np.ndarray:
    """Batched central-difference Jacobians.

    ``params`` is (6, 4) or (N, 6, 4), ``q`` is (6,) or (N, 6); the result is
    (..., 3, 24) with columns in ParamDelta order.
    """
    params = np.asarray(params, dtype=float)
    q = np.asarray(q, dtype=float)
    h = _steps(params)
    # perturbation k = block*6 + joint flips params[..., joint, block]
    eye = np.zeros((N_PARAMS, 6, 4))
    for k in range(N_PARAMS):
        eye[k, k % 6, k // 6] = 1.0
    step = eye * h[..., None, :, :]                      # (..., 24, 6, 4)
    base = params[..., None, :, :]
    qb = q[..., None, :]
    plus = chain(base + step, qb)[..., :3, 3]            # (..., 24, 3)
    minus = chain(base - step, qb)[..., :3, 3]
    hk = np.sum(step, axis=(-2, -1))                     # (..., 24)
    J = (plus - minus) / (2.0 * hk[..., None])
    return np.swapaxes(J, -1, -2)


def position_jacobian(table: DhTable, q) -> np.ndarray:
    """3x24 sensitivity of the tool position to the D-H parameters at ``q``."""
    return position_jacobians(table.params, _check_q(q))


def predicted_position_error(J, dx) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    if J.shape[-1] != N_PARAMS:
        raise InvalidInputError(f"Jacobian must have 24 columns, got shape {J.shape}")
    return J @ _vec(dx)
