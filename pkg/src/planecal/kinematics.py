"""Forward kinematics of a 6-joint serial arm, standard (distal) D-H convention.

Angles are radians everywhere inside the package. Degrees appear only at the
I/O boundary (``DhTable.from_degrees`` / ``DhTable.to_degrees``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

N_JOINTS = 6
# column order of DhTable.params
ALPHA, A, D, THETA = range(4)


@dataclass(frozen=True)
class DhRow:
    alpha: float
    a: float
    d: float
    theta_offset: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.alpha, self.a, self.d, self.theta_offset])):
            raise InvalidInputError(f"non-finite D-H row: {self}")


@dataclass(frozen=True, eq=False)
class DhTable:
    """Six D-H rows stored as a (6, 4) array of ``[alpha, a, d, theta_offset]``."""

    params: np.ndarray

    def __post_init__(self):
        p = np.array(self.params, dtype=float)
        if p.shape != (N_JOINTS, 4):
            raise InvalidInputError(f"D-H table must be 6x4, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("D-H table contains non-finite entries")
        p.setflags(write=False)
        object.__setattr__(self, "params", p)

    @classmethod
    def from_rows(cls, rows: Sequence[DhRow]) -> "DhTable":
        return cls(np.array([[r.alpha, r.a, r.d, r.theta_offset] for r in rows]))

    @classmethod
    def from_degrees(cls, rows) -> "DhTable":
        """Build from ``[alpha_deg, a_mm, d_mm, theta_deg]`` rows."""
        p = np.array(rows, dtype=float)
        if p.shape != (N_JOINTS, 4):
            raise InvalidInputError(f"D-H table must be 6x4, got shape {p.shape}")
        p[:, [ALPHA, THETA]] = np.radians(p[:, [ALPHA, THETA]])
        return cls(p)

    def to_degrees(self) -> np.ndarray:
        p = self.params.copy()
        p[:, [ALPHA, THETA]] = np.degrees(p[:, [ALPHA, THETA]])
        return p

    @property
    def rows(self) -> list[DhRow]:
        return [DhRow(*map(float, r)) for r in self.params]

    @property
    def alpha(self):
        return self.params[:, ALPHA]

    @property
    def a(self):
        return self.params[:, A]

    @property
    def d(self):
        return self.params[:, D]

    @property
    def theta_offset(self):
        return self.params[:, THETA]

    def with_d6(self, d6: float) -> "DhTable":
        p = self.params.copy()
        p[5, D] = d6
        return DhTable(p)

    def __eq__(self, other):
        return isinstance(other, DhTable) and np.array_equal(self.params, other.params)

    def __repr__(self):
        return f"DhTable({self.to_degrees().tolist()!r} [deg, mm])"


# Nominal model (degrees / mm as tabulated).
NOMINAL_DH_DEG = [
    [-90.0, 249.85003, 653.5, 0.0],
    [0.0, 900.32123, 0.0, -90.0],
    [90.0, -0.20614449, 0.0, 180.0],
    [-90.0, 0.0, 1030.37534, 0.0],
    [90.0, 0.0, 0.0, 90.0],
    [0.0, 0.0, 200.6, 0.0],
]

# Reference post-calibration parameters, kept verbatim (row 3 a is inconsistent
# with NOMINAL_DH_DEG by four orders of magnitude; no reconciliation attempted).
REFERENCE_CALIBRATED_DH_DEG = [
    [-89.9960, 249.7252, 654.2394, 0.0],
    [-0.0232, 893.9318, -0.1907, -90.0],
    [90.0073, -210.7932, -0.1926, 180.0],
    [-90.0214, 4.6549, 1034.0154, 0.0],
    [90.0094, -0.3347, 0.1219, 90.0],
    [0.0, -0.0534, 199.8700, 0.0],
]


def nominal_table() -> DhTable:
    return DhTable.from_degrees(NOMINAL_DH_DEG)


def degrees_exact(q) -> np.ndarray:
    """Degrees that convert back to exactly ``q`` under ``np.radians``.

    Picks the double nearest ``np.degrees(q)`` (within a few ulps) whose
    conversion reproduces ``q`` bit for bit; falls back to ``np.degrees(q)``
    where no such double exists.
    """
    q = np.asarray(q, dtype=float)
    base = np.degrees(q)
    out = base.copy()
    found = np.radians(base) == q
    up, down = base.copy(), base.copy()
    for _ in range(4):
        up, down = np.nextafter(up, np.inf), np.nextafter(down, -np.inf)
        for cand in (up, down):
            hit = ~found & (np.radians(cand) == q)
            out[hit] = cand[hit]
            found |= hit
    return out


def degree_representable(q) -> np.ndarray:
    """Round ``q`` so that it has an exact degree preimage (a sub-ulp change)."""
    return np.radians(np.degrees(np.asarray(q, dtype=float)))


def _check_q(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1:] != (N_JOINTS,):
        raise InvalidInputError(f"joint vector must have 6 entries, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise InvalidInputError("joint vector contains non-finite entries")
    return q


def link_matrices(alpha, a, d, theta) -> np.ndarray:
    """Batched single-link transforms; all inputs broadcast, output (..., 4, 4)."""
    alpha, a, d, theta = np.broadcast_arrays(alpha, a, d, theta)
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    T = np.zeros(theta.shape + (4, 4))
    T[..., 0, 0] = ct
    T[..., 0, 1] = -st * ca
    T[..., 0, 2] = st * sa
    T[..., 0, 3] = a * ct
    T[..., 1, 0] = st
    T[..., 1, 1] = ct * ca
    T[..., 1, 2] = -ct * sa
    T[..., 1, 3] = a * st
    T[..., 2, 1] = sa
    T[..., 2, 2] = ca
    T[..., 2, 3] = d
    T[..., 3, 3] = 1.0
    return T


def link_transform(row: DhRow, q: float) -> np.ndarray:
    """Homogeneous transform of one link at commanded angle ``q``.

    The effective joint angle is ``q + row.theta_offset``.
    """
    if not np.isfinite(q):
        raise InvalidInputError(f"non-finite joint angle {q}")
    return link_matrices(row.alpha, row.a, row.d, q + row.theta_offset)


def chain(params: np.ndarray, q: np.ndarray) -> np.ndarray:
    """FK for batched parameter sets ``(..., 6, 4)`` and joints ``(..., 6)``."""
    params = np.asarray(params, dtype=float)
    q = np.asarray(q, dtype=float)
    links = link_matrices(
        params[..., ALPHA], params[..., A], params[..., D], params[..., THETA] + q
    )
    T = links[..., 0, :, :]
    for i in range(1, N_JOINTS):
        T = T @ links[..., i, :, :]
    return T


def forward_kinematics(table: DhTable, q) -> np.ndarray:
    """Base-to-flange pose ``T1 T2 ... T6`` as a 4x4 array.

    ``q`` may also be a stack of configurations of shape (N, 6).
    """
    return chain(table.params, _check_q(q))


def tool_position(table: DhTable, q) -> np.ndarray:
    return forward_kinematics(table, q)[..., :3, 3]
