"""Gauge-block plane constraint: residuals, plane fitting and the linear
identification system.

Several gauge-block placements can be used at once; every point then carries
the index of the plane it touches (``plane_ids``) and plane-valued arguments
accept either one :class:`Plane` or a sequence of them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .error_model import N_PARAMS, _vec
from .errors import DegenerateGeometryError, InvalidInputError

COLLINEAR_RATIO = 1e-9
# singular values below this fraction of the largest count as unobservable
OBSERVABLE_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class Plane:
    """Point ``gamma`` on the plane and unit normal ``beta`` (normalized on construction)."""

    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float).reshape(3)
        b = np.array(self.beta, dtype=float).reshape(3)
        nb = np.linalg.norm(b)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(b))) or nb == 0.0:
            raise InvalidInputError(f"invalid plane gamma={g} beta={b}")
        b = b / nb
        g.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "beta", b)

    @property
    def offset(self) -> float:
        return float(self.gamma @ self.beta)

    def to_dict(self) -> dict:
        return {"gamma": self.gamma.tolist(), "beta": self.beta.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Plane":
        return cls(d["gamma"], d["beta"])


Planes = Union[Plane, Sequence[Plane]]


def as_planes(planes: Planes) -> list[Plane]:
    return [planes] if isinstance(planes, Plane) else list(planes)


@dataclass(frozen=True)
class PlaneDelta:
    """Normal correction and the composite ``-gamma . delta_beta`` unknown."""

    delta_beta: np.ndarray
    gamma_dot_delta_beta: float


@dataclass(frozen=True, eq=False)
class PointSet:
    """Nominal constrained positions with their identification Jacobians.

    ``positions`` (N, 3) are the nominal-model tool points with each dial
    reading folded into d6, ``jacobians`` (N, 3, 24) the matching position
    Jacobians, ``plane_ids`` (N,) the placement index of each point.
    """

    positions: np.ndarray
    jacobians: np.ndarray
    plane_ids: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=float)
        J = np.asarray(self.jacobians, dtype=float)
        ids = np.asarray(self.plane_ids, dtype=int)
        n = p.shape[0]
        if p.shape != (n, 3) or J.shape != (n, 3, N_PARAMS) or ids.shape != (n,):
            raise InvalidInputError(
                f"inconsistent point set shapes {p.shape}, {J.shape}, {ids.shape}")
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "jacobians", J)
        object.__setattr__(self, "plane_ids", ids)

    def __len__(self):
        return self.positions.shape[0]

    @property
    def n_planes(self) -> int:
        return int(self.plane_ids.max()) + 1 if len(self) else 0

    def subset(self, idx) -> "PointSet":
        idx = np.asarray(idx)
        if idx.size == 0:
            idx = idx.astype(int)
        return PointSet(self.positions[idx], self.jacobians[idx], self.plane_ids[idx])

    def predicted(self, dx) -> np.ndarray:
        """First-order positions ``P' + J dx``."""
        return self.positions + self.jacobians @ _vec(dx)


def plane_residual(p, plane: Plane):
    """Signed distance ``(p - gamma) . beta``; works on (3,) or (N, 3)."""
    return (np.asarray(p, dtype=float) - plane.gamma) @ plane.beta


def plane_residuals(positions, planes: Planes, plane_ids=None) -> np.ndarray:
    planes = as_planes(planes)
    positions = np.asarray(positions, dtype=float)
    ids = np.zeros(len(positions), int) if plane_ids is None else np.asarray(plane_ids)
    gam = np.array([pl.gamma for pl in planes])[ids]
    bet = np.array([pl.beta for pl in planes])[ids]
    return np.einsum("ij,ij->i", positions - gam, bet)


def fit_plane(points) -> Plane:
    """Total-least-squares plane through the centroid.

    The normal is the right singular vector of the centered points with the
    smallest singular value, signed so the first point's residual is >= 0
    (on a tie, so that beta_z >= 0).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 3:
        raise DegenerateGeometryError(f"need at least 3 points in 3-D, got shape {pts.shape}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] == 0.0 or s[1] < COLLINEAR_RATIO * s[0]:
        raise DegenerateGeometryError("points are coincident or collinear")
    beta = vt[2]
    r0 = centered[0] @ beta
    if r0 < 0 or (r0 == 0 and beta[2] < 0):
        beta = -beta
    return Plane(centroid, beta)


@dataclass(frozen=True)
class IdentificationSystem:
    """Stacked linear system ``design @ [dx | dbeta_k | -gamma_k.dbeta_k ...] = rhs``.

    Columns: 24 for the D-H errors, then four per plane (three multiplying the
    nominal position, one constant).
    """

    design_matrix: np.ndarray
    rhs: np.ndarray

    @property
    def n_planes(self) -> int:
        return (self.design_matrix.shape[1] - N_PARAMS) // 4


def build_identification_system(points: PointSet, planes: Planes) -> IdentificationSystem:
    planes = as_planes(planes)
    n = len(points)
    if n == 0:
        raise InvalidInputError("identification system needs at least one sample")
    if points.n_planes > len(planes):
        raise InvalidInputError(f"points reference {points.n_planes} planes, {len(planes)} given")
    K = len(planes)
    bet = np.array([pl.beta for pl in planes])[points.plane_ids]
    A = np.zeros((n, N_PARAMS + 4 * K))
    A[:, :N_PARAMS] = np.einsum("ikp,ik->ip", points.jacobians, bet)
    rows = np.arange(n)
    base = N_PARAMS + 4 * points.plane_ids
    for c in range(3):
        A[rows, base + c] = points.positions[:, c]
    A[rows, base + 3] = 1.0
    rhs = -plane_residuals(points.positions, planes, points.plane_ids)
    return IdentificationSystem(A, rhs)


def objective(points: PointSet, planes: Planes, dx) -> float:
    """Half mean squared plane residual of the first-order positions ``P' + J dx``."""
    n = len(points)
    if n == 0:
        raise InvalidInputError("objective needs at least one sample")
    r = plane_residuals(points.predicted(dx), planes, points.plane_ids)
    return float(r @ r) / (2.0 * n)


def in_plane_basis(beta) -> tuple[np.ndarray, np.ndarray]:
    beta = np.asarray(beta, dtype=float)
    ref = np.array([1.0, 0.0, 0.0]) if abs(beta[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = ref - (ref @ beta) * beta
    u /= np.linalg.norm(u)
    return u, np.cross(beta, u)


def stacked_blocks(points: PointSet, planes: Planes):
    """``J^T beta`` rows (N, 24) and minimal plane columns (N, 3K).

    Each plane contributes its three genuine degrees of freedom: tilts of the
    normal along two in-plane directions and the offset.
    """
    planes = as_planes(planes)
    beta = np.array([p.beta for p in planes])[points.plane_ids]
    A_x = np.einsum("ikp,ik->ip", points.jacobians, beta)
    A_p = np.zeros((len(points), 3 * len(planes)))
    for k, plane in enumerate(planes):
        rows = points.plane_ids == k
        t1, t2 = in_plane_basis(plane.beta)
        rel = points.positions[rows] - plane.gamma
        A_p[rows, 3 * k] = rel @ t1
        A_p[rows, 3 * k + 1] = rel @ t2
        A_p[rows, 3 * k + 2] = 1.0
    return A_x, A_p


def observable_basis(points: PointSet, planes: Planes, rtol: float = OBSERVABLE_RTOL):
    """D-H error directions distinguishable once the planes are free.

    Projects the plane columns out of the stacked rows and takes the SVD of
    what is left. Returns ``(rank, V (24, rank), singular_values)``.
    """
    A_x, A_p = stacked_blocks(points, planes)
    U, sp, _ = np.linalg.svd(A_p, full_matrices=False)
    Q = U[:, sp > rtol * sp[0]] if sp.size and sp[0] > 0 else U[:, :0]
    _, s, vt = np.linalg.svd(A_x - Q @ (Q.T @ A_x), full_matrices=False)
    rank = int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0
    return rank, vt[:rank].T, s


def identifiable_basis(points: PointSet, planes: Planes, scale, sigma: float,
                       snr: float = 1.0, rtol: float = OBSERVABLE_RTOL) -> np.ndarray:
    """Orthonormal basis (24, r) of the D-H directions the data pin down better than the prior.

    Columns are whitened by ``scale`` (prior standard deviations); a whitened
    direction is kept when it is observable (``rtol``) and its singular value
    exceeds ``snr * sigma``, i.e. the measurements carry more information on
    it than the prior does. ``snr = 0`` keeps every observable direction.
    """
    scale = np.asarray(scale, dtype=float)
    A_x, A_p = stacked_blocks(points, planes)
    U, sp, _ = np.linalg.svd(A_p, full_matrices=False)
    Q = U[:, sp > rtol * sp[0]] if sp.size and sp[0] > 0 else U[:, :0]
    _, s, vt = np.linalg.svd((A_x - Q @ (Q.T @ A_x)) * scale, full_matrices=False)
    if s[0] == 0:
        return np.zeros((N_PARAMS, 0))
    keep = (s > rtol * s[0]) & (s > snr * sigma)
    basis, _ = np.linalg.qr(scale[:, None] * vt[keep].T)
    return basis
