"""Synthetic dial-indicator rig.

A "true" robot (nominal table plus injected D-H errors) probes one or more
gauge-block planes. For each target point the joints are solved so that the
NOMINAL model touches the plane with the probe (the frame-6 z axis) roughly
along the plane normal; the dial then reads the along-axis gap between the
TRUE tool point and the true plane, plus Gaussian noise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation
from scipy.stats import qmc

from .error_model import ANGLE_MASK, ParamDelta, apply_delta
from .errors import GenerationError, InvalidInputError
from .kinematics import DhTable, chain, degree_representable, forward_kinematics, nominal_table
from .measurements import DIAL_RANGE_MM, Sample, constrained_positions, linearize
from .metrics import compute_metrics
from .plane import (OBSERVABLE_RTOL, Plane, as_planes, in_plane_basis, observable_basis,
                    plane_residuals)

IK_TOL_MM = 1e-8
# weight turning radians of orientation error into "mm" for the pose solve
ORIENTATION_WEIGHT = 1000.0


@dataclass(frozen=True, eq=False)
class SimScenario:
    nominal: DhTable
    truth_delta: ParamDelta
    planes: tuple
    n_samples: int = 120
    noise_sigma: float = 0.01
    seed: int = 42
    coverage: tuple = (150.0, 150.0)
    tilt_max_deg: float = 10.0
    spin_max_deg: float = 60.0
    dial_range: float = DIAL_RANGE_MM

    def __post_init__(self):
        object.__setattr__(self, "planes", tuple(as_planes(self.planes)))
        if self.n_samples < 4:
            raise InvalidInputError(f"n_samples must be >= 4, got {self.n_samples}")
        if self.noise_sigma < 0:
            raise InvalidInputError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.n_samples < 3 * len(self.planes):
            raise InvalidInputError("need at least 3 samples per plane")

    @property
    def true_table(self) -> DhTable:
        return apply_delta(self.nominal, self.truth_delta)

    def to_dict(self) -> dict:
        return {
            "nominal_deg": self.nominal.to_degrees().tolist(),
            "truth_delta": self.truth_delta.vector.tolist(),
            "planes": [p.to_dict() for p in self.planes],
            "n_samples": self.n_samples,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "coverage": list(self.coverage),
            "tilt_max_deg": self.tilt_max_deg,
            "spin_max_deg": self.spin_max_deg,
            "dial_range": self.dial_range,
        }


def default_planes(n: int = 3) -> list[Plane]:
    """Gauge-block placements in front of the robot (mm, base frame)."""
    placements = [
        Plane([1400.0, 0.0, 800.0], [0.0, 0.0, 1.0]),
        Plane([1550.0, -350.0, 950.0], [-0.6, 0.0, 0.8]),
        Plane([1300.0, 400.0, 850.0], [0.0, -0.6, 0.8]),
    ]
    if not 1 <= n <= len(placements):
        raise InvalidInputError(f"between 1 and {len(placements)} default planes available")
    return placements[:n]


def random_truth(rng, angle_deg: float = 0.05, length_mm: float = 1.0) -> ParamDelta:
    """Uniform D-H errors, |d alpha|, |d theta| <= angle_deg and |d a|, |d d| <= length_mm."""
    bound = np.where(ANGLE_MASK, np.radians(angle_deg), length_mm)
    return ParamDelta(rng.uniform(-bound, bound))


def benchmark_scenario(seed: int = 42, n_planes: int = 3, n_samples: int = 120,
                       noise_sigma: float = 0.01, truth: Optional[ParamDelta] = None) -> SimScenario:
    """The standard benchmark: three gauge-block planes, 120 samples (or fewer planes)."""
    if truth is None:
        truth = random_truth(np.random.default_rng([seed, 1]))
    return SimScenario(nominal_table(), truth, tuple(default_planes(n_planes)),
                       n_samples=n_samples, noise_sigma=noise_sigma, seed=seed)


def _target_rotation(beta, tilt, azimuth, spin) -> np.ndarray:
    """Tool orientation whose z axis points into the plane, tilted and spun."""
    u, v = in_plane_basis(beta)
    z = -beta
    axis = np.cos(azimuth) * u + np.sin(azimuth) * v
    z = Rotation.from_rotvec(tilt * axis).apply(z)
    x = u - (u @ z) * z
    x /= np.linalg.norm(x)
    R = np.column_stack([x, np.cross(z, x), z])
    return R @ Rotation.from_rotvec([0.0, 0.0, spin]).as_matrix()


def solve_pose(table: DhTable, position, rotation, q0) -> np.ndarray:
    """Joint angles placing the flange at ``position`` with ``rotation``.

    Damped least squares (scipy's MINPACK LM) on position plus weighted
    orientation error; raises :class:`GenerationError` if the position is
    not met to ``IK_TOL_MM``.
    """
    position = np.asarray(position, dtype=float)

    def res(q):
        T = chain(table.params, q)
        rot_err = Rotation.from_matrix(rotation.T @ T[:3, :3]).as_rotvec()
        return np.concatenate([T[:3, 3] - position, ORIENTATION_WEIGHT * rot_err])

    sol = least_squares(res, np.asarray(q0, dtype=float), method="lm",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
    q = sol.x
    err = np.linalg.norm(chain(table.params, q)[:3, 3] - position)
    if not err <= IK_TOL_MM:
        raise GenerationError(f"target {position.tolist()} unreachable (residual {err:.3g} mm)")
    # wrapped, and rounded so the degree CSV form reproduces it exactly
    return degree_representable((q + np.pi) % (2 * np.pi) - np.pi)


def _split_counts(n: int, k: int) -> list[int]:
    return [n // k + (i < n % k) for i in range(k)]


def plan_configurations(scenario: SimScenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nominal touch configurations: ``(q (N, 6), plane_ids (N,), targets (N, 3))``."""
    table = scenario.nominal
    rng = np.random.default_rng([scenario.seed, 2])
    qs, ids, targets = [], [], []
    for k, (plane, count) in enumerate(zip(scenario.planes,
                                           _split_counts(scenario.n_samples, len(scenario.planes)))):
        u, v = in_plane_basis(plane.beta)
        halton = qmc.Halton(d=5, scramble=True, seed=rng)
        h = halton.random(count)
        ext_u, ext_v = scenario.coverage
        try:
            centre_q = solve_pose(table, plane.gamma,
                                  _target_rotation(plane.beta, 0.0, 0.0, 0.0), np.zeros(6))
        except GenerationError as exc:
            raise GenerationError(f"plane {k}, centre point: {exc}") from None
        for j in range(count):
            p = plane.gamma + (2 * h[j, 0] - 1) * ext_u * u + (2 * h[j, 1] - 1) * ext_v * v
            tilt = np.radians(scenario.tilt_max_deg) * np.sqrt(h[j, 2])
            az = 2 * np.pi * h[j, 3]
            spin = np.radians(scenario.spin_max_deg) * (2 * h[j, 4] - 1)
            try:
                q = solve_pose(table, p, _target_rotation(plane.beta, tilt, az, spin), centre_q)
            except GenerationError as exc:
                raise GenerationError(f"plane {k}, point {j}: {exc}") from None
            qs.append(q)
            ids.append(k)
            targets.append(p)
    return np.array(qs), np.array(ids, dtype=int), np.array(targets)


def dial_readings(table: DhTable, qs, planes, plane_ids) -> np.ndarray:
    """Noise-free along-probe gap from the tool point of ``table`` to each plane."""
    planes = as_planes(planes)
    T = forward_kinematics(table, qs)
    gaps = plane_residuals(T[:, :3, 3], planes, plane_ids)
    beta = np.array([p.beta for p in planes])[plane_ids]
    cosines = np.einsum("ij,ij->i", T[:, :3, 2], beta)
    if np.any(np.abs(cosines) < 1e-3):
        raise GenerationError("probe axis nearly parallel to the plane")
    return -gaps / cosines


@dataclass
class GroundTruth:
    scenario: SimScenario
    targets: np.ndarray
    noiseless_dial: np.ndarray
    noise: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "truth_delta": self.scenario.truth_delta.vector.tolist(),
            "planes": [p.to_dict() for p in self.scenario.planes],
            "targets": self.targets.tolist(),
            "noiseless_dial_mm": self.noiseless_dial.tolist(),
        }


def dial_noise(seed: int, sigma: float, n: int) -> np.ndarray:
    """Gaussian reading noise; the stream depends only on ``seed``."""
    if sigma == 0:
        return np.zeros(n)
    return np.random.default_rng([seed, 3]).normal(0.0, sigma, size=n)


def generate(scenario: SimScenario) -> tuple[list[Sample], GroundTruth]:
    qs, ids, targets = plan_configurations(scenario)
    clean = dial_readings(scenario.true_table, qs, scenario.planes, ids)
    noise = dial_noise(scenario.seed, scenario.noise_sigma, len(qs))
    dial = clean + noise
    bad = np.flatnonzero(np.abs(dial) > scenario.dial_range)
    if bad.size:
        raise GenerationError(
            f"sample {int(bad[0])}: dial reading {dial[bad[0]]:.3f} mm exceeds the "
            f"+/-{scenario.dial_range} mm range")
    samples = [Sample(q, d, k) for q, d, k in zip(qs, dial, ids)]
    return samples, GroundTruth(scenario, targets, clean, noise)


def observability(samples: Sequence[Sample], table: DhTable, planes,
                  rtol: float = OBSERVABLE_RTOL):
    """Rank, basis (24, rank) and singular values of the observable D-H error subspace."""
    return observable_basis(linearize(samples, table), planes, rtol)


def observable_projector(samples, table, planes, rtol: float = OBSERVABLE_RTOL) -> np.ndarray:
    _, V, _ = observability(samples, table, planes, rtol)
    return V @ V.T


def score_against_truth(identified: ParamDelta, scenario: SimScenario,
                        validation_samples: Sequence[Sample],
                        train_samples: Optional[Sequence[Sample]] = None) -> dict:
    """Compare an identified delta with the injected ground truth.

    Residual metrics use the TRUE planes on the validation samples; the
    parameter error is measured only inside the observable subspace of the
    training samples (or of the validation samples when none are given).
    """
    planes = scenario.planes
    ids = [s.plane_id for s in validation_samples]
    before = plane_residuals(constrained_positions(validation_samples, scenario.nominal),
                             planes, ids)
    after = plane_residuals(
        constrained_positions(validation_samples, apply_delta(scenario.nominal, identified)),
        planes, ids)
    basis = train_samples if train_samples is not None else validation_samples
    rank, V, s = observability(basis, scenario.nominal, planes)
    P_obs = V @ V.T
    err = identified.vector - scenario.truth_delta.vector
    return {
        "before": compute_metrics(before),
        "after": compute_metrics(after),
        "residuals_before": before,
        "residuals_after": after,
        "rank": rank,
        "singular_values": s,
        "projector": P_obs,
        "observable_error": float(np.linalg.norm(P_obs @ err)),
        "full_error": float(np.linalg.norm(err)),
    }


def project_observable(delta: ParamDelta, samples, table, planes) -> ParamDelta:
    return ParamDelta(observable_projector(samples, table, planes) @ delta.vector)


