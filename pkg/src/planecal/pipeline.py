"""End-to-end calibration: filter stage, LM stage, metrics and method comparison."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .error_model import ParamDelta, apply_delta
from .errors import CalibrationError, DivergenceError, InvalidInputError
from .filters import NoiseConfig, default_prior, ekf_filter, sckf_filter
from .kinematics import DhTable
from .lm import LmSettings, LmState, lm_optimize
from .measurements import Sample, check_dial_range, constrained_positions, linearize
from .metrics import MetricSet, compute_metrics, literal_metrics
from .plane import (OBSERVABLE_RTOL, Plane, PointSet, fit_plane, identifiable_basis,
                    observable_basis, plane_residuals)

log = logging.getLogger(__name__)

METHODS = ("ekf", "sckf", "lm", "sckf_lm")
VALIDATION_FRACTION = 35 / 120
MIN_TRAIN_PER_PLANE = 3


@dataclass(frozen=True)
class PipelineConfig:
    prior_angle_var: float = 1e-4
    prior_length_var: float = 1e-2
    process_var: float = 1e-12
    measurement_sigma: float = 0.01
    lm: LmSettings = LmSettings()
    # outer passes re-linearizing the error model about the current estimate
    relinearize_passes: int = 6
    relinearize_tol: float = 1e-10
    # LM only moves D-H directions the data determine better than the filter
    # prior (whitened singular value > identifiable_snr * measurement_sigma);
    # 0 keeps every observable direction
    observable_only: bool = True
    identifiable_snr: float = 1.0
    validation_fraction: float = VALIDATION_FRACTION
    seed: int = 42

    def to_dict(self) -> dict:
        return asdict(self)


def split_indices(samples: Sequence[Sample], fraction: float = VALIDATION_FRACTION,
                  seed: int = 42) -> tuple[np.ndarray, np.ndarray]:
    """Seeded train/validation split that leaves every plane >= 3 training points.

    Holds out ``round(N * fraction)`` samples, capped so at least 4 remain
    for training.
    """
    n = len(samples)
    n_val = min(int(round(n * fraction)), max(n - 4, 0))
    ids = np.array([s.plane_id for s in samples], dtype=int)
    remaining = {k: int(np.sum(ids == k)) for k in np.unique(ids)}
    val = []
    for i in np.random.default_rng([seed, 7]).permutation(n):
        if len(val) == n_val:
            break
        if remaining[ids[i]] > MIN_TRAIN_PER_PLANE:
            val.append(int(i))
            remaining[ids[i]] -= 1
    val = np.sort(np.array(val, dtype=int))
    train = np.setdiff1d(np.arange(n), val)
    return train, val


def fit_planes(positions: np.ndarray, plane_ids: np.ndarray) -> list[Plane]:
    return [fit_plane(positions[plane_ids == k]) for k in range(int(plane_ids.max()) + 1)]


@dataclass
class StageResult:
    delta: np.ndarray
    planes: list
    iterations: int
    curve: list
    converged: bool = True
    traces: dict = field(default_factory=dict)


def _noise(cfg: PipelineConfig) -> NoiseConfig:
    return NoiseConfig.default(process_var=cfg.process_var, measurement_sigma=cfg.measurement_sigma)


def _check_finite(stage: str, values):
    if not np.all(np.isfinite(values)):
        raise DivergenceError(stage)


def _run_filter(kind: str, points: PointSet, planes, cfg: PipelineConfig) -> StageResult:
    prior = default_prior(cfg.prior_angle_var, cfg.prior_length_var)
    if kind == "sckf":
        state, trace = sckf_filter(points, planes, prior, _noise(cfg))
        x, P = state.x, state.P
    else:
        x, P, trace = ekf_filter(points, planes, prior.P, _noise(cfg))
    _check_finite(kind, trace.objective)
    return StageResult(x, list(planes), trace.iterations, list(trace.objective), True, {
        kind: {"objective": trace.objective, "rmse": trace.rmse, "min_eig": trace.min_eig,
               "posterior_covariance_diag": np.diag(P).tolist()}})


def _run_lm(samples: Sequence[Sample], nominal: DhTable, x0: np.ndarray, planes,
            cfg: PipelineConfig) -> StageResult:
    """LM over the linearized model, re-linearized about the running estimate.

    The subspace LM may move in is fixed at the initial linearization so the
    outer passes refine one well-defined problem.
    """
    total = np.zeros_like(x0)
    w0 = x0
    restrict = None
    if cfg.observable_only:
        points0 = linearize(samples, nominal)
        if np.any(x0):
            # the filter's estimate along unobservable directions is prior correlation only
            _, V, _ = observable_basis(points0, planes, OBSERVABLE_RTOL)
            w0 = V @ (V.T @ x0)
        prior_sd = np.sqrt(default_prior(cfg.prior_angle_var, cfg.prior_length_var).P.diagonal())
        B = identifiable_basis(points0, planes, prior_sd, cfg.measurement_sigma,
                               cfg.identifiable_snr)
        restrict = B @ B.T
        log.debug("lm: %d identifiable directions", B.shape[1])
    curve, passes = [], []
    iterations = 0
    converged = False
    lam = cfg.lm.lambda_init
    for k in range(max(cfg.relinearize_passes, 1)):
        points = linearize(samples, apply_delta(nominal, total))
        if restrict is not None:
            points = PointSet(points.positions, points.jacobians @ restrict, points.plane_ids)
        # damping carries over between passes; a reset would stall weak directions
        init = LmState.from_planes(w0, planes, lam)
        state, trace = lm_optimize(init, points, cfg.lm)
        _check_finite("lm", [trace.f0] + trace.objective)
        total = total + state.w
        lam = state.lam
        planes = state.planes
        iterations += trace.iterations
        curve.extend(trace.objective if k else [trace.f0] + trace.objective)
        passes.append(trace.to_dict())
        converged = trace.converged
        log.debug("lm pass %d: %d iterations, f=%.3e (%s)", k, trace.iterations,
                  trace.accepted_objectives()[-1], trace.reason)
        if np.max(np.abs(state.w - w0)) < cfg.relinearize_tol and k > 0:
            break
        w0 = np.zeros_like(x0)
    traces = {"lm_passes": passes}
    if restrict is not None:
        traces["lm_identifiable_rank"] = int(round(np.trace(restrict)))
    return StageResult(total, planes, iterations, curve, converged, traces)


def _residuals(samples, table, planes) -> np.ndarray:
    ids = np.array([s.plane_id for s in samples])
    return plane_residuals(constrained_positions(samples, table), planes, ids)


@dataclass
class CalibrationReport:
    method: str
    identified: ParamDelta
    nominal: DhTable
    calibrated: DhTable
    planes_before: list
    planes: list
    residuals: dict
    metrics: dict
    iterations: dict
    curve: list
    traces: dict
    converged: bool
    config: dict
    seed: int
    split: dict

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "converged": self.converged,
            "identified_delta": self.identified.vector.tolist(),
            "identified_delta_order": "alpha1..6 [rad], a1..6 [mm], d1..6 [mm], theta1..6 [rad]",
            "nominal_table_deg": self.nominal.to_degrees().tolist(),
            "calibrated_table_deg": self.calibrated.to_degrees().tolist(),
            "calibrated_table": self.calibrated.params.tolist(),
            "planes_before": [p.to_dict() for p in self.planes_before],
            "planes": [p.to_dict() for p in self.planes],
            "residuals": {k: np.asarray(v).tolist() for k, v in self.residuals.items()},
            "metrics": {k: v.to_dict() for k, v in self.metrics.items()},
            "literal_metrics": {k: literal_metrics(v)
                                      for k, v in self.residuals.items() if len(v)},
            "iterations": self.iterations,
            "curve": list(self.curve),
            "traces": self.traces,
            "split": {k: np.asarray(v).tolist() for k, v in self.split.items()},
            "config": self.config,
        }

    @property
    def reduction(self) -> float:
        """Fractional validation RMSE reduction (training when there is no validation set)."""
        key = "validation" if "validation_after" in self.metrics else "train"
        b, a = self.metrics[f"{key}_before"].rmse, self.metrics[f"{key}_after"].rmse
        return 1.0 - a / b if b > 0 else 0.0


def calibrate(samples: Sequence[Sample], nominal: DhTable, method: str = "sckf_lm",
              config: Optional[PipelineConfig] = None) -> CalibrationReport:
    """Identify D-H corrections from dial samples with one of :data:`METHODS`.

    ``sckf_lm`` filters first, then seeds LM with the filter mean and a plane
    refit to the filter-corrected points.
    """
    cfg = config or PipelineConfig()
    if method not in METHODS:
        raise InvalidInputError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")
    samples = list(samples)
    if len(samples) < 4:
        raise InvalidInputError(f"calibration needs at least 4 samples, got {len(samples)}")
    check_dial_range(samples)
    train_idx, val_idx = split_indices(samples, cfg.validation_fraction, cfg.seed)
    train = [samples[i] for i in train_idx]
    val = [samples[i] for i in val_idx]

    points = linearize(train, nominal)
    planes0 = fit_planes(points.positions, points.plane_ids)
    x0 = np.zeros(24)
    stages = {}
    if method in ("ekf", "sckf", "sckf_lm"):
        kind = "ekf" if method == "ekf" else "sckf"
        stages[kind] = _run_filter(kind, points, planes0, cfg)
    if method in ("lm", "sckf_lm"):
        if method == "sckf_lm":
            x0 = stages["sckf"].delta
            lm_planes = fit_planes(points.predicted(x0), points.plane_ids)
        else:
            lm_planes = planes0
        stages["lm"] = _run_lm(train, nominal, x0, lm_planes, cfg)

    final = stages["lm"] if "lm" in stages else next(iter(stages.values()))
    identified = ParamDelta(final.delta)
    calibrated = apply_delta(nominal, identified)
    if "lm" in stages:
        planes = final.planes
    else:
        planes = fit_planes(constrained_positions(train, calibrated), points.plane_ids)

    residuals = {
        "train_before": _residuals(train, nominal, planes0),
        "train_after": _residuals(train, calibrated, planes),
    }
    if val:
        residuals["validation_before"] = _residuals(val, nominal, planes0)
        residuals["validation_after"] = _residuals(val, calibrated, planes)
    for k, v in residuals.items():
        _check_finite(method, v)
    metrics = {k: compute_metrics(v) for k, v in residuals.items()}
    curve = [f for s in stages.values() for f in s.curve]
    traces = {}
    for s in stages.values():
        traces.update(s.traces)
    return CalibrationReport(
        method=method,
        identified=identified,
        nominal=nominal,
        calibrated=calibrated,
        planes_before=planes0,
        planes=planes,
        residuals=residuals,
        metrics=metrics,
        iterations={k: s.iterations for k, s in stages.items()},
        curve=curve,
        traces=traces,
        converged=all(s.converged for s in stages.values()),
        config=cfg.to_dict(),
        seed=cfg.seed,
        split={"train": train_idx, "validation": val_idx},
    )


@dataclass
class Comparison:
    rows: list
    reports: dict
    errors: dict

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "iterations": {m: r.iterations for m, r in self.reports.items()},
            "curves": {m: r.curve for m, r in self.reports.items()},
            "errors": self.errors,
        }

    def table(self) -> str:
        head = f"{'model':<20}{'RMSE(mm)':>12}{'STD(mm)':>12}{'MAX(mm)':>12}{'iters':>8}"
        lines = [head, "-" * len(head)]
        for row in self.rows:
            iters = "" if row["iterations"] is None else str(row["iterations"])
            lines.append(f"{row['model']:<20}{row['rmse']:>12.6f}{row['std']:>12.6f}"
                         f"{row['max']:>12.6f}{iters:>8}")
        for m, e in self.errors.items():
            lines.append(f"{m:<20}  failed: {e}")
        return "\n".join(lines)


def compare(samples: Sequence[Sample], nominal: DhTable, methods: Sequence[str],
            config: Optional[PipelineConfig] = None) -> Comparison:
    """Run several methods on the same samples; one method failing does not stop the rest."""
    if not methods:
        raise InvalidInputError("compare needs at least one method")
    reports, errors, rows = {}, {}, []
    for m in methods:
        try:
            reports[m] = calibrate(samples, nominal, m, config)
        except CalibrationError as exc:
            log.warning("method %s failed: %s", m, exc)
            errors[m] = f"{type(exc).__name__}: {exc}"
    if reports:
        first = next(iter(reports.values()))
        key = "validation" if "validation_before" in first.metrics else "train"
        before = first.metrics[f"{key}_before"]
        rows.append({"model": "before calibration", "rmse": before.rmse, "std": before.std,
                     "max": before.max, "n": before.n, "iterations": None})
        for m, r in reports.items():
            after = r.metrics[f"{key}_after"]
            rows.append({"model": m, "rmse": after.rmse, "std": after.std, "max": after.max,
                         "n": after.n, "iterations": int(sum(r.iterations.values()))})
    return Comparison(rows, reports, errors)
