import numpy as np
import pytest

import planecal.pipeline as pipeline
from planecal.error_model import ParamDelta, apply_delta
from planecal.errors import CalibrationError, DivergenceError, InvalidInputError
from planecal.measurements import Sample, constrained_positions, linearize
from planecal.metrics import compute_metrics
from planecal.pipeline import (METHODS, PipelineConfig, _check_finite, calibrate, compare,
                               split_indices)
from planecal.plane import plane_residuals
from planecal.simulate import benchmark_scenario, generate


@pytest.fixture(scope="module")
def report(b1_comparison):
    return b1_comparison.reports["sckf_lm"]


def test_split_shape_and_stability(b1):
    _, samples, _ = b1
    train, val = split_indices(samples, seed=42)
    assert (len(train), len(val)) == (85, 35)
    assert not set(train) & set(val) and sorted(np.r_[train, val]) == list(range(120))
    again, _ = split_indices(samples, seed=42)
    assert np.array_equal(train, again)
    other, _ = split_indices(samples, seed=1)
    assert not np.array_equal(train, other)
    ids = np.array([s.plane_id for s in samples])
    assert np.bincount(ids[train]).min() >= 3


def test_split_small_sets_keep_training_points():
    samples = [Sample(np.zeros(6), 0.0, k) for k in (0, 0, 0, 0, 1, 1, 1)]
    train, val = split_indices(samples, 0.5)
    assert len(val) == 1 and len(train) == 6


def test_report_metrics_recomputable(b1_comparison):
    for rep in b1_comparison.reports.values():
        for key, res in rep.residuals.items():
            stored, again = rep.metrics[key], compute_metrics(res)
            for f in ("rmse", "std", "max"):
                assert abs(getattr(stored, f) - getattr(again, f)) <= 1e-12
        doc = rep.to_dict()
        for key, res in doc["residuals"].items():
            assert abs(compute_metrics(res).rmse - doc["metrics"][key]["rmse"]) <= 1e-12


def test_report_contents(report):
    doc = report.to_dict()
    assert doc["method"] == "sckf_lm" and len(doc["identified_delta"]) == 24
    assert set(report.iterations) == {"sckf", "lm"}
    assert {"sckf", "lm_passes", "lm_identifiable_rank"} <= set(doc["traces"])
    assert doc["literal_metrics"]["validation_after"]["max"] == report.metrics[
        "validation_after"].max
    assert len(doc["split"]["validation"]) == 35
    assert report.converged and report.reduction >= 0.7


def _compensation_gap(report, val, nominal, scale):
    delta = ParamDelta(scale * report.identified.vector)
    pts = linearize(val, nominal)
    lin = plane_residuals(pts.predicted(delta), report.planes, pts.plane_ids)
    fk = plane_residuals(constrained_positions(val, apply_delta(nominal, delta)), report.planes,
                         pts.plane_ids)
    return np.max(np.abs(lin - fk))


def test_compensation_identity_is_first_order(report, b1, nominal):
    _, samples, _ = b1
    val = [samples[i] for i in report.split["validation"]]
    scales = np.array([1.0, 0.5, 0.2])
    gaps = np.array([_compensation_gap(report, val, nominal, s) for s in scales])
    np.testing.assert_allclose(gaps / gaps[0], scales**2, rtol=0.05)
    assert gaps[-1] <= 1e-4


@pytest.mark.xfail(strict=True, reason="0.05 deg angle errors on a ~2 m arm leave a ~1e-3 mm "
                   "second-order remainder; the 1e-4 mm bound needs smaller deltas")
def test_compensation_identity_literal(report, b1, nominal):
    _, samples, _ = b1
    val = [samples[i] for i in report.split["validation"]]
    assert _compensation_gap(report, val, nominal, 1.0) <= 1e-4


def test_compare_rows(b1_comparison):
    rows = b1_comparison.rows
    assert [r["model"] for r in rows] == ["before calibration", *METHODS]
    assert rows[0]["iterations"] is None and all(r["iterations"] > 0 for r in rows[1:])
    text = b1_comparison.table()
    assert text.splitlines()[0].split() == ["model", "RMSE(mm)", "STD(mm)", "MAX(mm)", "iters"]
    assert set(b1_comparison.to_dict()["curves"]) == set(METHODS)


def test_single_method_row_matches_solo_report(b1, nominal):
    _, samples, _ = b1
    solo = calibrate(samples, nominal, "lm")
    cmp_ = compare(samples, nominal, ["lm"])
    assert len(cmp_.rows) == 2
    assert cmp_.rows[1]["rmse"] == solo.metrics["validation_after"].rmse
    assert cmp_.rows[1]["max"] == solo.metrics["validation_after"].max


def test_same_before_row_across_methods(b1, nominal):
    _, samples, _ = b1
    a = compare(samples, nominal, ["ekf"]).rows[0]
    b = compare(samples, nominal, ["sckf"]).rows[0]
    assert a == b


def test_compare_isolates_failures(b1, nominal, monkeypatch):
    _, samples, _ = b1
    real = pipeline.calibrate

    def flaky(s, n, method, cfg=None):
        if method == "ekf":
            raise DivergenceError("ekf")
        return real(s, n, method, cfg)

    monkeypatch.setattr(pipeline, "calibrate", flaky)
    result = compare(samples, nominal, ["ekf", "sckf"])
    assert set(result.reports) == {"sckf"} and "DivergenceError" in result.errors["ekf"]
    assert "ekf" in result.table()
    with pytest.raises(InvalidInputError):
        compare(samples, nominal, [])


def test_zero_error_zero_noise(nominal):
    sc = benchmark_scenario(seed=4, n_samples=48, noise_sigma=0.0, truth=ParamDelta.zeros())
    samples, _ = generate(sc)
    for method in METHODS:
        rep = calibrate(samples, nominal, method)
        impact = linearize(samples, nominal).jacobians @ rep.identified.vector
        assert np.max(np.abs(impact)) <= 1e-9, method
        for key in ("validation_before", "validation_after"):
            assert rep.metrics[key].max <= 1e-9


def test_input_errors(b1, nominal):
    _, samples, _ = b1
    with pytest.raises(InvalidInputError, match="valid methods"):
        calibrate(samples, nominal, "m7")
    with pytest.raises(InvalidInputError):
        calibrate(samples[:3], nominal)
    with pytest.raises(InvalidInputError):
        calibrate(samples[:10] + [Sample(np.zeros(6), 11.0)], nominal)


def test_divergence_names_stage():
    with pytest.raises(DivergenceError, match="lm") as info:
        _check_finite("lm", [1.0, np.nan])
    assert isinstance(info.value, CalibrationError)


def test_config_round_trip():
    cfg = PipelineConfig(seed=3)
    d = cfg.to_dict()
    assert d["seed"] == 3 and d["lm"]["mode"] == "joint"
