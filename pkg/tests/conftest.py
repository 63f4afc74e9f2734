import numpy as np
import pytest

from planecal.kinematics import nominal_table
from planecal.pipeline import METHODS, PipelineConfig, compare
from planecal.simulate import benchmark_scenario, generate


@pytest.fixture(scope="session")
def nominal():
    return nominal_table()


@pytest.fixture(scope="session")
def b1():
    scenario = benchmark_scenario(seed=42)
    samples, truth = generate(scenario)
    return scenario, samples, truth


@pytest.fixture(scope="session")
def b1_comparison(b1, nominal):
    _, samples, _ = b1
    return compare(samples, nominal, METHODS, PipelineConfig(seed=42))


def random_table(rng):
    """The nominal table with every entry jittered; keeps shapes realistic."""
    base = nominal_table().params
    jitter = np.column_stack([rng.uniform(-0.2, 0.2, 6), rng.uniform(-50, 50, 6),
                              rng.uniform(-50, 50, 6), rng.uniform(-0.2, 0.2, 6)])
    return base + jitter


# one summary line per acceptance criterion
CRITERIA = {
    1: "relative accuracy (B1 sckf_lm validation RMSE reduction >= 70%, <= 60 s)",
    2: "method ordering sckf_lm <= lm <= ekf (RMSE and MAX) on >= 4/5 seeds",
    3: "exact recovery on noiseless multi-plane data (<= 1e-6, <= 10 s)",
    4: "square-root filter equals full-covariance oracle (1e-9), PSD throughout",
    5: "SCKF and EKF reproduce the scalar Kalman update (1e-10)",
    6: "Jacobian vs independent oracle (1e-5 abs); LM blocks vs FD (1e-5 rel)",
    7: "LM monotone descent, gradient <= 1e-8, one-step Gauss-Newton toy",
    8: "metric hand values and recomputability (1e-12)",
    9: "byte-identical reruns of every command",
    10: "single-plane observability honesty (rank < 24, oracle match, >= 50% reduction)",
}
_outcomes: dict = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or "::test_criterion_" not in report.nodeid:
        return
    num = int(report.nodeid.split("::test_criterion_")[1].split("_")[0])
    if report.when == "call" and hasattr(report, "wasxfail"):
        state = "xfail"
    elif report.failed:
        state = "fail"
    elif report.when == "call" and report.passed:
        state = "pass"
    else:
        return
    _outcomes.setdefault(num, []).append(state)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num, title in CRITERIA.items():
        states = _outcomes.get(num)
        if not states:
            continue
        if "fail" in states:
            verdict = "FAIL"
        elif "xfail" in states:
            verdict = "FAIL (known, see notes; supporting checks pass)"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"criterion {num:2d}: {verdict:<48} {title}")
