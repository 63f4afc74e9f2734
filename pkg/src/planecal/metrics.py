"""Residual statistics: MAX, STD and RMSE of plane residuals."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class MetricSet:
    rmse: float
    std: float
    max: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(residuals) -> MetricSet:
    """MAX of |r|, RMSE of r, and the population std of |r| (all mm)."""
    r = np.asarray(residuals, dtype=float).reshape(-1)
    if r.size == 0:
        raise InvalidInputError("metrics need at least one residual")
    a = np.abs(r)
    return MetricSet(
        rmse=float(np.sqrt(np.mean(r**2))),
        std=float(np.sqrt(np.mean((a - a.mean()) ** 2))),
        max=float(a.max()),
        n=int(r.size),
    )


def literal_metrics(residuals) -> dict:
    """Non-standard variants of the three statistics, reported for comparison.

    "std" is the mean absolute residual and "rmse" sums ``sqrt(r_i^2 / N)``,
    i.e. ``sum|r| / sqrt(N)``; figures quoted in these forms can be compared
    directly against them.
    """
    a = np.abs(np.asarray(residuals, dtype=float).reshape(-1))
    if a.size == 0:
        raise InvalidInputError("metrics need at least one residual")
    return {
        "max": float(a.max()),
        "std": float(a.sum() / a.size),
        "rmse": float(np.sum(np.sqrt(a**2 / a.size))),
    }
