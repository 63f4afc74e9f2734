"""Dial-indicator samples and their conversion to constrained position points."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .error_model import position_jacobians
from .errors import InvalidInputError
from .kinematics import D, DhTable, chain
from .plane import PointSet

DIAL_RANGE_MM = 10.0


@dataclass(frozen=True, eq=False)
class Sample:
    """Commanded joints (rad), dial reading (mm) and gauge-block placement index."""

    q: np.ndarray
    dial_mm: float
    plane_id: int = 0

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        if q.shape != (6,) or not np.all(np.isfinite(q)):
            raise InvalidInputError(f"sample needs 6 finite joint angles, got {self.q!r}")
        if not np.isfinite(self.dial_mm):
            raise InvalidInputError(f"non-finite dial reading {self.dial_mm}")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "dial_mm", float(self.dial_mm))
        object.__setattr__(self, "plane_id", int(self.plane_id))

    def __eq__(self, other):
        return (isinstance(other, Sample) and np.array_equal(self.q, other.q)
                and self.dial_mm == other.dial_mm and self.plane_id == other.plane_id)


def check_dial_range(samples: Sequence[Sample], dial_range: float = DIAL_RANGE_MM):
    for i, s in enumerate(samples):
        if abs(s.dial_mm) > dial_range:
            raise InvalidInputError(
                f"sample {i}: dial reading {s.dial_mm} mm exceeds range +/-{dial_range} mm")


def apply_dial_to_model(sample: Sample, table: DhTable) -> DhTable:
    """Fold the dial reading into the sixth link offset."""
    return table.with_d6(table.d[5] + sample.dial_mm)


def _stack(samples: Sequence[Sample], table: DhTable):
    if len(samples) == 0:
        raise InvalidInputError("no samples")
    qs = np.array([s.q for s in samples])
    params = np.repeat(table.params[None], len(samples), axis=0)
    params[:, 5, D] += np.array([s.dial_mm for s in samples])
    ids = np.array([s.plane_id for s in samples], dtype=int)
    return params, qs, ids


def constrained_positions(samples: Sequence[Sample], table: DhTable) -> np.ndarray:
    """Tool points of ``table`` with each sample's dial folded into d6, (N, 3)."""
    params, qs, _ = _stack(samples, table)
    return chain(params, qs)[:, :3, 3]


def linearize(samples: Sequence[Sample], table: DhTable) -> PointSet:
    """Positions and identification Jacobians of the samples about ``table``."""
    params, qs, ids = _stack(samples, table)
    pos = chain(params, qs)[:, :3, 3]
    return PointSet(pos, position_jacobians(params, qs), ids)
