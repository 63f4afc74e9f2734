"""Sample CSV, JSON report and curve CSV files.

Sample CSV: header ``j1_deg,...,j6_deg,dial_mm`` with an optional trailing
``plane`` column (gauge-block placement index, default 0). Floats are written
in shortest round-trip form, zeros as ``0``, and joint angles as the degree
values that convert back to the stored radians bit for bit, so reading a
written file gives back exactly the same samples.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .kinematics import degrees_exact
from .measurements import Sample

JOINT_COLUMNS = [f"j{i}_deg" for i in range(1, 7)]
HEADER = JOINT_COLUMNS + ["dial_mm"]
PLANE_COLUMN = "plane"
CURVE_HEADER = ["iteration", "objective_mm2"]


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise InvalidInputError(f"cannot serialize non-finite value {x}")
    return "0" if x == 0.0 else repr(x)


def _writer_text(rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def samples_to_csv(samples: Sequence[Sample], with_plane: bool | None = None) -> str:
    """CSV text; the plane column is written when any sample is off plane 0 unless forced."""
    if with_plane is None:
        with_plane = any(s.plane_id != 0 for s in samples)
    header = HEADER + ([PLANE_COLUMN] if with_plane else [])
    rows = [header]
    for s in samples:
        row = [format_float(v) for v in degrees_exact(s.q)] + [format_float(s.dial_mm)]
        if with_plane:
            row.append(str(s.plane_id))
        rows.append(row)
    return _writer_text(rows)


def write_samples(path, samples: Sequence[Sample], with_plane: bool | None = None) -> Path:
    path = Path(path)
    _write_text(path, samples_to_csv(samples, with_plane))
    return path


def parse_samples(text: str, source: str = "<csv>") -> list[Sample]:
    """Parse sample CSV text; errors name the 1-based line."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InvalidInputError(f"{source}: empty file") from None
    header = [h.strip() for h in header]
    if header not in (HEADER, HEADER + [PLANE_COLUMN]):
        raise InvalidInputError(
            f"{source}:1: header must be {','.join(HEADER)}[,{PLANE_COLUMN}], got {','.join(header)}")
    width = len(header)
    samples = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise InvalidInputError(f"{source}:{line}: expected {width} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row[:7]]
        except ValueError:
            raise InvalidInputError(f"{source}:{line}: non-numeric field in {row!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError(f"{source}:{line}: non-finite field in {row!r}")
        plane = 0
        if width == 8:
            try:
                plane = int(row[7])
            except ValueError:
                raise InvalidInputError(f"{source}:{line}: plane must be an integer, got {row[7]!r}") from None
            if plane < 0:
                raise InvalidInputError(f"{source}:{line}: plane index must be >= 0")
        samples.append(Sample(np.radians(vals[:6]), vals[6], plane))
    return samples


def read_samples(path) -> list[Sample]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_samples(text, str(path))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        # JSON has no NaN/inf
        return x if math.isfinite(x) else None
    return obj


def dumps_json(obj) -> str:
    """Deterministic JSON; floats use shortest round-trip repr."""
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    _write_text(path, dumps_json(obj))
    return path


def curve_to_csv(curve: Sequence[float]) -> str:
    return _writer_text([CURVE_HEADER] + [[str(i), format_float(f)] for i, f in enumerate(curve)])


def write_curve(path, curve: Sequence[float]) -> Path:
    path = Path(path)
    _write_text(path, curve_to_csv(curve))
    return path


def read_curve(path) -> list[float]:
    rows = list(csv.reader(Path(path).read_text(encoding="utf-8").splitlines()))
    if not rows or rows[0] != CURVE_HEADER:
        raise InvalidInputError(f"{path}:1: header must be {','.join(CURVE_HEADER)}")
    return [float(r[1]) for r in rows[1:]]


def _write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None
