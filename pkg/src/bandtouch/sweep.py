"""Parameter sweeps of the transition probability and the interference phase.

Every grid point is an independent drive, so points are farmed out to a thread
pool (the compiled kernels release the GIL) and collected back in input order.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

from . import _io
from .dynamics import Protocol, drive_probability, split_phase_analysis
from .errors import BandTouchError, VanishingAmplitudeError
from .models import GL, GP, ModelSpec, PolyDiag, PWave, model_from_dict, model_to_dict

AXES = ("delta", "speed", "exponent")
MEASURES = ("p", "delta_phi")
THREADS_ENV = "BANDTOUCH_THREADS"
PEAK_PROMINENCE = 1e-4


class SweepPointError(BandTouchError):
    """A dynamics failure at one grid point; ``axis_value`` names the point."""

    def __init__(self, axis_value, cause):
        super().__init__(f"sweep point axis_value={axis_value!r} failed: {cause}")
        self.axis_value = axis_value
        self.cause = cause


def with_delta(model: ModelSpec, value: float) -> ModelSpec:
    """Copy of ``model`` with its coupling strength set to ``value``."""
    if isinstance(model, GL):
        return replace(model, delta1=value)
    if isinstance(model, GP):
        return replace(model, delta2=value)
    if isinstance(model, (PolyDiag, PWave)):
        return replace(model, delta=value)
    raise ValueError(f"family {model.family!r} has no delta axis")


def with_exponent(model: ModelSpec, value) -> ModelSpec:
    if not isinstance(model, (GL, GP)):
        raise ValueError(f"family {model.family!r} has no exponent axis")
    if float(value) != int(value):
        raise ValueError(f"exponent values must be integers, got {value!r}")
    return replace(model, n=int(value))


@dataclass(frozen=True)
class SweepSpec:
    """A one-dimensional grid over ``axis`` with everything else held fixed."""

    model_template: ModelSpec
    axis: str
    values: tuple
    protocol: Protocol
    measure: frozenset = field(default=frozenset({"p"}))

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown axis {self.axis!r}; expected one of {AXES}")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("sweep grid is empty")
        if any(not np.isfinite(v) for v in values):
            raise ValueError("sweep grid contains non-finite values")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", values)
        measure = frozenset(self.measure)
        if not measure:
            raise ValueError("measure set is empty")
        unknown = measure - set(MEASURES)
        if unknown:
            raise ValueError(f"unknown measures {sorted(unknown)}; expected a subset of {MEASURES}")
        if "delta_phi" in measure and self.protocol.kind != "pl2":
            raise ValueError(f"delta_phi needs a pl2 protocol, got {self.protocol.kind!r}")
        object.__setattr__(self, "measure", measure)
        # build every point once so bad values fail before any computation
        for v in values:
            self.point(v)

    def point(self, value: float) -> tuple[ModelSpec, Protocol]:
        if self.axis == "delta":
            return with_delta(self.model_template, value), self.protocol
        if self.axis == "exponent":
            return with_exponent(self.model_template, value), self.protocol
        return self.model_template, replace(self.protocol, c=value)

    def to_dict(self) -> dict:
        return {
            "model": model_to_dict(self.model_template),
            "axis": self.axis,
            "values": list(self.values),
            "protocol": self.protocol.to_dict(),
            "measure": [m for m in MEASURES if m in self.measure],
        }


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    p: float
    delta_phi: float | None = None


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    provenance: dict

    @property
    def axis_values(self) -> np.ndarray:
        return np.array([r.axis_value for r in self.rows])

    @property
    def p(self) -> np.ndarray:
        return np.array([r.p for r in self.rows])

    @property
    def delta_phi(self) -> np.ndarray:
        return np.array([np.nan if r.delta_phi is None else r.delta_phi for r in self.rows])

    @property
    def has_delta_phi(self) -> bool:
        return "delta_phi" in self.provenance.get("measure", ()) or any(
            r.delta_phi is not None for r in self.rows
        )


def default_workers() -> int:
    n = os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(n, 1)


def _evaluate(spec: SweepSpec, value: float) -> SweepRow:
    model, protocol = spec.point(value)
    try:
        if "delta_phi" in spec.measure:
            try:
                dec = split_phase_analysis(model, protocol)
            except VanishingAmplitudeError:
                return SweepRow(value, drive_probability(model, protocol), None)
            return SweepRow(value, dec.p_direct, dec.delta_phi)
        return SweepRow(value, drive_probability(model, protocol))
    except BandTouchError as exc:
        raise SweepPointError(value, exc) from exc


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Evaluate every grid point; rows come back in input order for any ``workers``."""
    if workers is None:
        workers = default_workers()
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if workers == 1:
        rows = [_evaluate(spec, v) for v in spec.values]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, len(spec.values))) as pool:
            rows = list(pool.map(lambda v: _evaluate(spec, v), spec.values))
    provenance = spec.to_dict()
    provenance["dt"] = spec.protocol.dt
    provenance["lambda_inf"] = spec.protocol.lambda_inf
    provenance["epsilon"] = spec.protocol.epsilon
    return SweepResult(tuple(rows), provenance)


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def table_text(result: SweepResult, fmt: str = "csv") -> str:
    with_phase = result.has_delta_phi
    if fmt == "csv":
        header = ["axis_value", "p"] + (["delta_phi"] if with_phase else [])
        rows = ((r.axis_value, r.p) + ((r.delta_phi,) if with_phase else ()) for r in result.rows)
        return _io.csv_text(header, rows)
    if fmt == "json":
        rows = []
        for r in result.rows:
            row = {"axis_value": r.axis_value, "p": r.p}
            if with_phase:
                row["delta_phi"] = r.delta_phi
            rows.append(row)
        return _io.json_text({"rows": rows, "provenance": result.provenance})
    raise ValueError(f"unknown table format {fmt!r}; expected 'csv' or 'json'")


def write_table(result: SweepResult, path, fmt: str = "csv") -> None:
    _io.write_text(path, table_text(result, fmt))


def read_table(path) -> SweepResult:
    """Read back a table written by ``write_table`` (format from the suffix)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        data = json.loads(path.read_text())
        rows = tuple(SweepRow(r["axis_value"], r["p"], r.get("delta_phi")) for r in data["rows"])
        return SweepResult(rows, data["provenance"])
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for r in reader:
            phase = r.get("delta_phi")
            rows.append(SweepRow(float(r["axis_value"]), float(r["p"]),
                                 float(phase) if phase not in (None, "") else None))
    return SweepResult(tuple(rows), {})


# ---------------------------------------------------------------------------
# Shape analysis
# ---------------------------------------------------------------------------


def local_maxima(y, prominence: float = PEAK_PROMINENCE) -> np.ndarray:
    """Indices of interior strict local maxima with at least ``prominence``."""
    peaks, _ = find_peaks(np.asarray(y, dtype=float), prominence=prominence)
    return peaks


def local_minima(y, prominence: float = PEAK_PROMINENCE) -> np.ndarray:
    return local_maxima(-np.asarray(y, dtype=float), prominence)


def oscillation_period(x, y, prominence: float = PEAK_PROMINENCE) -> float:
    """Mean spacing of successive maxima of ``y(x)``; NaN with fewer than two."""
    peaks = local_maxima(y, prominence)
    if len(peaks) < 2:
        return float("nan")
    return float(np.mean(np.diff(np.asarray(x, dtype=float)[peaks])))


def max_decrease(y) -> float:
    """Largest drop between neighbours (0 for a nondecreasing sequence)."""
    d = np.diff(np.asarray(y, dtype=float))
    return float(max(0.0, -d.min())) if d.size else 0.0


def max_increase(y) -> float:
    d = np.diff(np.asarray(y, dtype=float))
    return float(max(0.0, d.max())) if d.size else 0.0


def spec_from_provenance(provenance: dict) -> SweepSpec:
    """Rebuild the ``SweepSpec`` echoed in a JSON table."""
    proto = dict(provenance["protocol"])
    return SweepSpec(
        model_from_dict(provenance["model"]),
        provenance["axis"],
        tuple(provenance["values"]),
        Protocol(**proto),
        frozenset(provenance["measure"]),
    )
