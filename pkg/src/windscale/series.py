"""Core time-series data model: ingestion, resampling, increments,
magnitude/sign decomposition and Pearson correlation.

All operations are pure functions; the container types are frozen after
construction, so per-series work can safely run in parallel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import IngestionError, NumericalError

__all__ = [
    "TimeSeries",
    "IncrementSeries",
    "MagSignPair",
    "CorrelationMatrix",
    "load_csv",
    "resample_mean",
    "increments",
    "mag_sign",
    "pearson_matrix",
    "write_timeseries_csv",
]


def _as_float_array(values, name="values"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValueError(f"{name} contains a non-finite sample at index {bad}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled scalar record.

    Parameters
    ----------
    values : array_like
        Samples, gap free.  Gap handling happens at ingestion, never here.
    dt : float
        Sampling interval in minutes, strictly positive and constant.
    t0 : float
        Timestamp of the first sample, UTC epoch seconds.
    label : str
        Short identifier, e.g. ``"AN1"``.
    unit : str
        Free-text physical unit, e.g. ``"m/s"``.
    """

    values: np.ndarray
    dt: float
    t0: float = 0.0
    label: str = ""
    unit: str = ""
    provenance: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_float_array(self.values))
        if not (self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt}")

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (np.array_equal(self.values, other.values)
                and self.dt == other.dt and self.t0 == other.t0
                and self.label == other.label and self.unit == other.unit)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def duration_minutes(self) -> float:
        return self.values.size * self.dt

    def timestamps(self) -> np.ndarray:
        """UTC epoch seconds of every sample."""
        return self.t0 + np.arange(self.values.size) * (self.dt * 60.0)

    def with_values(self, values, **overrides) -> "TimeSeries":
        kw = dict(dt=self.dt, t0=self.t0, label=self.label, unit=self.unit)
        kw.update(overrides)
        return TimeSeries(values=values, **kw)

    def to_dict(self) -> dict:
        """Documented JSON shape used by every CLI output."""
        return {
            "label": self.label,
            "unit": self.unit,
            "dt_minutes": float(self.dt),
            "t0_epoch_seconds": float(self.t0),
            "n": int(self.values.size),
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TimeSeries":
        return cls(
            values=d["values"],
            dt=float(d["dt_minutes"]),
            t0=float(d.get("t0_epoch_seconds", 0.0)),
            label=d.get("label", ""),
            unit=d.get("unit", ""),
        )


@dataclass(frozen=True)
class IncrementSeries:
    """First differences of a parent series; length is parent length minus one."""

    values: np.ndarray
    parent_label: str = ""
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "values", _as_float_array(self.values))
        if not (self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt}")

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class MagSignPair:
    """Magnitude/sign split of an increment series.

    ``magnitude[i] * sign[i]`` reproduces the increment exactly; the sign of a
    zero increment is 0.  Signs are stored as small integers so that no
    floating-point rewrite of the decomposition is possible.
    """

    magnitude: np.ndarray
    sign: np.ndarray
    parent_label: str = ""
    dt: float = 1.0

    def __post_init__(self):
        mag = _as_float_array(self.magnitude, "magnitude")
        sgn = np.asarray(self.sign, dtype=np.int8)
        if mag.shape != sgn.shape:
            raise ValueError("magnitude and sign must have equal length")
        if np.any(mag < 0):
            raise ValueError("magnitude must be non-negative")
        if not np.all(np.isin(sgn, (-1, 0, 1))):
            raise ValueError("sign entries must be in {-1, 0, +1}")
        sgn.flags.writeable = False
        object.__setattr__(self, "magnitude", mag)
        object.__setattr__(self, "sign", sgn)

    def reconstruct(self) -> np.ndarray:
        return self.magnitude * self.sign


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pearson coefficients of every series pair: symmetric, unit diagonal."""

    labels: tuple
    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        labels = tuple(self.labels)
        if r.shape != (len(labels), len(labels)):
            raise ValueError("matrix dimension must equal label count")
        r.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "r", r)

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "r": [[float(v) for v in row] for row in self.r]}


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def _parse_timestamp_column(raw, column):
    """Epoch seconds from a timestamp column; ISO-8601 or epoch auto-detected."""
    probe = raw[0].strip()
    try:
        float(probe)
        numeric = True
    except ValueError:
        numeric = False
    out = np.empty(len(raw), dtype=float)
    for i, cell in enumerate(raw):
        cell = cell.strip()
        try:
            if numeric:
                out[i] = float(cell)
            else:
                stamp = datetime.fromisoformat(cell.replace("Z", "+00:00"))
                if stamp.tzinfo is None:
                    stamp = stamp.replace(tzinfo=timezone.utc)
                out[i] = stamp.timestamp()
        except ValueError as exc:
            raise IngestionError(
                f"row {i + 2}: cannot parse timestamp {cell!r} in column {column!r}"
            ) from exc
    return out


def _contiguous_runs(t_sec, dt_sec, rel_tol=1e-6):
    """Split indices into maximal runs of consecutive dt-spaced samples."""
    breaks = [0]
    diffs = np.diff(t_sec)
    tol = rel_tol * dt_sec
    for i, d in enumerate(diffs):
        if abs(d - dt_sec) > tol:
            breaks.append(i + 1)
    breaks.append(len(t_sec))
    return [(breaks[k], breaks[k + 1]) for k in range(len(breaks) - 1)]


def load_csv(path, value_column, time_column, expected_dt, gap_policy="fail",
             delimiter=",", label=None, unit=""):
    """Read one scalar series from a delimited text file.

    Parameters
    ----------
    path : str or Path
        File with a header row.
    value_column, time_column : str
        Column names; timestamps may be ISO-8601 or epoch seconds
        (auto-detected from the first row).
    expected_dt : float
        Required sampling interval in minutes.
    gap_policy : {"fail", "drop-to-longest-contiguous"}
        ``fail`` aborts at the first gap; the drop policy keeps the longest
        run of consecutive samples and records what was dropped in the
        returned series' provenance.

    Returns
    -------
    TimeSeries
        Gap-free series with ``dt == expected_dt``.
    """
    if gap_policy not in ("fail", "drop-to-longest-contiguous"):
        raise ValueError(f"unknown gap_policy {gap_policy!r}")
    if not (expected_dt > 0):
        raise ValueError("expected_dt must be > 0 minutes")

    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None:
            raise IngestionError(f"{path}: empty file, header row required")
        for col in (value_column, time_column):
            if col not in reader.fieldnames:
                raise IngestionError(
                    f"{path}: missing column {col!r} (have {reader.fieldnames})"
                )
        t_raw, v_raw = [], []
        for row in reader:
            t_raw.append(row[time_column])
            v_raw.append(row[value_column])
    if len(v_raw) == 0:
        raise IngestionError(f"{path}: no data rows")

    t_sec = _parse_timestamp_column(t_raw, time_column)
    try:
        values = np.array([float(v) for v in v_raw], dtype=float)
    except ValueError as exc:
        raise IngestionError(f"{path}: non-numeric value in column {value_column!r}: {exc}") from exc

    if np.any(np.diff(t_sec) <= 0):
        i = int(np.flatnonzero(np.diff(t_sec) <= 0)[0])
        raise IngestionError(
            f"{path}: timestamps not strictly increasing at row {i + 2} "
            f"({t_sec[i]:g}s -> {t_sec[i + 1]:g}s)"
        )

    dt_sec = expected_dt * 60.0
    runs = _contiguous_runs(t_sec, dt_sec)
    if len(runs) > 1 and gap_policy == "fail":
        first_break = runs[0][1]
        raise IngestionError(
            f"{path}: gap between t={t_sec[first_break - 1]:g}s and "
            f"t={t_sec[first_break]:g}s (expected {dt_sec:g}s spacing); "
            "use gap_policy='drop-to-longest-contiguous' to keep the longest run"
        )

    # earliest run wins a length tie, so the choice is deterministic
    start, stop = max(runs, key=lambda r: r[1] - r[0])
    dropped = len(values) - (stop - start)
    provenance = {
        "source": str(path),
        "rows_read": len(values),
        "rows_dropped": dropped,
        "runs_found": len(runs),
    }
    return TimeSeries(
        values=values[start:stop],
        dt=float(expected_dt),
        t0=float(t_sec[start]),
        label=label if label is not None else value_column,
        unit=unit,
        provenance=provenance,
    )


def write_timeseries_csv(ts: TimeSeries, path):
    """Two-column CSV (epoch seconds, value); floats keep full precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "value"])
        for t, v in zip(ts.timestamps(), ts.values):
            writer.writerow([format(t, ".17g"), format(v, ".17g")])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def resample_mean(ts: TimeSeries, window: float) -> TimeSeries:
    """Non-overlapping block means; the trailing partial window is discarded.

    ``window`` is in minutes and must be an integer multiple of ``ts.dt``.
    """
    ratio = window / ts.dt
    k = int(round(ratio))
    if k < 1 or not math.isclose(ratio, k, rel_tol=1e-9, abs_tol=0.0):
        raise ValueError(
            f"window ({window} min) must be a positive integer multiple of dt ({ts.dt} min)"
        )
    if k == 1:
        return ts
    n_out = ts.values.size // k
    if n_out == 0:
        raise ValueError(f"window {window} min longer than the record")
    means = ts.values[: n_out * k].reshape(n_out, k).mean(axis=1)
    return ts.with_values(means, dt=float(window))


def increments(ts: TimeSeries) -> IncrementSeries:
    """First differences ``x[i+1] - x[i]``; requires at least two samples."""
    if ts.values.size < 2:
        raise ValueError("increments need at least 2 samples")
    return IncrementSeries(values=np.diff(ts.values), parent_label=ts.label, dt=ts.dt)


def mag_sign(inc: IncrementSeries) -> MagSignPair:
    """Split increments into magnitude and sign, with sign(0) = 0.

    The product ``magnitude * sign`` equals the input exactly, element by
    element, in IEEE arithmetic.
    """
    v = inc.values
    return MagSignPair(
        magnitude=np.abs(v),
        sign=np.sign(v).astype(np.int8),
        parent_label=inc.parent_label,
        dt=inc.dt,
    )


def pearson_matrix(series) -> CorrelationMatrix:
    """Sample Pearson coefficient for every pair of equally long series."""
    series = list(series)
    if not series:
        raise ValueError("need at least one series")
    n = series[0].values.size
    if n < 2:
        raise NumericalError("Pearson correlation needs series of length >= 2")
    for ts in series:
        if ts.values.size != n:
            raise NumericalError(
                f"length mismatch: {ts.label!r} has {ts.values.size} samples, expected {n}"
            )
    mat = np.stack([ts.values for ts in series])
    sd = mat.std(axis=1, ddof=1)
    zero = np.flatnonzero(sd == 0.0)
    if zero.size:
        bad = series[int(zero[0])].label
        raise NumericalError(f"zero-variance series {bad!r} has no defined correlation")
    z = (mat - mat.mean(axis=1, keepdims=True)) / sd[:, None]
    r = (z @ z.T) / (n - 1)
    np.clip(r, -1.0, 1.0, out=r)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(labels=tuple(ts.label for ts in series), r=r)
