"""Batch orchestration: ingest CSVs, run every analysis stage per series,
write per-stage artifacts and a deterministic JSON report.

Output tree, per input label::

    <out>/<label>/psd.csv          one-sided PSD on the log-frequency grid
    <out>/<label>/psd.json         PSD config echo + power-law fit
    <out>/<label>/distfit.json     per-family fits ranked by KL divergence
    <out>/<label>/eigvals.csv      SSA eigenvalue spectrum
    <out>/<label>/trend.csv        selected reconstructed components
    <out>/<label>/residual.csv     original minus trend
    <out>/<label>/fluct_mag.csv    DFA fluctuation curve of |increments|
    <out>/<label>/fluct_sign.csv   DFA fluctuation curve of sign(increments)
    <out>/<label>/surrogate.json   ensemble scaling comparison
    <out>/<label>/surrogate.csv    original vs ensemble mean +- std
    <out>/report.json              everything above summarised + provenance
    <out>/MANIFEST                 per-stage completion state

Reports are byte-identical for identical config, inputs and seeds: floats
serialise through repr (shortest round-trip), keys are sorted, and no wall
clock enters any artifact.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import jsonschema

from . import __version__
from .distfit import rank_distributions, rank_report
from .dfa import default_box_grid, dfa, scaling_exponent, write_fluctuation_csv
from .errors import ConfigError, StageError
from .series import TimeSeries, increments, load_csv, mag_sign, pearson_matrix, \
    resample_mean, write_timeseries_csv
from .spectral import fit_spectral_exponent, lpsd, write_psd_csv
from .ssa import SsaConfig, decompose, split_trend, write_eigenvalue_csv
from .surrogate import SurrogateConfig, ensemble_test, write_surrogate_csv

__all__ = [
    "InputSpec",
    "PipelineConfig",
    "PipelineReport",
    "run_pipeline",
    "load_config",
    "read_series_csv",
    "report_schema",
    "validate_report",
    "dump_json",
]


@dataclass(frozen=True)
class InputSpec:
    path: str
    value_column: str
    label: str
    time_column: str = "time"
    unit: str = ""


@dataclass(frozen=True)
class PipelineConfig:
    inputs: tuple
    output_dir: str
    # ingestion
    expected_dt: float = 1.0
    gap_policy: str = "fail"
    resample_window: float | None = None
    delimiter: str = ","
    # distribution fitting
    distfit_bins: object = "auto"
    zero_shift: float = 1e-6
    # spectral
    n_freqs: int = 200
    f_min: float | None = None
    f_max: float | None = None
    window_kind: str = "hann"
    fit_lo: float = 1e-4
    fit_hi: float = 1e-2
    # ssa
    ssa_m: int | None = None
    ssa_c: float = 2.5
    trend_components: tuple = (1,)
    # dfa
    dfa_order: int = 1
    dfa_t_min: float = 10.0
    points_per_decade: int = 20
    low_window: tuple = (10.0, 70.0)
    high_window: tuple = (300.0, 9070.0)
    # surrogates
    surrogate_count: int = 100
    surrogate_seed: int = 0
    surrogate_max_iterations: int = 200
    surrogate_tolerance: float = 1e-3
    # raw parsed document, echoed into the report
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def validate(self):
        if not self.inputs:
            raise ConfigError("at least one input series is required")
        labels = [spec.label for spec in self.inputs]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate input labels: {labels}")
        lo, hi = self.low_window, self.high_window
        if not (lo[0] < lo[1] and hi[0] < hi[1]):
            raise ConfigError("each DFA window needs low < high")
        if not lo[1] < hi[0]:
            raise ConfigError(
                f"DFA windows must be ordered and non-overlapping, got {lo} and {hi}")
        if self.dfa_order not in (1, 2, 3):
            raise ConfigError(f"dfa order must be 1, 2 or 3, got {self.dfa_order}")
        if self.surrogate_count < 1:
            raise ConfigError("surrogate count must be >= 1")
        if not (self.fit_lo < self.fit_hi):
            raise ConfigError("spectral fit band needs fit_lo < fit_hi")
        return self


@dataclass(frozen=True)
class PipelineReport:
    series: dict
    cross_series: dict
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "series": self.series,
            "cross_series": self.cross_series,
            "provenance": self.provenance,
        }


def _window_pair(value, name):
    try:
        lo, hi = float(value[0]), float(value[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"{name} must be a [low, high] pair of minutes") from exc
    return (lo, hi)


def load_config(path) -> PipelineConfig:
    """Parse a TOML pipeline configuration and validate it."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    try:
        inputs = tuple(
            InputSpec(
                path=entry["path"],
                value_column=entry["value_column"],
                label=entry.get("label", entry["value_column"]),
                time_column=entry.get("time_column", "time"),
                unit=entry.get("unit", ""),
            )
            for entry in doc.get("inputs", [])
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"each [[inputs]] entry needs path and value_column: {exc}") from exc

    ingest = doc.get("ingest", {})
    dist = doc.get("distfit", {})
    spec = doc.get("spectral", {})
    ssa = doc.get("ssa", {})
    dfa_sec = doc.get("dfa", {})
    surr = doc.get("surrogate", {})

    cfg = PipelineConfig(
        inputs=inputs,
        output_dir=doc.get("output_dir", "windscale-out"),
        expected_dt=float(ingest.get("expected_dt", 1.0)),
        gap_policy=ingest.get("gap_policy", "fail"),
        resample_window=(float(ingest["resample_window"])
                         if "resample_window" in ingest else None),
        delimiter=ingest.get("delimiter", ","),
        distfit_bins=dist.get("n_bins", "auto"),
        zero_shift=float(dist.get("zero_shift", 1e-6)),
        n_freqs=int(spec.get("n_freqs", 200)),
        f_min=float(spec["f_min"]) if "f_min" in spec else None,
        f_max=float(spec["f_max"]) if "f_max" in spec else None,
        window_kind=spec.get("window_kind", "hann"),
        fit_lo=float(spec.get("fit_lo", 1e-4)),
        fit_hi=float(spec.get("fit_hi", 1e-2)),
        ssa_m=int(ssa["m"]) if "m" in ssa else None,
        ssa_c=float(ssa.get("c", 2.5)),
        trend_components=tuple(int(k) for k in ssa.get("trend_components", [1])),
        dfa_order=int(dfa_sec.get("order", 1)),
        dfa_t_min=float(dfa_sec.get("t_min", 10.0)),
        points_per_decade=int(dfa_sec.get("points_per_decade", 20)),
        low_window=_window_pair(dfa_sec.get("low_window", [10.0, 70.0]), "low_window"),
        high_window=_window_pair(dfa_sec.get("high_window", [300.0, 9070.0]), "high_window"),
        surrogate_count=int(surr.get("count", 100)),
        surrogate_seed=int(surr.get("seed", 0)),
        surrogate_max_iterations=int(surr.get("max_iterations", 200)),
        surrogate_tolerance=float(surr.get("spectrum_tolerance", 1e-3)),
        raw=doc,
    )
    return cfg.validate()


def read_series_csv(path, label=None, unit="") -> TimeSeries:
    """Read a normalized two-column (time, value) CSV written by this package;
    the sampling interval is inferred from the first two timestamps."""
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        first = next(reader, None)
        second = next(reader, None)
    if header is None or first is None or second is None:
        raise ConfigError(f"{path}: need a header and at least two rows")
    dt_minutes = (float(second[0]) - float(first[0])) / 60.0
    return load_csv(path, value_column="value", time_column="time",
                    expected_dt=dt_minutes, gap_policy="fail",
                    label=label if label is not None else Path(path).stem, unit=unit)


# ---------------------------------------------------------------------------
# JSON helpers
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def dump_json(obj, path):
    """Deterministic JSON: sorted keys, fixed separators, repr floats."""
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n")


def _series_stats(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {
        "n": int(v.size),
        "mean": float(v.mean()),
        "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
        "min": float(v.min()),
        "max": float(v.max()),
    }


# ---------------------------------------------------------------------------
# stage functions (shared verbatim by the CLI subcommands)
# ---------------------------------------------------------------------------

def stage_ingest(spec: InputSpec, cfg: PipelineConfig) -> TimeSeries:
    ts = load_csv(spec.path, value_column=spec.value_column,
                  time_column=spec.time_column, expected_dt=cfg.expected_dt,
                  gap_policy=cfg.gap_policy, delimiter=cfg.delimiter,
                  label=spec.label, unit=spec.unit)
    if cfg.resample_window is not None and cfg.resample_window != ts.dt:
        ts = resample_mean(ts, cfg.resample_window)
    return ts


def stage_distfit(ts: TimeSeries, cfg: PipelineConfig, out: Path) -> dict:
    ranked = rank_distributions(ts, n_bins=cfg.distfit_bins, zero_shift=cfg.zero_shift)
    report = rank_report(ranked)
    dump_json(report, out / "distfit.json")
    return report


def stage_psd(ts: TimeSeries, cfg: PipelineConfig, out: Path) -> dict:
    psd = lpsd(ts, n_freqs=cfg.n_freqs, f_min=cfg.f_min, f_max=cfg.f_max,
               window_kind=cfg.window_kind)
    fit = fit_spectral_exponent(psd, cfg.fit_lo, cfg.fit_hi)
    write_psd_csv(psd, out / "psd.csv")
    sidecar = {
        "config": {
            "n_freqs": cfg.n_freqs,
            "f_min": cfg.f_min,
            "f_max": cfg.f_max,
            "window_kind": cfg.window_kind,
        },
        "n_freqs_evaluated": psd.n_freqs,
        "fit": fit.to_dict(),
    }
    dump_json(sidecar, out / "psd.json")
    return sidecar


def stage_ssa(ts: TimeSeries, cfg: PipelineConfig, out: Path):
    dec = decompose(ts, SsaConfig(M=cfg.ssa_m, c=cfg.ssa_c))
    split = split_trend(dec, cfg.trend_components, ts)
    write_eigenvalue_csv(dec, out / "eigvals.csv")
    write_timeseries_csv(split.trend, out / "trend.csv")
    write_timeseries_csv(split.residual, out / "residual.csv")
    summary = {
        "M": dec.M,
        "n_clamped_eigenvalues": dec.n_clamped,
        "trend_components": list(split.selected),
        "variance_fractions_head": [float(v) for v in dec.variance_fractions[:10]],
        "trend_stats": _series_stats(split.trend.values),
        "residual_stats": _series_stats(split.residual.values),
    }
    return dec, split, summary


def stage_dfa(series_values, dt, cfg: PipelineConfig, out_csv: Path) -> dict:
    grid = default_box_grid(len(series_values), dt, t_min=cfg.dfa_t_min,
                            points_per_decade=cfg.points_per_decade)
    fluct = dfa(series_values, order=cfg.dfa_order, box_sizes=grid, dt=dt)
    write_fluctuation_csv(fluct, out_csv)
    return {
        "order": cfg.dfa_order,
        "low": scaling_exponent(fluct, *cfg.low_window).to_dict(),
        "high": scaling_exponent(fluct, *cfg.high_window).to_dict(),
    }


def stage_surrogate(inc, cfg: PipelineConfig, out: Path) -> dict:
    sur_cfg = SurrogateConfig(count=cfg.surrogate_count, seed=cfg.surrogate_seed,
                              max_iterations=cfg.surrogate_max_iterations,
                              spectrum_tolerance=cfg.surrogate_tolerance)
    report = ensemble_test(inc, sur_cfg, dfa_window=cfg.high_window,
                           order=cfg.dfa_order, points_per_decade=cfg.points_per_decade,
                           t_min=cfg.dfa_t_min)
    dump_json(report.to_dict(), out / "surrogate.json")
    write_surrogate_csv(report, out / "surrogate.csv")
    return report.to_dict()


# ---------------------------------------------------------------------------
# the pipeline
# ---------------------------------------------------------------------------

class _Manifest:
    def __init__(self, path: Path):
        self.path = path
        self.lines = []

    def record(self, label, stage, status):
        self.lines.append(f"{label} {stage} {status}")
        self.path.write_text("\n".join(self.lines) + "\n")


def run_pipeline(cfg: PipelineConfig) -> PipelineReport:
    """Run every stage for every input and assemble the report.

    Any stage failure aborts with a StageError naming the stage, the series
    and the cause; artifacts written so far stay on disk and the MANIFEST
    records how far each series got.
    """
    cfg.validate()
    out_root = Path(cfg.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(out_root / "MANIFEST")

    originals, trends = [], []
    series_reports = {}
    for spec in cfg.inputs:
        label = spec.label
        out = out_root / label
        out.mkdir(parents=True, exist_ok=True)
        entry = {}

        def run(stage, fn, *args):
            try:
                result = fn(*args)
            except Exception as exc:
                manifest.record(label, stage, "failed")
                manifest.record("pipeline", "status", "failed")
                raise StageError(stage, label, exc) from exc
            manifest.record(label, stage, "ok")
            return result

        ts = run("ingest", stage_ingest, spec, cfg)
        entry["ingest"] = {"stats": _series_stats(ts.values),
                           "dt_minutes": ts.dt, "provenance": dict(ts.provenance)}
        entry["distfit"] = run("distfit", stage_distfit, ts, cfg, out)
        entry["spectral"] = run("spectral", stage_psd, ts, cfg, out)
        dec, split, ssa_summary = run("ssa", stage_ssa, ts, cfg, out)
        entry["ssa"] = ssa_summary

        inc = run("increments", increments, split.residual)
        pair = mag_sign(inc)
        entry["dfa"] = {
            "magnitude": run("dfa-magnitude", stage_dfa, pair.magnitude, inc.dt,
                             cfg, out / "fluct_mag.csv"),
            "sign": run("dfa-sign", stage_dfa, pair.sign.astype(float), inc.dt,
                        cfg, out / "fluct_sign.csv"),
        }
        entry["surrogate"] = run("surrogate", stage_surrogate, inc, cfg, out)

        originals.append(ts)
        trends.append(split.trend.with_values(split.trend.values, label=label))
        series_reports[label] = entry

    def cross():
        return {
            "pearson_original": pearson_matrix(originals).to_dict(),
            "pearson_trend": pearson_matrix(trends).to_dict(),
        }

    try:
        cross_series = cross() if len(originals) > 1 else {}
    except Exception as exc:
        manifest.record("pipeline", "pearson", "failed")
        manifest.record("pipeline", "status", "failed")
        raise StageError("pearson", "<cross-series>", exc) from exc
    if len(originals) > 1:
        manifest.record("pipeline", "pearson", "ok")

    report = PipelineReport(
        series=series_reports,
        cross_series=cross_series,
        provenance={
            "tool": "windscale",
            "version": __version__,
            "config": _jsonable(cfg.raw) if cfg.raw else _config_echo(cfg),
            "seeds": {"surrogate": cfg.surrogate_seed},
            "python": f"{sys.version_info.major}.{sys.version_info.minor}",
        },
    )
    doc = report.to_dict()
    validate_report(doc)
    dump_json(doc, out_root / "report.json")
    manifest.record("pipeline", "status", "ok")
    return report


def _config_echo(cfg: PipelineConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d.pop("raw", None)
    d["inputs"] = [dataclasses.asdict(s) for s in cfg.inputs]
    return d


# ---------------------------------------------------------------------------
# report schema
# ---------------------------------------------------------------------------

_EXPONENT = {
    "type": "object",
    "required": ["alpha", "stderr", "window_minutes", "n_points", "label"],
    "properties": {
        "alpha": {"type": "number"},
        "stderr": {"type": "number"},
        "window_minutes": {"type": "array", "items": {"type": "number"}},
        "n_points": {"type": "integer"},
        "label": {"type": "string"},
    },
}

_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "windscale pipeline report",
    "type": "object",
    "required": ["series", "cross_series", "provenance"],
    "properties": {
        "series": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["ingest", "distfit", "spectral", "ssa", "dfa", "surrogate"],
                "properties": {
                    "distfit": {
                        "type": "object",
                        "required": ["best", "fits", "order", "log_base"],
                    },
                    "spectral": {
                        "type": "object",
                        "required": ["fit", "config", "n_freqs_evaluated"],
                    },
                    "ssa": {
                        "type": "object",
                        "required": ["M", "variance_fractions_head",
                                     "trend_stats", "residual_stats"],
                    },
                    "dfa": {
                        "type": "object",
                        "required": ["magnitude", "sign"],
                        "properties": {
                            "magnitude": {
                                "type": "object",
                                "required": ["low", "high"],
                                "properties": {"low": _EXPONENT, "high": _EXPONENT},
                            },
                            "sign": {
                                "type": "object",
                                "required": ["low", "high"],
                                "properties": {"low": _EXPONENT, "high": _EXPONENT},
                            },
                        },
                    },
                    "surrogate": {
                        "type": "object",
                        "required": ["alpha_mag_mean", "alpha_mag_std",
                                     "alpha_sign_mean", "alpha_sign_std",
                                     "alpha_mag_orig", "alpha_sign_orig", "count"],
                    },
                },
            },
        },
        "cross_series": {"type": "object"},
        "provenance": {
            "type": "object",
            "required": ["tool", "version", "config", "seeds"],
        },
    },
}


def report_schema() -> dict:
    """The published JSON schema every pipeline report validates against."""
    return json.loads(json.dumps(_REPORT_SCHEMA))


def validate_report(doc: dict):
    jsonschema.validate(doc, _REPORT_SCHEMA)
