"""Command-line interface: one subcommand per analysis stage plus the batch
pipeline.  Exit codes: 0 success, 2 configuration/usage, 3 ingestion,
4 numerical stage failure, 5 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, IngestionError, NumericalError, StageError, WindscaleError
from .pipeline import (
    InputSpec,
    PipelineConfig,
    dump_json,
    load_config,
    read_series_csv,
    run_pipeline,
    stage_dfa,
    stage_distfit,
    stage_psd,
    stage_ssa,
    stage_surrogate,
)
from .series import increments, load_csv, mag_sign, write_timeseries_csv
from .synth import GeneratorSpec, generate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INGESTION = 3
EXIT_NUMERICAL = 4
EXIT_INTERNAL = 5


def _window(text):
    lo, hi = (float(v) for v in text.split(","))
    return (lo, hi)


def _stage_config(args, **overrides) -> PipelineConfig:
    """Config for a single-stage subcommand: the --config file (if given)
    supplies defaults, explicit flags override them."""
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = PipelineConfig(inputs=(InputSpec(path="-", value_column="value", label="-"),),
                             output_dir=".")
    cleaned = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(cfg, **cleaned) if cleaned else cfg


def _add_common(parser, seed=False):
    parser.add_argument("--config", help="TOML file supplying stage defaults")
    parser.add_argument("--output", required=False, help="output file or directory")
    if seed:
        parser.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="windscale",
                                  description="Scaling analysis of nonstationary time series")
    top.add_argument("--version", action="version", version=f"windscale {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic series as CSV")
    p.add_argument("--kind", required=True,
                   choices=["white", "powerlaw", "integrated-white", "cascade", "tone", "ramp"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dt", type=float, default=1.0, help="minutes per sample")
    p.add_argument("--beta", type=float)
    p.add_argument("--period", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--slope", type=float)
    p.add_argument("--depth", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--offset", type=float, default=0.0,
                   help="constant added to the generated values")
    p.add_argument("--label", default=None)
    _add_common(p, seed=True)

    p = sub.add_parser("ingest", help="normalize a CSV to the two-column format")
    p.add_argument("--input", required=True)
    p.add_argument("--value-column", required=True)
    p.add_argument("--time-column", default="time")
    p.add_argument("--expected-dt", type=float, required=True, help="minutes")
    p.add_argument("--gap-policy", default="fail",
                   choices=["fail", "drop-to-longest-contiguous"])
    p.add_argument("--delimiter", default=",")
    p.add_argument("--label", default=None)
    _add_common(p)

    p = sub.add_parser("psd", help="log-frequency PSD and power-law fit")
    p.add_argument("--input", required=True, help="normalized two-column CSV")
    p.add_argument("--n-freqs", type=int, default=None)
    p.add_argument("--f-min", type=float, default=None)
    p.add_argument("--f-max", type=float, default=None)
    p.add_argument("--window-kind", default=None, choices=["hann", "rect"])
    p.add_argument("--fit-lo", type=float, default=None)
    p.add_argument("--fit-hi", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("distfit", help="fit and rank Weibull/Gamma/GEV")
    p.add_argument("--input", required=True)
    p.add_argument("--n-bins", default=None)
    p.add_argument("--zero-shift", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("ssa", help="decompose, write eigenvalues, trend and residual")
    p.add_argument("--input", required=True)
    p.add_argument("--m", type=int, default=None, help="window length (default: rule)")
    p.add_argument("--c", type=float, default=None, help="window-rule exponent")
    p.add_argument("--components", default=None,
                   help="comma-separated trend components, 1-based (default 1)")
    _add_common(p)

    p = sub.add_parser("dfa", help="fluctuation function and scaling exponents")
    p.add_argument("--input", required=True)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--t-min", type=float, default=None)
    p.add_argument("--points-per-decade", type=int, default=None)
    p.add_argument("--low", type=_window, default=None, metavar="LO,HI")
    p.add_argument("--high", type=_window, default=None, metavar="LO,HI")
    p.add_argument("--report", default=None, help="where to write the exponent JSON")
    _add_common(p)

    p = sub.add_parser("magsign", help="increment magnitude and sign series")
    p.add_argument("--input", required=True)
    _add_common(p)

    p = sub.add_parser("surrogate", help="ensemble scaling comparison")
    p.add_argument("--input", required=True, help="series CSV; increments are taken internally")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--spectrum-tolerance", type=float, default=None)
    p.add_argument("--window", type=_window, default=None, metavar="LO,HI")
    p.add_argument("--order", type=int, default=None)
    _add_common(p, seed=True)

    p = sub.add_parser("pipeline", help="run every stage for every configured input")
    p.add_argument("--config", required=True)
    p.add_argument("--output", default=None, help="override the configured output_dir")
    p.add_argument("--seed", type=int, default=None, help="override the surrogate seed")

    return top


def _require_output(args):
    if not args.output:
        raise ConfigError("--output is required for this subcommand")
    return Path(args.output)


def _cmd_gen(args):
    params = {}
    for key in ("beta", "period", "amplitude", "slope", "depth", "sigma"):
        value = getattr(args, key)
        if value is not None:
            params[key] = value
    spec = GeneratorSpec(kind=args.kind, n=args.n, seed=args.seed or 0,
                         params=params, dt=args.dt)
    ts = generate(spec)
    if args.offset:
        ts = ts.with_values(ts.values + args.offset)
    if args.label:
        ts = ts.with_values(ts.values, label=args.label)
    write_timeseries_csv(ts, _require_output(args))


def _cmd_ingest(args):
    ts = load_csv(args.input, value_column=args.value_column,
                  time_column=args.time_column, expected_dt=args.expected_dt,
                  gap_policy=args.gap_policy, delimiter=args.delimiter,
                  label=args.label)
    write_timeseries_csv(ts, _require_output(args))
    if ts.provenance.get("rows_dropped"):
        print(f"dropped {ts.provenance['rows_dropped']} of "
              f"{ts.provenance['rows_read']} rows outside the longest contiguous run",
              file=sys.stderr)


def _cmd_psd(args):
    cfg = _stage_config(args, n_freqs=args.n_freqs, f_min=args.f_min, f_max=args.f_max,
                        window_kind=args.window_kind, fit_lo=args.fit_lo,
                        fit_hi=args.fit_hi)
    ts = read_series_csv(args.input)
    out_csv = _require_output(args)
    stage_psd(ts, cfg, _as_stage_dir(out_csv, "psd.csv"))


def _as_stage_dir(path: Path, expected_name):
    """Stage functions write fixed names into a directory; when the user gives
    a file path with the matching name, use its parent."""
    path = Path(path)
    if path.suffix:
        if path.name != expected_name:
            raise ConfigError(
                f"this stage writes {expected_name}; pass that filename or a directory")
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.parent
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_distfit(args):
    bins = args.n_bins
    if bins is not None and bins != "auto":
        bins = int(bins)
    cfg = _stage_config(args, distfit_bins=bins, zero_shift=args.zero_shift)
    ts = read_series_csv(args.input)
    out = _require_output(args)
    stage_distfit(ts, cfg, _as_stage_dir(out, "distfit.json"))


def _cmd_ssa(args):
    components = None
    if args.components:
        components = tuple(int(k) for k in args.components.split(","))
    cfg = _stage_config(args, ssa_m=args.m, ssa_c=args.c,
                        trend_components=components)
    ts = read_series_csv(args.input)
    out = Path(_require_output(args))
    out.mkdir(parents=True, exist_ok=True)
    stage_ssa(ts, cfg, out)


def _cmd_dfa(args):
    cfg = _stage_config(args, dfa_order=args.order, dfa_t_min=args.t_min,
                        points_per_decade=args.points_per_decade,
                        low_window=args.low, high_window=args.high)
    ts = read_series_csv(args.input)
    out_csv = Path(_require_output(args))
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    result = stage_dfa(ts.values, ts.dt, cfg, out_csv)
    if args.report:
        dump_json(result, args.report)


def _cmd_magsign(args):
    ts = read_series_csv(args.input)
    pair = mag_sign(increments(ts))
    out = Path(_require_output(args))
    out.mkdir(parents=True, exist_ok=True)
    base = ts.with_values(pair.magnitude, t0=ts.t0 + ts.dt * 60.0,
                          label=f"{ts.label}-mag")
    write_timeseries_csv(base, out / "mag.csv")
    write_timeseries_csv(base.with_values(pair.sign.astype(float),
                                          label=f"{ts.label}-sign"), out / "sign.csv")


def _cmd_surrogate(args):
    cfg = _stage_config(args, surrogate_count=args.count,
                        surrogate_seed=args.seed,
                        surrogate_max_iterations=args.max_iterations,
                        surrogate_tolerance=args.spectrum_tolerance,
                        high_window=args.window,
                        dfa_order=args.order)
    ts = read_series_csv(args.input)
    out = _require_output(args)
    stage_surrogate(increments(ts), cfg, _as_stage_dir(out, "surrogate.json"))


def _cmd_pipeline(args):
    cfg = load_config(args.config)
    if args.output is not None:
        cfg = dataclasses.replace(cfg, output_dir=args.output)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, surrogate_seed=args.seed)
    run_pipeline(cfg)
    print(f"pipeline complete: {Path(cfg.output_dir) / 'report.json'}")


_COMMANDS = {
    "gen": _cmd_gen,
    "ingest": _cmd_ingest,
    "psd": _cmd_psd,
    "distfit": _cmd_distfit,
    "ssa": _cmd_ssa,
    "dfa": _cmd_dfa,
    "magsign": _cmd_magsign,
    "surrogate": _cmd_surrogate,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IngestionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGESTION
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, IngestionError):
            return EXIT_INGESTION
        if isinstance(exc.cause, ConfigError):
            return EXIT_CONFIG
        return EXIT_NUMERICAL
    except (NumericalError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except WindscaleError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
