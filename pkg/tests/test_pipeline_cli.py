"""Batch pipeline and command-line interface: orchestration, artifacts,
determinism, stage isolation and exit codes."""

import json

import numpy as np
import pytest

from windscale import GeneratorSpec, generate
from windscale.cli import main
from windscale.errors import ConfigError
from windscale.pipeline import load_config, report_schema, run_pipeline, validate_report
from windscale.series import write_timeseries_csv

from helpers import write_csv


def _white_csv(tmp_path, n=16384, seed=21, offset=8.0, name="w.csv"):
    ts = generate(GeneratorSpec(kind="white", n=n, seed=seed))
    ts = ts.with_values(ts.values + offset, label="W1")
    path = tmp_path / name
    write_timeseries_csv(ts, path)
    return path


def _base_config(tmp_path, csv_path, out="out", count=5, low="[10.0, 40.0]",
                 high="[60.0, 900.0]"):
    text = f"""
output_dir = "{tmp_path / out}"

[[inputs]]
path = "{csv_path}"
value_column = "value"
label = "W1"

[ingest]
expected_dt = 1.0

[dfa]
low_window = {low}
high_window = {high}

[surrogate]
count = {count}
seed = 3
"""
    cfg_path = tmp_path / f"cfg-{out}.toml"
    cfg_path.write_text(text)
    return cfg_path


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_missing_config_is_a_config_error(tmp_path, capsys):
    rc = main(["pipeline", "--config", str(tmp_path / "nope.toml")])
    assert rc == 2
    assert not (tmp_path / "out").exists()
    assert "not found" in capsys.readouterr().err


def test_overlapping_windows_rejected_before_any_stage(tmp_path):
    csv_path = _white_csv(tmp_path)
    cfg_path = _base_config(tmp_path, csv_path, low="[10.0, 70.0]", high="[50.0, 900.0]")
    with pytest.raises(ConfigError, match="non-overlapping"):
        load_config(cfg_path)
    rc = main(["pipeline", "--config", str(cfg_path)])
    assert rc == 2
    assert not (tmp_path / "out").exists()


def test_config_needs_inputs(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('output_dir = "x"\n')
    with pytest.raises(ConfigError, match="at least one input"):
        load_config(cfg)


# ---------------------------------------------------------------------------
# the full pipeline
# ---------------------------------------------------------------------------

def test_pipeline_end_to_end_white_noise(tmp_path):
    csv_path = _white_csv(tmp_path)
    cfg = load_config(_base_config(tmp_path, csv_path))
    report = run_pipeline(cfg)

    out = tmp_path / "out"
    expected = {"psd.csv", "psd.json", "distfit.json", "eigvals.csv", "trend.csv",
                "residual.csv", "fluct_mag.csv", "fluct_sign.csv",
                "surrogate.json", "surrogate.csv"}
    assert {p.name for p in (out / "W1").iterdir()} == expected
    manifest = (out / "MANIFEST").read_text()
    assert "W1 surrogate ok" in manifest
    assert "pipeline status ok" in manifest

    validate_report(report.to_dict())
    entry = report.series["W1"]
    assert abs(entry["spectral"]["fit"]["beta"]) < 0.15
    # magnitude scaling of differenced white noise stays near one half; the
    # sign series is antipersistent at short timescales (lag-one
    # anticorrelation of the increments) and drifts to one half beyond
    assert 0.45 < entry["dfa"]["magnitude"]["low"]["alpha"] < 0.62
    assert 0.40 < entry["dfa"]["magnitude"]["high"]["alpha"] < 0.60
    assert 0.28 < entry["dfa"]["sign"]["low"]["alpha"] < 0.50
    assert 0.35 < entry["dfa"]["sign"]["high"]["alpha"] < 0.55
    sur = entry["surrogate"]
    assert abs(sur["alpha_sign_orig"] - sur["alpha_sign_mean"]) < 2 * (
        sur["alpha_sign_std"] + sur["alpha_sign_orig_stderr"])


def test_pipeline_reports_are_byte_identical(tmp_path):
    csv_path = _white_csv(tmp_path, n=8192)
    cfg_a = _base_config(tmp_path, csv_path, out="out-a", count=3, high="[60.0, 800.0]")
    cfg_b = _base_config(tmp_path, csv_path, out="out-b", count=3, high="[60.0, 800.0]")
    run_pipeline(load_config(cfg_a))
    run_pipeline(load_config(cfg_b))
    a = (tmp_path / "out-a" / "report.json").read_bytes()
    b = (tmp_path / "out-b" / "report.json").read_bytes()
    # reports differ only in their echoed output paths
    a = a.replace(b"out-a", b"out-x")
    b = b.replace(b"out-b", b"out-x")
    assert a == b
    for name in ("W1/psd.csv", "W1/eigvals.csv", "W1/fluct_mag.csv", "W1/surrogate.json"):
        assert (tmp_path / "out-a" / name).read_bytes() == \
            (tmp_path / "out-b" / name).read_bytes()


def test_pipeline_ingestion_failure_exit_code(tmp_path):
    bad = tmp_path / "gap.csv"
    write_csv(bad, [0, 60, 180], [1.0, 2.0, 3.0])
    cfg_path = _base_config(tmp_path, bad)
    rc = main(["pipeline", "--config", str(cfg_path)])
    assert rc == 3
    manifest = (tmp_path / "out" / "MANIFEST").read_text()
    assert "W1 ingest failed" in manifest
    assert "pipeline status failed" in manifest


def test_pipeline_numerical_failure_exit_code(tmp_path):
    flat = tmp_path / "flat.csv"
    write_csv(flat, [60 * k for k in range(64)], [5.0] * 64)
    cfg_path = _base_config(tmp_path, flat)
    rc = main(["pipeline", "--config", str(cfg_path)])
    assert rc == 4
    manifest = (tmp_path / "out" / "MANIFEST").read_text()
    assert "W1 distfit failed" in manifest


def test_report_schema_is_published_and_strict():
    schema = report_schema()
    assert schema["required"] == ["series", "cross_series", "provenance"]
    with pytest.raises(Exception):
        validate_report({"series": {}})


# ---------------------------------------------------------------------------
# CLI subcommands
# ---------------------------------------------------------------------------

def test_gen_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["gen", "--kind", "powerlaw", "--beta", "1.5", "--n", "4096", "--seed", "7"]
    assert main(args + ["--output", str(a)]) == 0
    assert main(args + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_requires_output(tmp_path, capsys):
    rc = main(["gen", "--kind", "white", "--n", "64", "--seed", "1"])
    assert rc == 2


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--kind", "nonsense", "--n", "64", "--output", "x.csv"])
    assert exc.value.code == 2


def test_ingest_normalizes_and_reports_drops(tmp_path, capsys):
    raw = tmp_path / "raw.csv"
    write_csv(raw, [0, 60, 180, 240, 300], [1.0, 2.0, 3.0, 4.0, 5.0],
              header=("stamp", "speed"))
    out = tmp_path / "norm.csv"
    rc = main(["ingest", "--input", str(raw), "--value-column", "speed",
               "--time-column", "stamp", "--expected-dt", "1",
               "--gap-policy", "drop-to-longest-contiguous", "--output", str(out)])
    assert rc == 0
    assert "dropped 2 of 5" in capsys.readouterr().err
    assert out.read_text().splitlines()[0] == "time,value"


def test_ingest_gap_exit_code(tmp_path):
    raw = tmp_path / "raw.csv"
    write_csv(raw, [0, 60, 180], [1.0, 2.0, 3.0])
    rc = main(["ingest", "--input", str(raw), "--value-column", "value",
               "--time-column", "time", "--expected-dt", "1",
               "--output", str(tmp_path / "n.csv")])
    assert rc == 3


def test_cli_dfa_psd_cross_consistency(tmp_path):
    # generate one beta=1.5 series, then the DFA and PSD subcommands must
    # agree through alpha = (beta + 1) / 2
    csv_path = tmp_path / "p.csv"
    assert main(["gen", "--kind", "powerlaw", "--beta", "1.5", "--n", str(2 ** 17),
                 "--seed", "3", "--output", str(csv_path)]) == 0
    assert main(["dfa", "--input", str(csv_path), "--low", "10,70",
                 "--high", "300,9070", "--output", str(tmp_path / "fluct.csv"),
                 "--report", str(tmp_path / "dfa.json")]) == 0
    assert main(["psd", "--input", str(csv_path), "--fit-lo", "1e-4",
                 "--fit-hi", "1e-2", "--output", str(tmp_path / "psd.csv")]) == 0
    alpha = json.loads((tmp_path / "dfa.json").read_text())["high"]["alpha"]
    beta = json.loads((tmp_path / "psd.csv").with_name("psd.json").read_text())["fit"]["beta"]
    assert abs(alpha - (beta + 1.0) / 2.0) < 0.1


def test_magsign_reconstruction_from_files(tmp_path):
    csv_path = _white_csv(tmp_path, n=512)
    rc = main(["magsign", "--input", str(csv_path), "--output", str(tmp_path / "ms")])
    assert rc == 0
    mag = np.loadtxt(tmp_path / "ms" / "mag.csv", delimiter=",", skiprows=1)[:, 1]
    sign = np.loadtxt(tmp_path / "ms" / "sign.csv", delimiter=",", skiprows=1)[:, 1]
    orig = np.loadtxt(csv_path, delimiter=",", skiprows=1)[:, 1]
    assert np.array_equal(mag * sign, np.diff(orig))


def test_stage_isolation_pipeline_equals_chained_subcommands(tmp_path):
    csv_path = _white_csv(tmp_path, n=8192)
    cfg_path = _base_config(tmp_path, csv_path, out="pipe", count=3, high="[60.0, 800.0]")
    assert main(["pipeline", "--config", str(cfg_path)]) == 0
    pipe = tmp_path / "pipe" / "W1"

    chain = tmp_path / "chain"
    chain.mkdir()
    norm = chain / "norm.csv"
    assert main(["ingest", "--input", str(csv_path), "--value-column", "value",
                 "--time-column", "time", "--expected-dt", "1",
                 "--output", str(norm)]) == 0
    assert main(["distfit", "--input", str(norm),
                 "--output", str(chain / "distfit.json")]) == 0
    assert main(["psd", "--input", str(norm), "--output", str(chain / "psd.csv")]) == 0
    assert main(["ssa", "--input", str(norm), "--output", str(chain)]) == 0
    assert main(["magsign", "--input", str(chain / "residual.csv"),
                 "--output", str(chain)]) == 0
    assert main(["dfa", "--input", str(chain / "mag.csv"), "--low", "10,40",
                 "--high", "60,800", "--output", str(chain / "fluct_mag.csv")]) == 0
    assert main(["dfa", "--input", str(chain / "sign.csv"), "--low", "10,40",
                 "--high", "60,800", "--output", str(chain / "fluct_sign.csv")]) == 0
    assert main(["surrogate", "--input", str(chain / "residual.csv"), "--count", "3",
                 "--seed", "3", "--window", "60,800",
                 "--output", str(chain / "surrogate.json")]) == 0

    for name in ("distfit.json", "psd.csv", "psd.json", "eigvals.csv", "trend.csv",
                 "residual.csv", "fluct_mag.csv", "fluct_sign.csv",
                 "surrogate.json", "surrogate.csv"):
        assert (pipe / name).read_bytes() == (chain / name).read_bytes(), name


def test_pipeline_cross_series_matrices(tmp_path):
    paths = []
    for i in range(2):
        ts = generate(GeneratorSpec(kind="white", n=4096, seed=30 + i))
        ts = ts.with_values(ts.values + 8.0, label=f"S{i}")
        p = tmp_path / f"s{i}.csv"
        write_timeseries_csv(ts, p)
        paths.append(p)
    text = f"""
output_dir = "{tmp_path / 'out'}"
[[inputs]]
path = "{paths[0]}"
value_column = "value"
label = "S0"
[[inputs]]
path = "{paths[1]}"
value_column = "value"
label = "S1"
[ingest]
expected_dt = 1.0
[dfa]
low_window = [10.0, 40.0]
high_window = [60.0, 400.0]
[surrogate]
count = 2
seed = 1
"""
    cfg_path = tmp_path / "cfg.toml"
    cfg_path.write_text(text)
    report = run_pipeline(load_config(cfg_path))
    ro = np.array(report.cross_series["pearson_original"]["r"])
    assert ro.shape == (2, 2)
    assert np.array_equal(ro, ro.T)
    assert np.array_equal(np.diag(ro), [1.0, 1.0])
    assert report.cross_series["pearson_trend"]["labels"] == ["S0", "S1"]
