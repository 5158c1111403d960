import json
import math

import pytest

from macgeo.cli import (EXIT_BAD_PARAM, EXIT_IO, EXIT_NUMERIC, EXIT_OK,
                        RunConfig, main, parse_fading, run, sweep)


def invoke(args, tmp_path, monkeypatch, out_name=None):
    monkeypatch.chdir(tmp_path)
    argv = list(args)
    if out_name is not None:
        argv += ["--out", out_name]
    return main(argv)


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


def test_parse_fading():
    assert parse_fading("none") == ("none", 1.0)
    assert parse_fading("exponential") == ("exponential", 1.0)
    assert parse_fading("log-uniform:0.5") == ("log_uniform", 0.5)
    assert parse_fading("log-uniform") == ("log_uniform", 1.0)
    with pytest.raises(ValueError):
        parse_fading("rician")
    with pytest.raises(ValueError):
        parse_fading("log-uniform:-1")


def test_asympt_beta_command(tmp_path, monkeypatch):
    rc = invoke(["asympt-beta", "--alpha", "4"], tmp_path, monkeypatch)
    assert rc == EXIT_OK
    header, rows = read_csv(tmp_path / "asympt_beta.csv")
    assert header == ["pattern", "k1_over_k2", "value"]
    vals = {(r[0], float(r[1])): float(r[2]) for r in rows}
    assert vals[("square", 1.0)] == pytest.approx(0.638232, abs=1e-3)
    assert vals[("triangular", 1.0)] == pytest.approx(0.644845, abs=1e-3)


def test_asympt_alpha_command(tmp_path, monkeypatch):
    rc = invoke(["asympt-alpha"], tmp_path, monkeypatch)
    assert rc == EXIT_OK
    header, rows = read_csv(tmp_path / "asympt_alpha.csv")
    assert header == ["pattern", "k1_over_k2", "value"]
    vals = {r[0]: float(r[2]) for r in rows if r[0] != "rectangular"}
    assert vals["square"] == pytest.approx(1 / math.sqrt(2), abs=1e-6)


def test_optimize_json_reproducible(tmp_path, monkeypatch):
    args = ["optimize", "--beta", "10", "--alpha", "4", "--format", "json"]
    assert invoke(args, tmp_path, monkeypatch, "a.json") == EXIT_OK
    assert invoke(args, tmp_path, monkeypatch, "b.json") == EXIT_OK
    a = (tmp_path / "a.json").read_bytes()
    assert a == (tmp_path / "b.json").read_bytes()
    rep = json.loads(a)
    assert set(rep) == {"beta", "alpha", "fading", "r1", "p_at_opt", "rp",
                        "inv_rp"}
    assert rep["r1"] == pytest.approx(0.1905, abs=1e-3)


def test_grid_range_command(tmp_path, monkeypatch):
    rc = invoke(["grid-range", "--pattern", "triangular", "--d", "1",
                 "--extent", "60", "--beta", "10", "--alpha", "4"],
                tmp_path, monkeypatch)
    assert rc == EXIT_OK
    header, rows = read_csv(tmp_path / "grid_range.csv")
    assert header == ["pattern", "k1_over_k2", "beta", "alpha", "r_lambda",
                      "r1", "method"]
    assert rows[0][6] == "trace"
    assert float(rows[0][5]) == pytest.approx(0.334, abs=5e-3)


def test_grid_range_low_beta_traces_outer_boundary(tmp_path, monkeypatch):
    rc = invoke(["grid-range", "--pattern", "square", "--d", "1",
                 "--extent", "40", "--beta", "0.05", "--alpha", "4"],
                tmp_path, monkeypatch)
    assert rc == EXIT_OK
    _, rows = read_csv(tmp_path / "grid_range.csv")
    assert rows[0][6] == "trace"
    assert float(rows[0][5]) > 0.8  # reception reaches past the first ring


def test_grid_range_membership_fallback(tmp_path, monkeypatch):
    # beta so small that the SIR never drops below it inside the window:
    # the tracer reports an unbounded region and the raster takes over.
    rc = invoke(["grid-range", "--pattern", "square", "--d", "1",
                 "--extent", "40", "--beta", "1e-5", "--alpha", "4"],
                tmp_path, monkeypatch)
    assert rc == EXIT_OK
    _, rows = read_csv(tmp_path / "grid_range.csv")
    assert rows[0][6] == "membership"
    assert float(rows[0][5]) > 5.0  # far past the beta >= 1 ranges


def test_sweep_beta_monotone(tmp_path, monkeypatch):
    rc = invoke(["grid-range", "--pattern", "triangular", "--d", "1",
                 "--extent", "60", "--alpha", "4",
                 "--sweep", "beta", "--values", "2,5,10,20,50"],
                tmp_path, monkeypatch)
    assert rc == EXIT_OK
    _, rows = read_csv(tmp_path / "grid_range.csv")
    r1 = [float(r[5]) for r in rows]
    assert len(r1) == 5
    assert all(b < a for a, b in zip(r1, r1[1:]))


def test_sweep_alpha_optimize_increasing(tmp_path, monkeypatch):
    rc = invoke(["optimize", "--beta", "10",
                 "--sweep", "alpha", "--values", "3,4,5,6"],
                tmp_path, monkeypatch, "opt.csv")
    assert rc == EXIT_OK
    _, rows = read_csv(tmp_path / "opt.csv")
    r1 = [float(r[3]) for r in rows]
    assert all(b > a for a, b in zip(r1, r1[1:]))


def test_sweep_empty_noop(tmp_path, monkeypatch):
    rc = invoke(["grid-range", "--sweep", "beta", "--values", ""],
                tmp_path, monkeypatch)
    assert rc == EXIT_OK
    assert not (tmp_path / "grid_range.csv").exists()


def test_sweep_rejects_unknown_axis(tmp_path, monkeypatch):
    rc = invoke(["grid-range", "--sweep", "pattern", "--values", "1,2"],
                tmp_path, monkeypatch)
    assert rc == EXIT_BAD_PARAM


def test_compare_normalization(tmp_path, monkeypatch):
    rc = invoke(["compare", "--beta", "10", "--alpha", "4", "--d", "1",
                 "--extent", "60"], tmp_path, monkeypatch)
    assert rc == EXIT_OK
    header, rows = read_csv(tmp_path / "compare.csv")
    assert header == ["scheme", "r1", "inv_rp", "inv_rp_normalized"]
    table = {r[0]: [float(x) for x in r[1:]] for r in rows}
    assert table["triangular"][2] == 1.0
    assert table["aloha"][2] > 2.0  # several times the triangular cost
    assert set(table) == {"triangular", "square", "rectangular(1:2)",
                          "hexagonal", "aloha"}


def test_aloha_curve(tmp_path, monkeypatch):
    rc = invoke(["aloha-curve", "--beta", "1", "--alpha", "4",
                 "--fading", "log-uniform:1", "--rmin", "0.05",
                 "--rmax", "0.8", "--n", "12"], tmp_path, monkeypatch)
    assert rc == EXIT_OK
    header, rows = read_csv(tmp_path / "aloha_curve.csv")
    assert header == ["r", "p", "rp", "method"]
    methods = {r[3] for r in rows}
    assert methods == {"none", "log-uniform:1"}
    assert len(rows) == 24


def test_trace_command(tmp_path, monkeypatch):
    rc = invoke(["trace", "--pattern", "square", "--d", "1", "--extent",
                 "40", "--beta", "10", "--alpha", "4"],
                tmp_path, monkeypatch)
    assert rc == EXIT_OK
    header, rows = read_csv(tmp_path / "trace.csv")
    assert header == ["x", "y"] and len(rows) > 100
    summary = json.loads((tmp_path / "trace.csv.summary.json").read_text())
    assert summary["closed"] is True
    assert summary["r1"] == pytest.approx(0.3336, abs=2e-3)


def test_fading_curve_command(tmp_path, monkeypatch):
    rc = invoke(["fading-curve", "--pattern", "square", "--d", "1",
                 "--extent", "40", "--beta", "1", "--alpha", "4",
                 "--n", "25"], tmp_path, monkeypatch)
    assert rc == EXIT_OK
    header, rows = read_csv(tmp_path / "fading_curve.csv")
    assert header == ["r", "p_nofading", "p_fading"]
    p0 = [float(r[1]) for r in rows]
    p1 = [float(r[2]) for r in rows]
    assert set(p0) <= {0.0, 1.0}          # Heaviside column
    assert all(0.0 < p < 1.0 for p in p1)  # fading column strictly between
    assert p1[0] > 0.9 and p1[-1] < 0.2


def test_field_command(tmp_path, monkeypatch):
    rc = invoke(["field", "--pattern", "poisson", "--lam", "1",
                 "--extent", "10", "--alpha", "2.5", "--n", "16",
                 "--seed", "9"], tmp_path, monkeypatch)
    assert rc == EXIT_OK
    header, rows = read_csv(tmp_path / "field.csv")
    assert header == ["x", "y", "value"]
    assert len(rows) == 256


def test_simulate_command(tmp_path, monkeypatch):
    rc = invoke(["simulate", "--pattern", "square", "--d", "1", "--nu",
                 "100", "--extent", "6", "--beta", "1", "--alpha", "4",
                 "--slots", "2500", "--packets", "2", "--distance", "1.5",
                 "--seed", "71"], tmp_path, monkeypatch)
    assert rc == EXIT_OK
    header, _ = read_csv(tmp_path / "simulate.csv")
    assert header[:3] == ["packet_id", "slot", "hop"]
    summary = json.loads((tmp_path / "simulate.csv.summary.json").read_text())
    assert summary["delivery_fraction"] == 1.0


def test_config_file_with_flag_override(tmp_path, monkeypatch):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(
        {"params": {"alpha": 4.0, "beta": 3.0}, "out": "from_file.json",
         "format": "json"}))
    rc = invoke(["optimize", "--config", str(cfg_path), "--beta", "10"],
                tmp_path, monkeypatch)
    assert rc == EXIT_OK
    rep = json.loads((tmp_path / "from_file.json").read_text())
    assert rep["beta"] == 10.0  # flag wins
    assert rep["alpha"] == 4.0  # file value survives


def test_outdir_env(tmp_path, monkeypatch):
    outdir = tmp_path / "results"
    outdir.mkdir()
    monkeypatch.setenv("MACGEO_OUTDIR", str(outdir))
    rc = invoke(["asympt-alpha"], tmp_path, monkeypatch)
    assert rc == EXIT_OK
    assert (outdir / "asympt_alpha.csv").exists()


def test_exit_codes(tmp_path, monkeypatch):
    assert invoke(["grid-range", "--pattern", "dodecagonal"],
                  tmp_path, monkeypatch) == EXIT_BAD_PARAM
    assert invoke(["optimize", "--beta", "-3"], tmp_path,
                  monkeypatch) == EXIT_BAD_PARAM
    assert invoke(["asympt-alpha"], tmp_path, monkeypatch,
                  "/nonexistent-dir/x.csv") == EXIT_IO
    assert invoke(["asympt-beta", "--alpha", "2"], tmp_path,
                  monkeypatch) == EXIT_NUMERIC
    with pytest.raises(SystemExit) as err:
        main(["no-such-command"])
    assert err.value.code == 2


def test_run_config_api(tmp_path):
    cfg = RunConfig("asympt-alpha", {}, 0, str(tmp_path / "t.csv"), "csv")
    line = run(cfg)
    assert "asympt-alpha" in line
    with pytest.raises(ValueError):
        run(RunConfig("bogus", {}, 0, str(tmp_path / "x"), "csv"))
    with pytest.raises(ValueError):
        sweep(RunConfig("trace", {}, 0, str(tmp_path / "y"), "csv"),
              "beta", [1.0])
