import json
import math

import numpy as np
import pytest

from perchazard import io
from perchazard.analysis import HazardCurve
from perchazard.cli import main
from perchazard.config import RunConfig


def data_rows(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


def small(tmp_path, *extra):
    # fig4 shrunk to a quick run
    return ["--preset", "fig4", "--steps", "200", "--param", "lattice.L=30", "--out", str(tmp_path), *extra]


def test_preset_list_and_show(capsys):
    assert main(["preset", "list"]) == 0
    out = capsys.readouterr().out
    assert all(n in out for n in ("fig1-left", "fig3", "fig6"))
    assert main(["preset", "show", "fig3"]) == 0
    assert json.loads(capsys.readouterr().out)["lattice"]["L"] == 500


def test_simulate_writes_paths_and_crashes(tmp_path):
    assert main(["simulate", *small(tmp_path, "--replicas", "2", "--emit-svg")]) == 0
    for r in (0, 1):
        mp = io.read_path(tmp_path / f"path_r00{r}.csv")
        assert len(mp) == 201
        mp.validate()
        assert mp.header["config"]["lattice"]["L"] == 30
        ev = io.read_events(tmp_path / f"crashes_r00{r}.csv")
        assert len(ev) == int(mp.crash.sum())
        assert (tmp_path / f"path_r00{r}.svg").read_text().startswith("<svg")


def test_header_echo_reruns_the_experiment(tmp_path):
    assert main(["simulate", *small(tmp_path / "a")]) == 0
    mp = io.read_path(tmp_path / "a" / "path_r000.csv")
    cfg_file = tmp_path / "echo.json"
    cfg_file.write_text(json.dumps(mp.header["config"]))
    assert main(["simulate", "--config", str(cfg_file), "--out", str(tmp_path / "b")]) == 0
    assert data_rows(tmp_path / "a" / "path_r000.csv") == data_rows(tmp_path / "b" / "path_r000.csv")


def test_zero_steps_single_row(tmp_path):
    assert main(["simulate", *small(tmp_path), "--steps", "0"]) == 0
    assert len(data_rows(tmp_path / "path_r000.csv")) == 2  # column names + initial state


def test_simulate_is_byte_identical_across_parallelism(tmp_path):
    assert main(["simulate", *small(tmp_path / "s", "--replicas", "3")]) == 0
    assert main(["simulate", *small(tmp_path / "p", "--replicas", "3", "--parallelism", "3")]) == 0
    for r in range(3):
        a = (tmp_path / "s" / f"path_r00{r}.csv").read_bytes()
        b = (tmp_path / "p" / f"path_r00{r}.csv").read_bytes()
        assert a == b


def test_json_format(tmp_path):
    assert main(["simulate", *small(tmp_path), "--format", "json"]) == 0
    assert len(io.read_path(tmp_path / "path_r000.json")) == 201


def test_zero_volatility_overlay(tmp_path):
    args = ["--preset", "fig6", "--steps", "150", "--param", "lattice.L=30", "--out", str(tmp_path)]
    assert main(["simulate", *args]) == 0
    a = io.read_path(tmp_path / "path_r000.csv")
    b = io.read_path(tmp_path / "path_r000_eta0.csv")
    assert np.array_equal(a.p, b.p) and np.array_equal(a.crash, b.crash)
    assert not np.array_equal(a.price, b.price)


def test_hazard_curve_and_fit(tmp_path, capsys):
    out = tmp_path / "curve"
    args = ["hazard-curve", "--preset", "fig1-left", "--param", "lattice.L=40", "--param", "hazard.a=2.0",
            "--replicas", "20", "--param", 'p_grid={"start": 0.40, "stop": 0.58, "step": 0.01}',
            "--out", str(out), "--emit-svg"]
    assert main(args) == 0
    assert (out / "curve.svg").exists()
    curve = io.read_curve(out / "curve.csv")
    assert len(curve) == 19 and curve.replicas.tolist() == [20] * 19
    assert main(["fit", str(out / "curve.csv"), "--window", "0.4", "0.575", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "43/18" in text and "95% CI" in text
    rep = json.loads((out / "fit.json").read_text())
    assert rep["theory_exact"] == "43/18"
    assert rep["theory"] == pytest.approx(43 / 18)
    assert rep["ci95"][0] <= rep["exponent"] <= rep["ci95"][1]


def test_single_point_grid(tmp_path):
    args = ["hazard-curve", "--preset", "fig2", "--param", "p_grid=[0.3]", "--out", str(tmp_path)]
    assert main(args) == 0
    assert len(data_rows(tmp_path / "curve.csv")) == 2


def test_fit_exact_synthetic_curve(tmp_path, capsys):
    p = np.linspace(0.45, 0.57, 20)
    c = HazardCurve(p, 3.0 * (0.5927462 - p) ** -1.75, np.full(20, math.nan), np.ones(20), 10,
                    model={"exponents": [1.5], "d": 2, "p_c": 0.5927462})
    io.write_curve(tmp_path / "c.csv", c)
    assert main(["fit", str(tmp_path / "c.csv"), "--window", "0.45", "0.575", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "fit.json").read_text())
    assert abs(rep["exponent"] - 1.75) < 1e-9
    assert rep["theory_exact"] == "9/8"


def test_fit_window_above_pc(tmp_path, capsys):
    p = np.linspace(0.45, 0.57, 20)
    io.write_curve(tmp_path / "c.csv", HazardCurve(p, 1 / (0.6 - p), np.zeros(20), np.ones(20), 10))
    assert main(["fit", str(tmp_path / "c.csv"), "--window", "0.5", "0.65"]) == 3
    assert "p_c" in capsys.readouterr().err


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path)]) == 2
    assert "seed" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "seed": 1,\n "price": {"kappa": 2.0}\n}')
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "kappa" in err and "(line 3)" in err
    assert main(["simulate", "--preset", "nope", "--out", str(tmp_path)]) == 2


def test_numerical_errors_exit_3(tmp_path, capsys):
    args = small(tmp_path, "--param", "price.eta=200", "--param", "price.noise=\"gaussian\"")
    assert main(["simulate", *args]) == 3
    assert "multiplier" in capsys.readouterr().err


def test_sweep_records_failures_and_continues(tmp_path):
    args = small(tmp_path, "--vary", "hazard.a=1.5,2.0", "--vary", "price.kappa=0.2,3")
    assert main(["sweep", *args]) == 0
    kind, header, cols = io.read_table(tmp_path / "summary.csv")
    assert kind == "sweep-summary"
    assert cols["cell"].tolist() == [0, 1, 2, 3]
    status = header["sweep"]["status"]
    assert status[0] == "ok" and status[1].startswith("failed") and status[2] == "ok"
    assert math.isnan(cols["crashes"][1]) and not math.isnan(cols["crashes"][0])
    assert header["sweep"]["cells"][3] == {"hazard.a": 2.0, "price.kappa": 3}
    assert (tmp_path / "cell_000" / "path_r000.csv").exists()


def test_single_point_sweep_equals_simulate(tmp_path):
    assert main(["sweep", *small(tmp_path / "sw", "--vary", "hazard.a=2.0")]) == 0
    assert main(["simulate", *small(tmp_path / "sim")]) == 0
    assert data_rows(tmp_path / "sw" / "cell_000" / "path_r000.csv") == data_rows(tmp_path / "sim" / "path_r000.csv")


def test_sweep_needs_ranges(tmp_path):
    assert main(["sweep", *small(tmp_path)]) == 2


def test_overrides_apply():
    from perchazard.cli import build_config, make_parser
    args = make_parser().parse_args(["simulate", "--preset", "fig3", "--seed", "99", "--param", "hazard.a=2.5"])
    cfg = build_config(args, "simulate")
    assert isinstance(cfg, RunConfig)
    assert cfg.seed == 99 and cfg.hazard["a"] == 2.5 and cfg.lattice["L"] == 500
