import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scatterlab import checkpoint as ckpt
from scatterlab import cli, runner
from scatterlab import estimates as est
from scatterlab.config import ConfigError, load_config, parse_config
from scatterlab.diagnostics import DiagnosticsRecord
from scatterlab.profiles import gaussian
from scatterlab.propagator import EquationSpec
from scatterlab.spectral import Grid

SMALL = """
experiment = "simulate"

[equation]
kind = "{kind}"
{param}

[grid]
n = 32
L = 16.0

[solver]
dt = 0.01
horizon = 0.1
record_every = 2

[profile]
kind = "gaussian"
amplitude = 0.5
width = 1.0
"""


def small(kind="linear", param=""):
    return SMALL.format(kind=kind, param=param)


NLS_TEXT = small("nls", "p = 2.5")


# --- config ---------------------------------------------------------------------------


def test_defaults_filled_in():
    cfg = parse_config(small())
    assert cfg.equation.kind == "linear" and cfg.n == 32 and cfg.L == 16.0
    assert cfg.solver.dealias == "auto" and cfg.solver.t_start == 0.0
    assert cfg.output.lr == [4.0, 8.0] and cfg.output.checkpoint_every == 0
    assert cfg.estimates.q == 4.0 and cfg.estimates.r == 8.0
    assert cfg.seed is None


@pytest.mark.parametrize("name", ["simulate_nls", "simulate_hartree", "verify_nls", "verify_hartree", "wave_nls", "wave_hartree", "wave_linear", "wave_nls_large", "decay_nls", "decay_hartree"])
def test_pinned_configs_parse_and_echo_round_trip(name):
    cfg = load_config(f"pinned:{name}")
    again = parse_config(cfg.to_toml())
    assert again.to_dict() == cfg.to_dict()


def test_unknown_pinned_config():
    with pytest.raises(ConfigError):
        load_config("pinned:nope")


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.toml")


def test_gamma_out_of_range_rejected_with_line():
    text = small("hartree", "gamma = 2.5")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "equation.gamma"
    assert info.value.line == text.splitlines().index("gamma = 2.5") + 1


def test_nls_exponent_at_one_rejected():
    with pytest.raises(ConfigError):
        parse_config(small("nls", "p = 1.0"))


def test_unknown_key_reports_line():
    text = small() + "\n[output]\nstrict = true\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "output.strict"
    assert info.value.line == len(text.splitlines())
    assert "line" in str(info.value)


def test_unknown_top_level_key():
    with pytest.raises(ConfigError) as info:
        parse_config("colour = 1\n" + small())
    assert info.value.line == 1


@pytest.mark.parametrize("drop, field", [("horizon = 0.1", "solver.horizon"), ("n = 32", "grid.n")])
def test_missing_required_key(drop, field):
    with pytest.raises(ConfigError) as info:
        parse_config(small().replace(drop, ""))
    assert info.value.field == field


def test_missing_parameter_for_equation():
    with pytest.raises(ConfigError) as info:
        parse_config(small("nls"))
    assert info.value.field == "equation.p"


def test_grid_size_must_be_power_of_two():
    with pytest.raises(ConfigError) as info:
        parse_config(small().replace("n = 32", "n = 48"))
    assert info.value.field == "grid.n"


def test_type_errors():
    with pytest.raises(ConfigError):
        parse_config(small().replace("dt = 0.01", 'dt = "fast"'))
    with pytest.raises(ConfigError):
        parse_config(small().replace("record_every = 2", "record_every = 2.5"))


def test_malformed_toml():
    with pytest.raises(ConfigError) as info:
        parse_config(small() + "\n[solver\n")
    assert "malformed" in str(info.value)


def test_verify_requires_seed_and_admissible_pair():
    text = small().replace('experiment = "simulate"', 'experiment = "verify-estimates"')
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "seed"
    with pytest.raises(ConfigError) as info:
        parse_config(text, {"seed": 1, "estimates.r": 4.0})
    assert info.value.field == "estimates.r"
    with pytest.raises(ConfigError):
        parse_config(text, {"seed": 1, "estimates.hls_gamma": 2.0})
    assert parse_config(text, {"seed": 1}).seed == 1


def test_checkpoint_cadence_must_align_with_records():
    with pytest.raises(ConfigError) as info:
        parse_config(small(), {"output.checkpoint_every": 3})
    assert info.value.field == "output.checkpoint_every"
    assert parse_config(small(), {"output.checkpoint_every": 4}).output.checkpoint_every == 4


def test_decay_probe_horizon_covers_ladder():
    text = small().replace('experiment = "simulate"', 'experiment = "decay-probe"')
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "solver.horizon"


def test_overrides_win_over_text():
    cfg = parse_config(NLS_TEXT, {"equation.p": 2.2, "solver.dt": 0.005, "seed": 9})
    assert cfg.equation.p == 2.2 and cfg.solver.dt == 0.005 and cfg.seed == 9


# --- checkpoints ------------------------------------------------------------------------


@given(st.sampled_from([1, 2, 8]), st.floats(0.1, 1e3), st.floats(-1e3, 1e3), st.integers(0, 10**6))
def test_checkpoint_round_trip_is_bit_exact(n, L, t, seed):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    for eq in (EquationSpec.linear(), EquationSpec.nls(2.5), EquationSpec.hartree(1.5)):
        blob = ckpt.encode(f, L, t, eq)
        assert len(blob) == ckpt.HEADER.size + 16 * n * n
        head, g = ckpt.decode(blob)
        assert g.tobytes() == f.tobytes()
        assert (head.n, head.L, head.time) == (n, L, t)
        assert head.equation() == eq


def test_checkpoint_file_round_trip(tmp_path):
    g = Grid(16, 8.0)
    f = gaussian(g, 1.0, 1.0, boost=(0.3, 0.0))
    path = ckpt.write_checkpoint(tmp_path / "a.dspl", f, g.L, 1.5, EquationSpec.nls(2.5))
    head, back = ckpt.read_checkpoint(path)
    assert np.array_equal(back, f) and head.time == 1.5 and head.kind == "nls" and head.exponent == 2.5


def test_checkpoint_rejects_corruption():
    blob = ckpt.encode(np.ones((4, 4)), 1.0, 0.0, EquationSpec.linear())
    with pytest.raises(ckpt.CheckpointError, match="magic"):
        ckpt.decode(b"XXXX" + blob[4:])
    with pytest.raises(ckpt.CheckpointError, match="payload"):
        ckpt.decode(blob[:-1])
    with pytest.raises(ckpt.CheckpointError, match="header"):
        ckpt.decode(blob[:10])
    bad_version = blob[:4] + (2).to_bytes(4, "little") + blob[8:]
    with pytest.raises(ckpt.CheckpointError, match="version"):
        ckpt.decode(bad_version)
    with pytest.raises(ckpt.CheckpointError):
        ckpt.encode(np.ones((2, 3)), 1.0, 0.0, EquationSpec.linear())


# --- runs -------------------------------------------------------------------------------


def read_ndjson(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_simulate_linear_run_artifacts(tmp_path):
    res = runner.run(parse_config(small()), tmp_path)
    assert res.exit_code == 0
    rows = read_ndjson(tmp_path / "diagnostics.ndjson")
    # 10 steps recorded every 2, plus the initial state
    assert len(rows) == 6
    assert [r["time"] for r in rows] == pytest.approx([0.0, 0.02, 0.04, 0.06, 0.08, 0.1])
    masses = [r["mass"] for r in rows]
    assert max(masses) - min(masses) < 1e-13 * masses[0]
    assert DiagnosticsRecord.from_json(json.dumps(rows[0])).time == 0.0
    report = json.loads((tmp_path / "reports.json").read_text())
    assert report["records"] == 6 and report["steps"] == 10
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["exit_code"] == 0 and set(manifest["versions"]) >= {"numpy", "scipy", "python"}


def test_manifest_reproduces_run(tmp_path):
    a = runner.run(parse_config(NLS_TEXT), tmp_path / "a")
    manifest = json.loads((a.out_dir / "manifest.json").read_text())
    import tomli_w

    cfg = parse_config(tomli_w.dumps(manifest["config"]))
    runner.run(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "diagnostics.ndjson").read_bytes() == (tmp_path / "b" / "diagnostics.ndjson").read_bytes()


def test_simulate_writes_checkpoints_and_resumes_from_them(tmp_path):
    cfg = parse_config(NLS_TEXT, {"output.checkpoint_every": 4})
    runner.run(cfg, tmp_path / "a")
    names = sorted(p.name for p in (tmp_path / "a" / "checkpoints").iterdir())
    assert names == ["step_00000000.dspl", "step_00000004.dspl", "step_00000008.dspl"]
    head, f = ckpt.read_checkpoint(tmp_path / "a" / "checkpoints" / "step_00000004.dspl")
    assert head.time == pytest.approx(0.04) and head.kind == "nls"
    resumed = parse_config(NLS_TEXT, {"profile.kind": "file", "profile.path": str(tmp_path / "a" / "checkpoints" / "step_00000000.dspl")})
    runner.run(resumed, tmp_path / "b")
    assert (tmp_path / "a" / "diagnostics.ndjson").read_bytes() == (tmp_path / "b" / "diagnostics.ndjson").read_bytes()


def test_checkpoint_profile_must_match_grid(tmp_path):
    path = ckpt.write_checkpoint(tmp_path / "x.dspl", np.ones((8, 8)), 4.0, 0.0, EquationSpec.linear())
    cfg = parse_config(small(), {"profile.kind": "file", "profile.path": str(path)})
    with pytest.raises(ConfigError):
        runner.run(cfg, tmp_path / "out")


def test_strict_boundary_aborts_with_code_3(tmp_path):
    # a wide Gaussian puts mass on the box edge from the start
    cfg = parse_config(NLS_TEXT, {"profile.width": 6.0, "output.strict_boundary": True})
    res = runner.run(cfg, tmp_path)
    assert res.exit_code == runner.EXIT_ABORT and "boundary" in res.error
    assert json.loads((tmp_path / "manifest.json").read_text())["exit_code"] == 3


def test_nonfinite_initial_state_aborts_with_code_3(tmp_path):
    g = Grid(32, 16.0)
    f = gaussian(g, 0.5, 1.0)
    f[5, 5] = np.nan
    path = ckpt.write_checkpoint(tmp_path / "nan.dspl", f, g.L, 0.0, EquationSpec.nls(2.5))
    cfg = parse_config(NLS_TEXT, {"profile.kind": "file", "profile.path": str(path)})
    res = runner.run(cfg, tmp_path / "out")
    assert res.exit_code == runner.EXIT_ABORT
    assert json.loads((tmp_path / "out" / "reports.json").read_text())["error"].startswith("numerical abort")


VERIFY_OVERRIDES = {
    "experiment": "verify-estimates",
    "seed": 5,
    "estimates.eta_samples": 2000,
    "estimates.p4_samples": 2000,
    "grid.n": 64,
    "grid.L": 32.0,
}


def test_verify_run_passes_without_ceilings(tmp_path, monkeypatch):
    monkeypatch.setattr(est, "load_baselines", lambda: {"ceilings": {}})
    res = runner.run(parse_config(NLS_TEXT, VERIFY_OVERRIDES), tmp_path)
    assert res.exit_code == 0 and res.report["pass"]
    assert res.report["interpolated_exponents"] == {"energy": "1/8", "mass": "3/4"}
    assert res.report["p4_hand_values"] == {"collinear": 4.0, "right_angle": 2.0}
    assert res.report["positivity"][0]["seed"] == 5 and res.report["positivity"][1]["seed"] == 6


def test_verify_ceiling_violation_exits_4(tmp_path, monkeypatch):
    monkeypatch.setattr(est, "load_baselines", lambda: {"ceilings": {"hls": 1e-9}})
    res = runner.run(parse_config(NLS_TEXT, VERIFY_OVERRIDES), tmp_path)
    assert res.exit_code == runner.EXIT_VERIFY
    assert not res.report["checks"]["ratios"]
    assert json.loads((tmp_path / "manifest.json").read_text())["exit_code"] == 4


def test_verify_is_seed_deterministic(tmp_path):
    a = runner.run(parse_config(NLS_TEXT, VERIFY_OVERRIDES), tmp_path / "a")
    b = runner.run(parse_config(NLS_TEXT, VERIFY_OVERRIDES), tmp_path / "b")
    assert (tmp_path / "a" / "reports.json").read_bytes() == (tmp_path / "b" / "reports.json").read_bytes()
    assert a.report["positivity"] == b.report["positivity"]


def test_wave_operator_run_artifacts(tmp_path):
    overrides = {"experiment": "wave-operator", "solver.horizon": 2.0, "solver.dt": 0.05, "wave_operator.t_first": 0.5, "output.checkpoint_every": 2}
    res = runner.run(parse_config(NLS_TEXT, overrides), tmp_path)
    assert res.exit_code == 0
    assert res.report["horizons"] == [0.5, 1.0, 2.0]
    rows = read_ndjson(tmp_path / "convergence.ndjson")
    assert {r["part"] for r in rows} >= {"cauchy", "forward"}
    assert sorted(p.name for p in (tmp_path / "checkpoints").iterdir()) == ["wT_0.5.dspl", "wT_1.dspl", "wT_2.dspl"]
    times = [r["time"] for r in read_ndjson(tmp_path / "diagnostics.ndjson")]
    assert times == pytest.approx([0.0, 0.25, 0.5, 1.0, 1.5, 2.0])


def test_decay_run_artifacts(tmp_path):
    overrides = {
        "experiment": "decay-probe",
        "solver.dt": 0.05,
        "solver.horizon": 4.0,
        "solver.record_every": 4,
        # short windows s0/8 .. s0 must land on the 0.1 sampling grid
        "decay.s_ladder": [0.8, 1.6],
        "decay.sample_every": 0.1,
        "decay.times": [1.0, 1.5, 2.0, 3.0],
        "decay.free_n": 64,
        "decay.free_L": 64.0,
    }
    res = runner.run(parse_config(NLS_TEXT, overrides), tmp_path)
    assert res.exit_code == 0
    assert len(res.report["weak_decay"]["dyadic_integrals"]) == 2
    assert math.isfinite(res.report["dispersive"]["sup_exponent"])
    assert len(read_ndjson(tmp_path / "diagnostics.ndjson")) == 21


# --- sweeps ---------------------------------------------------------------------------------


def test_axis_parsing():
    assert runner.parse_axis("p=2.2,2.5") == ("p", [2.2, 2.5])
    assert runner.parse_axis("n=32,64") == ("n", [32, 64])
    for bad in ("p", "p=", "q=1", "p=a"):
        with pytest.raises(ConfigError):
            runner.parse_axis(bad)


def test_axis_expansion_order():
    pts = runner.expand_axes([("p", [1, 2]), ("dt", [3, 4])])
    assert pts == [{"p": 1, "dt": 3}, {"p": 1, "dt": 4}, {"p": 2, "dt": 3}, {"p": 2, "dt": 4}]


def test_sweep_table_rows_and_single_point_agreement(tmp_path):
    rows = runner.sweep(NLS_TEXT, [("p", [2.2, 2.5]), ("dt", [0.01, 0.005])], tmp_path)
    assert [(r["p"], r["dt"]) for r in rows] == [(2.2, 0.01), (2.2, 0.005), (2.5, 0.01), (2.5, 0.005)]
    with open(tmp_path / "sweep.csv", newline="") as fh:
        table = list(csv.DictReader(fh))
    assert [t["run"] for t in table] == ["run_000", "run_001", "run_002", "run_003"]
    assert list(table[0])[:5] == ["run", "p", "dt", "exit_code", "error"]
    single = runner.run(parse_config(NLS_TEXT, {"equation.p": 2.5, "solver.dt": 0.005}), tmp_path / "single")
    assert rows[3]["energy_rel_drift"] == single.report["energy_rel_drift"]
    assert (tmp_path / "run_003" / "diagnostics.ndjson").read_bytes() == (tmp_path / "single" / "diagnostics.ndjson").read_bytes()


def test_sweep_records_failed_points(tmp_path):
    rows = runner.sweep(NLS_TEXT, [("p", [2.5, 0.5])], tmp_path)
    assert rows[0]["exit_code"] == 0
    assert rows[1]["exit_code"] == runner.EXIT_CONFIG and "equation.p" in rows[1]["error"]


def test_sweep_with_workers_matches_serial(tmp_path):
    axes = [("p", [2.2, 2.5])]
    a = runner.sweep(NLS_TEXT, axes, tmp_path / "a", workers=1)
    b = runner.sweep(NLS_TEXT, axes, tmp_path / "b", workers=2)
    assert [r["energy_rel_drift"] for r in a] == [r["energy_rel_drift"] for r in b]


# --- CLI ---------------------------------------------------------------------------------------


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(NLS_TEXT)
    return path


def test_cli_simulate_ok(config_file, tmp_path, capsys):
    code = cli.main(["simulate", "--config", str(config_file), "--out", str(tmp_path / "o")])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["exit_code"] == 0
    assert (tmp_path / "o" / "diagnostics.ndjson").exists()


def test_cli_config_error_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(small("hartree", "gamma = 2.5"))
    assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "equation.gamma" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 2


def test_cli_verify_needs_seed(config_file, tmp_path):
    assert cli.main(["verify", "--config", str(config_file), "--out", str(tmp_path / "o")]) == 2


def test_cli_strict_boundary_exits_3(tmp_path):
    path = tmp_path / "wide.toml"
    path.write_text(NLS_TEXT.replace("width = 1.0", "width = 6.0"))
    assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path / "o"), "--strict-boundary"]) == 3


def test_cli_verify_failure_exits_4(config_file, tmp_path, monkeypatch):
    monkeypatch.setattr(est, "load_baselines", lambda: {"ceilings": {"correlation": 0.0}})
    text = config_file.read_text().replace("n = 32", "n = 16") + "\n[estimates]\neta_samples = 100\np4_samples = 100\n"
    config_file.write_text(text)
    assert cli.main(["verify", "--config", str(config_file), "--out", str(tmp_path / "o"), "--seed", "3"]) == 4


def test_cli_checkpoint_flag(config_file, tmp_path):
    assert cli.main(["simulate", "--config", str(config_file), "--out", str(tmp_path / "o"), "--checkpoint-every", "10"]) == 0
    assert sorted(p.name for p in (tmp_path / "o" / "checkpoints").iterdir()) == ["step_00000000.dspl", "step_00000010.dspl"]


def test_cli_sweep(config_file, tmp_path, capsys):
    code = cli.main(["sweep", "--config", str(config_file), "--out", str(tmp_path / "s"), "--axis", "p=2.2,2.5", "--axis", "dt=0.01,0.005"])
    assert code == 0
    assert "4 runs, 0 failed" in capsys.readouterr().out
    assert cli.main(["sweep", "--config", str(config_file), "--out", str(tmp_path / "t"), "--axis", "p=2.5,0.5"]) == 3
    assert cli.main(["sweep", "--config", str(config_file), "--out", str(tmp_path / "u")]) == 2
    assert cli.main(["sweep", "--config", str(config_file), "--axis", "zeta=1"]) == 2


def test_wave_operator_linear_control_checks(tmp_path):
    overrides = {"experiment": "wave-operator", "solver.horizon": 2.0, "solver.dt": 0.05, "wave_operator.t_first": 0.5}
    res = runner.run(parse_config(small(), overrides), tmp_path)
    assert res.report["checks"] == {"linear_control": True, "mass_budget": True}


@pytest.mark.slow
def test_exponent_sweep_gives_decreasing_cauchy_tables(tmp_path):
    text = load_config("pinned:wave_nls").to_toml()
    rows = runner.sweep(text, [("p", [2.2, 2.5, 2.8])], tmp_path, workers=1)
    for row in rows:
        assert row["exit_code"] == 0, row
        h1 = [row[f"cauchy_h1_T{T}"] for T in (4, 8, 16)]
        assert all(b < a for a, b in zip(h1, h1[1:])), (row["p"], h1)


def test_decay_probe_windows_must_land_on_samples():
    text = small().replace('experiment = "simulate"', 'experiment = "decay-probe"')
    base = {"solver.horizon": 4.0, "decay.sample_every": 0.1}
    with pytest.raises(ConfigError) as info:
        parse_config(text, {**base, "decay.s_ladder": [0.5, 1.0, 2.0]})
    assert info.value.field == "decay.s_ladder"
    assert parse_config(text, {**base, "decay.s_ladder": [0.8, 1.6]}).decay.s_ladder == [0.8, 1.6]
