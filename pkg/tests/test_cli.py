import json
from pathlib import Path

import pytest

from fracspde.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, main
from fracspde.config import ConfigError, load_config
from fracspde.io import read_csv, tree_digest

SMALL_SIM = """\
[run]
replicates = 20
[noise]
kind = spacetime_white
[grid]
nt = 100
nx = 32
[simulate]
store_every = 10
store_start = 0
probe_x = 0, 1
"""


def _ini(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _run(tmp_path, sub, *extra, env=None, out="out"):
    target = tmp_path / out
    code = main([sub, "--out", str(target), *extra], env=env or {})
    return code, target


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


# ---------------------------------------------------------------- kernel-verify


def test_kernel_verify_default_passes(tmp_path):
    code, out = _run(tmp_path, "kernel-verify")
    assert code == EXIT_OK
    man = _manifest(out)
    assert man["status"] == "pass"
    assert set(man["checks"]) >= {"mass", "self_similarity", "sharp_bound", "derivative_envelope"}


def test_kernel_verify_gaussian_sharp_bound_is_config_error(tmp_path, capsys):
    code, _ = _run(tmp_path, "kernel-verify", env={"FRACSPDE__KERNEL__ALPHA": "1"})
    assert code == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "AlphaRestrictionError"
    assert "alpha < 1" in err["message"] and err["subcommand"] == "kernel-verify"


def test_kernel_verify_tight_mass_tolerance_fails(tmp_path):
    code, out = _run(tmp_path, "kernel-verify", env={"FRACSPDE__TOLERANCES__MASS": "1e-15"})
    assert code == EXIT_CHECK
    man = _manifest(out)
    assert man["status"] == "fail" and man["checks"]["mass"] is False
    header, rows = read_csv(out / "mass.csv")
    assert header[-1] == "pass" and "false" in [r[-1] for r in rows]


def test_every_output_carries_hash(tmp_path):
    code, out = _run(tmp_path, "kernel-verify")
    digest = _manifest(out)["config_hash"]
    for path in out.glob("*.json"):
        body = json.loads(path.read_text())
        assert body["config_hash"] == digest, path.name
    for path in out.glob("*.csv"):
        meta = json.loads(path.with_suffix(".meta.json").read_text())
        assert meta["config_hash"] == digest and "numpy" in meta["versions"]


# ---------------------------------------------------------------- simulate


def test_simulate_twice_byte_identical(tmp_path):
    cfg = _ini(tmp_path, SMALL_SIM)
    a = _run(tmp_path, "simulate", "--config", cfg, out="a")[1]
    b = _run(tmp_path, "simulate", "--config", cfg, out="b")[1]
    da, db = tree_digest(a), tree_digest(b)
    assert "stats.csv" in da and da == db


def test_simulate_thread_count_invariant(tmp_path):
    cfg = _ini(tmp_path, SMALL_SIM)
    one = _run(tmp_path, "simulate", cfg, "--threads", "1", out="t1")[1]
    eight = _run(tmp_path, "simulate", cfg, "--threads", "8", out="t8")[1]
    assert tree_digest(one) == tree_digest(eight)


def test_simulate_zero_replicates_manifest_only(tmp_path):
    cfg = _ini(tmp_path, SMALL_SIM)
    code, out = _run(tmp_path, "simulate", cfg, "--replicates", "0")
    assert code == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json", "timing.json"]
    man = _manifest(out)
    assert man["files"] == [] and man["replicates"] == 0


def test_simulate_admissibility_warning_in_manifest(tmp_path):
    cfg = _ini(tmp_path, SMALL_SIM + "[kernel]\nalpha = 0.4\n")
    code, out = _run(tmp_path, "simulate", cfg)
    assert code == EXIT_OK
    assert "alpha_in_half_one" in _manifest(out)["warnings"]


def test_simulate_write_fields(tmp_path):
    cfg = _ini(tmp_path, SMALL_SIM.replace("replicates = 20", "replicates = 2") + "write_fields = true\n")
    _, out = _run(tmp_path, "simulate", cfg)
    header, rows = read_csv(out / "fields" / "replicate_00001.csv")
    assert header == ["t", "x", "u"] and len(rows) == 11 * 32


# ---------------------------------------------------------------- plan / estimate / seminorm


def test_plan_row_single_bm(tmp_path):
    env = {"FRACSPDE__NOISE__KIND": "single_bm", "FRACSPDE__PLAN__ALPHAS": "0.75", "FRACSPDE__PLAN__PS": "8",
           "FRACSPDE__PLAN__BETA": "0.6", "FRACSPDE__KERNEL__ALPHA": "0.75"}
    code, out = _run(tmp_path, "plan", env=env)
    assert code == EXIT_OK
    header, rows = read_csv(out / "plan_table.csv")
    row = dict(zip(header, rows[0]))
    assert row["beta_max"] == 0.625
    assert row["theta"] == pytest.approx(2.6)
    plan = json.loads((out / "plan.json").read_text())
    assert plan["valid"]


def test_plan_inadmissible_is_check_failure(tmp_path):
    env = {"FRACSPDE__PLAN__BETA": "0.45", "FRACSPDE__PLAN__P": "10", "FRACSPDE__KERNEL__ALPHA": "1"}
    code, out = _run(tmp_path, "plan", env=env)
    assert code == EXIT_CHECK
    assert json.loads((out / "plan.json").read_text())["violations"]


def test_estimate_on_brownian_solution(tmp_path):
    # constant forcing with a single BM gives u(t, x) = W_t
    cfg = _ini(tmp_path, """\
[run]
replicates = 200
[noise]
kind = single_bm
[grid]
nt = 1000
nx = 16
[simulate]
store_every = 1
store_start = 700
""")
    code, out = _run(tmp_path, "estimate", cfg)
    assert code == EXIT_OK
    assert json.loads((out / "fit_space.json").read_text())["status"] == "saturated"
    fit = json.loads((out / "fit_time.json").read_text())
    assert fit["raw_exponent"] == pytest.approx(0.5, abs=0.05)


def test_seminorm_constant_field_zero(tmp_path):
    code, out = _run(tmp_path, "seminorm", env={"FRACSPDE__SEMINORM__FIELD": "constant"})
    assert code == EXIT_OK
    _, rows = read_csv(out / "seminorm.csv")
    assert all(r[1] == 0.0 and r[2] == 0.0 for r in rows)


def test_chaining_small(tmp_path):
    env = {"FRACSPDE__GRID__NT": "100", "FRACSPDE__GRID__NX": "128", "FRACSPDE__SIMULATE__STORE_START": "0",
           "FRACSPDE__CHAINING__PATHS": "10"}
    code, out = _run(tmp_path, "chaining", env=env)
    assert code == EXIT_OK
    assert json.loads((out / "chaining.json").read_text())["failures"] == 0


def test_chaining_level_too_large(tmp_path, capsys):
    env = {"FRACSPDE__GRID__NX": "16", "FRACSPDE__CHAINING__LEVEL": "6"}
    code, _ = _run(tmp_path, "chaining", env=env)
    assert code == EXIT_CONFIG
    assert "level" in capsys.readouterr().err


# ---------------------------------------------------------------- report


def test_report_renders_pngs(tmp_path):
    _, src = _run(tmp_path, "kernel-verify", out="kv")
    code, out = _run(tmp_path, "report", env={"FRACSPDE__REPORT__INPUT": str(src)}, out="rep")
    assert code == EXIT_OK
    figs = sorted((out / "figures").glob("*.png"))
    assert {f.name for f in figs} >= {"mass.png", "bound_ratio.png", "derivative_envelope.png"}
    digest = _manifest(out)["config_hash"]
    for f in figs:
        data = f.read_bytes()
        assert data[:8] == b"\x89PNG\r\n\x1a\n"
        assert f"config_hash={digest}".encode() in data


def test_report_missing_input(tmp_path):
    code, _ = _run(tmp_path, "report", env={"FRACSPDE__REPORT__INPUT": str(tmp_path / "nope")})
    assert code == EXIT_CONFIG


# ---------------------------------------------------------------- config


def test_config_error_reports_line(tmp_path, capsys):
    cfg = _ini(tmp_path, "[run]\nseed = 4\n\n[kernel]\nalpha = 1.7\n")
    code = main(["kernel-verify", "--config", cfg, "--out", str(tmp_path / "o")], env={})
    assert code == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert err["line"] == 5 and err["section"] == "kernel" and err["key"] == "alpha"
    assert not (tmp_path / "o").exists()  # validated before any output


@pytest.mark.parametrize("text,line", [("[run]\nseeed = 3\n", 2), ("[nosuch]\nx = 1\n", 1),
                                       ("[grid]\nnx = 100\n", 2), ("[grid]\nnt = ten\n", 2)])
def test_config_errors_located(tmp_path, text, line):
    with pytest.raises(ConfigError) as err:
        load_config("simulate", _ini(tmp_path, text), env={})
    assert err.value.line == line


def test_override_precedence(tmp_path):
    cfg = _ini(tmp_path, "[run]\nseed = 1\nreplicates = 7\n")
    assert load_config("simulate", cfg, env={}).seed == 1
    env = {"FRACSPDE_SEED": "2", "FRACSPDE__RUN__REPLICATES": "9"}
    mid = load_config("simulate", cfg, env=env)
    assert mid.seed == 2 and mid.replicates == 9
    top = load_config("simulate", cfg, env=env, overrides={("run", "seed"): "3"})
    assert top.seed == 3 and top.replicates == 9


def test_bad_env_override():
    with pytest.raises(ConfigError):
        load_config("plan", env={"FRACSPDE__KERNEL__NOPE": "1"})


def test_hash_ignores_threads_and_out(tmp_path):
    a = load_config("simulate", env={"FRACSPDE_THREADS": "8", "FRACSPDE_OUT": "x"})
    b = load_config("simulate", env={})
    c = load_config("simulate", env={"FRACSPDE_SEED": "5"})
    assert a.hashable() == b.hashable() != c.hashable()


def test_seed_must_be_u64():
    with pytest.raises(ConfigError):
        load_config("simulate", env={"FRACSPDE_SEED": str(2**64)})


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"], env={})
    assert exc.value.code == 2
