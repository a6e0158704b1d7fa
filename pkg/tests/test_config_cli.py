"""Config parsing, canonical hashing, CLI subcommands, and exit codes."""

import os

import pytest

from chemolab.cli import main
from chemolab.config import (apply_override, config_hash, load_config,
                             read_raw)
from chemolab.errors import ConfigError

BASE = """\
[grid]
nx = 16
ny = 16
lx = 1.0
ly = 1.0

[physics]
tau = 0.0
chi = 1.0

[source]
family = logistic 1.0 1.0 2.0

[initial]
kind = gaussian_bump
width = 0.15
mass = 1.0
seed = 3

[run]
t_end = 0.01
cfl = 0.8
record_every = 8
"""


def write_config(tmp_path, text=BASE, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_full_config(tmp_path):
    cfg = load_config(write_config(tmp_path))
    assert cfg.grid.nx == 16
    assert cfg.tau == 0.0 and cfg.chi == 1.0
    assert cfg.source.family == "logistic"
    assert cfg.initial_kind == "gaussian_bump"
    assert cfg.run_params["t_end"] == 0.01
    assert cfg.c_gn == 1.0
    opts = cfg.stepper_options()
    assert opts.cfl == 0.8


def test_structured_source_block(tmp_path):
    text = BASE.replace("family = logistic 1.0 1.0 2.0",
                        "family = sublog\na = 1.0\nb = 5.0\ngamma = 0.5")
    cfg = load_config(write_config(tmp_path, text))
    assert cfg.source.family == "sublog"
    assert cfg.source.b == 5.0 and cfg.source.exponent == 0.5


def test_config_errors_carry_field(tmp_path):
    bad = BASE.replace("chi = 1.0", "chi = -2.0")
    with pytest.raises(ConfigError) as exc:
        load_config(write_config(tmp_path, bad))
    assert exc.value.section == "physics" and exc.value.key == "chi"
    bad2 = BASE.replace("nx = 16", "nx = two")
    with pytest.raises(ConfigError) as exc2:
        load_config(write_config(tmp_path, bad2))
    assert exc2.value.section == "grid"
    bad3 = BASE + "\n[mystery]\nx = 1\n"
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, bad3))


def test_hash_stable_under_reordering(tmp_path):
    raw1 = read_raw(write_config(tmp_path, name="a.ini"))
    reordered = BASE.replace("tau = 0.0\nchi = 1.0", "chi = 1.0\ntau = 0.0")
    raw2 = read_raw(write_config(tmp_path, reordered, name="b.ini"))
    assert config_hash(raw1) == config_hash(raw2)
    raw3 = apply_override(raw1, "physics.chi", 2.0)
    assert config_hash(raw3) != config_hash(raw1)


def test_apply_override_is_pure():
    raw = {"physics": {"chi": "1.0"}}
    out = apply_override(raw, "physics.chi", 3.0)
    assert raw["physics"]["chi"] == "1.0"
    assert out["physics"]["chi"] == "3.0"
    cfgable = apply_override(raw, "run.t_end", 1.0)
    assert cfgable["run"]["t_end"] == "1.0"


def test_cli_classify_logistic_b1(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["classify", "--config", str(cfg), "--out", str(out)]) == 0
    report = (out / "regime_report.txt").read_text()
    assert "regime: B1" in report
    assert "mu: inf" in report
    assert "threshold: 0.5" in report
    captured = capsys.readouterr().out
    assert "B1" in captured


def test_cli_classify_zero_source_not_covered(tmp_path, capsys):
    text = BASE.replace("family = logistic 1.0 1.0 2.0", "family = zero")
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["classify", "--config", str(cfg), "--out", str(out)]) == 0
    assert "NotCovered" in (out / "regime_report.txt").read_text()
    assert "M unbounded" in capsys.readouterr().out


def test_cli_classify_estimate_mode(tmp_path):
    text = BASE + "\n[classify]\nc_gn = estimate\nbudget = 150\n"
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["classify", "--config", str(cfg), "--out", str(out)]) == 0
    report = (out / "regime_report.txt").read_text()
    assert "c_gn_estimated_floor" in report
    assert "regime_at_2x_c_gn" in report


def test_cli_run_t_end_zero(tmp_path):
    text = BASE.replace("t_end = 0.01", "t_end = 0.0")
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    csv = (out / "diagnostics.csv").read_text().splitlines()
    assert len(csv) == 2          # header plus the initial record
    verdict = (out / "verdict.txt").read_text().splitlines()
    assert verdict[0] == "bounded"


def test_cli_run_deterministic_bytes(tmp_path):
    cfg = write_config(tmp_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["run", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(out2)]) == 0
    b1 = (out1 / "diagnostics.csv").read_bytes()
    b2 = (out2 / "diagnostics.csv").read_bytes()
    assert b1 == b2


def test_cli_run_blowup_exit_code(tmp_path):
    text = BASE.replace("t_end = 0.01", "t_end = 0.01\nblowup_linf_cap = 1e-3")
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    code = main(["run", "--config", str(cfg), "--out", str(out)])
    assert code == 2
    assert (out / "verdict.txt").read_text().splitlines()[0] == "blowup"


def test_cli_run_snapshot_output(tmp_path):
    text = BASE.replace("record_every = 8",
                        "record_every = 8\nsnapshot_every = 16")
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    snaps = sorted(os.listdir(out / "snapshots"))
    assert snaps and snaps[0].startswith("u_")
    from chemolab import read_snapshot
    f, t = read_snapshot(out / "snapshots" / snaps[0])
    assert f.grid.nx == 16


def test_cli_config_error_exit_1(tmp_path, capsys):
    bad = BASE.replace("cfl = 0.8", "cfl = 1.4")
    cfg = write_config(tmp_path, bad)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "cfl" in capsys.readouterr().err


def test_cli_io_error_exit_4(tmp_path):
    cfg = write_config(tmp_path)
    blocker = tmp_path / "blocked"
    blocker.write_text("file, not a directory")
    code = main(["run", "--config", str(cfg), "--out", str(blocker)])
    assert code == 4


def test_cli_out_dir_from_env(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    env_out = tmp_path / "envout"
    monkeypatch.setenv("CHEMOLAB_OUT", str(env_out))
    assert main(["classify", "--config", str(cfg)]) == 0
    assert (env_out / "regime_report.txt").exists()


def test_cli_sweep_empty_values(tmp_path):
    text = BASE + "\n[sweep]\nparameter = initial.mass\nvalues =\n"
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "phase.csv").read_text().splitlines()
    assert lines == ["sweep_value,regime,verdict,max_u_linf,max_u_l1,M,gap"]


def test_cli_sweep_runs_and_orders_rows(tmp_path):
    text = BASE + "\n[sweep]\nparameter = initial.mass\nvalues = 0.5 2.0\nparallel = 1\n"
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "phase.csv").read_text().splitlines()
    assert len(lines) == 3
    assert lines[1].startswith("0.5,") and lines[2].startswith("2.0,")
    assert "bounded" in lines[1]
    assert (out / "sweep_000" / "diagnostics.csv").exists()
    assert (out / "sweep_001" / "verdict.txt").exists()


def test_cli_sweep_parallel_matches_serial(tmp_path):
    text = BASE + "\n[sweep]\nparameter = physics.chi\nvalues = 0.5 1.5\nparallel = 1\n"
    cfg1 = write_config(tmp_path, text, name="s1.ini")
    out1 = tmp_path / "serial"
    assert main(["sweep", "--config", str(cfg1), "--out", str(out1)]) == 0
    out2 = tmp_path / "parallel"
    assert main(["sweep", "--config", str(cfg1), "--out", str(out2),
                 "--parallel", "2"]) == 0
    assert (out1 / "phase.csv").read_bytes() == (out2 / "phase.csv").read_bytes()


def test_cli_sweep_source_parameter(tmp_path):
    text = BASE.replace("family = logistic 1.0 1.0 2.0",
                        "family = logistic\na = 1.0\nb = 1.0\ntheta = 2.0")
    text += "\n[sweep]\nparameter = source.b\nvalues = 0.5 1.0\n"
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "phase.csv").read_text().splitlines()
    assert len(lines) == 3
    for row in lines[1:]:
        assert "bounded" in row and "B1" in row


def test_cli_estimate_cgn(tmp_path, capsys):
    text = BASE + "\n[classify]\nbudget = 120\n"
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["estimate-cgn", "--config", str(cfg), "--out", str(out)]) == 0
    assert "lower_bound" in capsys.readouterr().out
    assert (out / "cgn_estimate.txt").exists()


def test_cli_seed_override_changes_initial(tmp_path):
    text = BASE.replace("kind = gaussian_bump",
                        "kind = random_perturbation").replace("t_end = 0.01",
                                                              "t_end = 0.0")
    cfg = write_config(tmp_path, text)
    out1, out2, out3 = (tmp_path / d for d in ("a", "b", "c"))
    main(["run", "--config", str(cfg), "--out", str(out1), "--seed", "1"])
    main(["run", "--config", str(cfg), "--out", str(out2), "--seed", "2"])
    main(["run", "--config", str(cfg), "--out", str(out3), "--seed", "1"])
    r1 = (out1 / "diagnostics.csv").read_bytes()
    r2 = (out2 / "diagnostics.csv").read_bytes()
    r3 = (out3 / "diagnostics.csv").read_bytes()
    assert r1 != r2 and r1 == r3
