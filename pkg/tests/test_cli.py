import numpy as np
import pytest
from numpy.testing import assert_allclose

from kpmass.cli import (ConfigError, config_hash, dump_config, load_config, main, parse_config,
                        read_kpgrid, write_kpgrid)

SMALL_GRID = """
grid.x_min = -8
grid.x_max = 8
grid.nx = 33
grid.y_min = -4
grid.y_max = 4
grid.ny = 9
"""


def _config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_config_round_trip_and_hash():
    cfg = parse_config("equation.alpha = 3.0  # comment\nmass.y_slices = 0, 1.5\n")
    assert cfg["equation.alpha"] == 3.0
    assert cfg["mass.y_slices"] == [0.0, 1.5]
    assert parse_config(dump_config(cfg)) == cfg
    assert config_hash(cfg) == config_hash(parse_config(dump_config(cfg)))
    assert config_hash(cfg) != config_hash(parse_config(""))
    assert len(config_hash(cfg)) == 16


def test_config_rejects_bad_input():
    with pytest.raises(ConfigError, match="unknown field"):
        parse_config("grid.spacing = 0.1")
    with pytest.raises(ConfigError, match="grid.nx"):
        parse_config("grid.nx = 2.5")
    with pytest.raises(ConfigError, match="positive"):
        parse_config("tolerances.rel_tol = 0")
    with pytest.raises(ConfigError):
        parse_config("no equals sign")


def test_load_default_config():
    cfg = load_config(None)
    assert cfg["equation.alpha"] == 2.0 and cfg["grid.nx"] == 256


def test_kpgrid_round_trip(tmp_path):
    vals = np.arange(12.0).reshape(3, 4) - 5.5
    path = tmp_path / "g.kpgrid"
    write_kpgrid(path, [(3, -1.0, 1.0), (4, 0.0, 3.0)], vals, 2.5e-9)
    axes, back, err = read_kpgrid(path)
    assert axes == [(3, -1.0, 1.0), (4, 0.0, 3.0)]
    assert np.array_equal(back, vals) and err == 2.5e-9
    assert path.read_bytes()[:8] == b"KPGRID1\0"


def test_kpgrid_rejects_bad_files(tmp_path):
    path = tmp_path / "g.kpgrid"
    write_kpgrid(path, [(2, 0.0, 1.0)], np.zeros(2), 0.0)
    data = path.read_bytes()
    (tmp_path / "short.kpgrid").write_bytes(data[:-3])
    with pytest.raises(ValueError, match="truncated"):
        read_kpgrid(tmp_path / "short.kpgrid")
    (tmp_path / "magic.kpgrid").write_bytes(b"KPGRID2\0" + data[8:])
    with pytest.raises(ValueError, match="KPGRID1"):
        read_kpgrid(tmp_path / "magic.kpgrid")
    with pytest.raises(ValueError):
        write_kpgrid(path, [(3, 0.0, 1.0)], np.zeros(2), 0.0)


def test_excluded_alpha_exits_with_config_error(tmp_path, capsys):
    cfg = _config(tmp_path, "equation.alpha = 0.4\n")
    assert main(["kernel-eval", "--config", cfg, "--output", str(tmp_path)]) == 2
    assert "1/2" in capsys.readouterr().err
    cfg = _config(tmp_path, "equation.alpha = 1.0\n")
    assert main(["kernel3d", "--config", cfg, "--output", str(tmp_path)]) == 2
    assert "alpha = 1 is excluded" in capsys.readouterr().err


def test_bad_flags_exit_with_config_error(tmp_path, capsys):
    assert main(["kernel-eval", "--tolerance-scale", "-1", "--output", str(tmp_path)]) == 2
    assert main(["kernel-eval", "--threads", "0", "--output", str(tmp_path)]) == 2
    cfg = _config(tmp_path, "equation.family = KP-BBM\nequation.weight_order = 3.5\n")
    assert main(["evolve-nonlinear", "--config", cfg, "--output", str(tmp_path)]) == 2
    capsys.readouterr()


def test_kernel_eval_output_is_deterministic(tmp_path, capsys):
    cfg = _config(tmp_path, "point.x = -1.5\npoint.y = 0.5\n")
    main(["kernel-eval", "--config", cfg, "--output", str(tmp_path / "a")])
    main(["kernel-eval", "--config", cfg, "--output", str(tmp_path / "b")])
    a = (tmp_path / "a" / "kernel_eval.csv").read_text()
    assert a == (tmp_path / "b" / "kernel_eval.csv").read_text()
    h = config_hash(load_config(cfg))
    assert a.splitlines()[0] == f"# kpmass kernel-eval config_hash={h}"
    assert a.splitlines()[1].startswith("which,t,x,y")
    assert "G(1.0, -1.5, 0.5) = " in capsys.readouterr().out


def test_output_directory_precedence(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("KPMASS_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["kernel-eval"]) == 0
    assert (tmp_path / "env" / "kernel_eval.csv").exists()
    cfg = _config(tmp_path, f"outputs.directory = {tmp_path / 'cfg'}\n")
    assert main(["kernel-eval", "--config", cfg]) == 0
    assert (tmp_path / "cfg" / "kernel_eval.csv").exists()
    assert main(["kernel-eval", "--config", cfg, "--output", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "kernel_eval.csv").exists()
    capsys.readouterr()


def test_kernel_grid_writes_kpgrid(tmp_path, capsys):
    cfg = _config(tmp_path, SMALL_GRID + "kernel.which = G\n")
    assert main(["kernel-grid", "--config", cfg, "--output", str(tmp_path)]) == 0
    h = config_hash(load_config(cfg))
    axes, vals, err = read_kpgrid(tmp_path / f"kernel_G_t1_{h}.kpgrid")
    assert axes == [(9, -4.0, 4.0), (33, -8.0, 8.0)]
    assert_allclose(vals, vals[::-1], atol=1e-15)
    assert err < 1e-8
    capsys.readouterr()


def test_calibrate(tmp_path, capsys):
    cfg = _config(tmp_path, "calibrate.samples = 40\n")
    assert main(["calibrate", "--config", cfg, "--output", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    c1 = float(out.split("c1 = ")[1].split()[0])
    assert_allclose(c1, 12.0 ** (-1.0 / 3.0), rtol=1e-8)


def test_evolve_commands(tmp_path, capsys):
    base = SMALL_GRID + "times.T = 0.1\ntimes.n_times = 4\ndatum.amplitude = 0.1\n"
    cfg = _config(tmp_path, base + "times.values = 0.5\n", "lin.cfg")
    assert main(["evolve-linear", "--config", cfg, "--output", str(tmp_path)]) == 0
    cfg = _config(tmp_path, base, "kp.cfg")
    assert main(["evolve-nonlinear", "--config", cfg, "--output", str(tmp_path)]) == 0
    assert (tmp_path / "nonlinear_residual.csv").exists()
    cfg = _config(tmp_path, base + "equation.family = KP-BBM\nequation.weight_order = 3.5\n",
                  "bbm.cfg")
    assert main(["evolve-bbm", "--config", cfg, "--output", str(tmp_path)]) == 0
    assert (tmp_path / "bbm_picard.csv").exists()
    cfg = _config(tmp_path, base + "equation.family = KP-BBM\nequation.weight_order = 3.5\n"
                  "bbm.k = 1.0\n", "bad.cfg")
    assert main(["evolve-bbm", "--config", cfg, "--output", str(tmp_path)]) == 2
    capsys.readouterr()


def test_kernel3d_small(tmp_path, capsys):
    cfg = _config(tmp_path, "grid.x_min = -1\ngrid.x_max = 1\ngrid.nx = 3\ngrid.y_min = -1\n"
                  "grid.y_max = 1\ngrid.ny = 3\ngrid.z_min = -1\ngrid.z_max = 1\ngrid.nz = 2\n"
                  "kernel.which = A\n")
    assert main(["kernel3d", "--config", cfg, "--output", str(tmp_path)]) == 0
    h = config_hash(load_config(cfg))
    axes, vals, _ = read_kpgrid(tmp_path / f"kernel3d_A_t1_{h}.kpgrid")
    assert vals.shape == (2, 3, 3)
    assert_allclose(vals, vals[::-1], rtol=0, atol=0)
    capsys.readouterr()


def test_mass_report(tmp_path, capsys):
    cfg = _config(tmp_path, "mass.x_max = 64\nmass.X_values = 4, 16, 64\n")
    assert main(["mass-report", "--config", cfg, "--output", str(tmp_path)]) == 0
    lines = (tmp_path / "mass_report.csv").read_text().splitlines()
    assert lines[0].startswith("# kpmass mass-report config_hash=")
    assert len(lines) == 2 + 3
    assert "P(0, 64) = 1.00000" in capsys.readouterr().out
    cfg = _config(tmp_path, "mass.x_max = 8\n", "bad.cfg")
    assert main(["mass-report", "--config", cfg, "--output", str(tmp_path)]) == 2


def test_verify_all_subset(tmp_path, capsys):
    cfg = _config(tmp_path, "verify.criteria = 9, 11\n")
    assert main(["verify-all", "--config", cfg, "--output", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "2/2 criteria passed" in out
    assert (tmp_path / "verify_all.csv").exists()
