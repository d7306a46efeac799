import subprocess
import sys

import numpy as np
import pytest

from voldens.cli import main, read_config


def body(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


@pytest.fixture
def obs3(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text("# Delta=0.01\ni,increment,log_square\n1,0.5,x\n2,-1.25,x\n3,2.0,x\n")
    return p


def test_estimate_default_grid(tmp_path, obs3, capsys):
    out = tmp_path / "est.csv"
    assert main(["estimate", "--h", "0.8", "--input", str(obs3), "--output", str(out)]) == 0
    lines = body(out)
    assert lines[0] == "x,f_hat" and len(lines) == 102
    meta = [l for l in out.read_text().splitlines() if l.startswith("#")]
    assert "# Delta=0.01" in meta and "# seed=None" in meta and "# h=0.8" in meta
    x, f = lines[1].split(",")
    assert len(x.replace("-", "").replace(".", "").lstrip("0").split("e")[0]) >= 15


def test_estimate_log_square_column(tmp_path):
    p = tmp_path / "ls.csv"
    y = np.log(np.array([0.5, 1.25, 2.0]) ** 2)
    p.write_text("log_square\n" + "\n".join(format(v, ".17g") for v in y) + "\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    q = tmp_path / "inc.csv"
    q.write_text("increment\n0.5\n-1.25\n2.0\n")
    assert main(["estimate", "--h", "1", "--input", str(p), "--output", str(a)]) == 0
    assert main(["estimate", "--h", "1", "--input", str(q), "--output", str(b)]) == 0
    assert body(a) == body(b)


def test_regime_warning_proceeds(tmp_path, obs3, capsys):
    out = tmp_path / "est.csv"
    rc = main(["estimate", "--gamma", "6", "--delta", "0.5", "--input", str(obs3),
               "--output", str(out), "--grid", "-3:3:7"])
    assert rc == 0 and len(body(out)) == 8
    assert "gamma=6 <= 4/delta=8" in capsys.readouterr().err


def test_missing_input_is_io_error(tmp_path, capsys):
    out = tmp_path / "est.csv"
    rc = main(["estimate", "--h", "1", "--input", str(tmp_path / "none.csv"), "--output", str(out)])
    assert rc == 3 and not out.exists()
    assert list(tmp_path.iterdir()) == []


def test_unwritable_output_is_io_error(tmp_path, obs3):
    rc = main(["estimate", "--h", "1", "--input", str(obs3), "--output",
               str(tmp_path / "missing_dir" / "e.csv")])
    assert rc == 3


@pytest.mark.parametrize("argv, flag", [
    (["estimate", "--h", "-1"], "--h"),
    (["estimate", "--h", "0.01"], "--h"),
    (["estimate", "--h", "1", "--delta", "1.5"], "--delta"),
    (["estimate", "--h", "1", "--bogus", "2"], "--bogus"),
    (["estimate", "--h", "1", "--grid-min", "0"], "--grid-min"),
    (["estimate", "--h", "1", "--variant", "fft"], "--variant"),
    (["estimate", "--h", "1", "--kernel", "nope"], "--kernel"),
    (["estimate"], "--gamma"),
])
def test_argument_errors(tmp_path, obs3, capsys, argv, flag):
    out = tmp_path / "e.csv"
    argv = argv + ["--input", str(obs3), "--output", str(out)]
    assert main(argv) == 1
    assert flag in capsys.readouterr().err
    assert not out.exists()


def test_simulate_errors(tmp_path, capsys):
    out = str(tmp_path / "s.csv")
    assert main(["simulate", "--n", "10", "--output", out]) == 1
    assert main(["simulate", "--n", "10", "--delta", "0.1", "--delta-exp", "0.5", "--output", out]) == 1
    assert main(["simulate", "--n", "10", "--delta", "0.1", "--param", "theta", "--output", out]) == 1
    assert main(["simulate", "--n", "10", "--delta", "0.1", "--param", "theta=-1", "--output", out]) == 1
    assert main(["simulate", "--n", "10", "--delta", "0.1", "--model", "gbm", "--output", out]) == 1
    assert main([]) == 1


def test_simulate_output(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["simulate", "--model", "cir", "--param", "kappa=3", "--n", "200",
                 "--delta-exp", "0.5", "--seed", "4", "--output", str(out)]) == 0
    lines = body(out)
    assert lines[0] == "i,increment,log_square" and len(lines) == 201
    text = out.read_text()
    assert "# param=kappa=3" in text and "# seed=4" in text
    i, x, y = lines[5].split(",")
    assert float(y) == pytest.approx(np.log(float(x) ** 2), rel=1e-15)


def test_oracle(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["oracle", "--model", "expou", "--grid=-2:2:5", "--output", str(out)]) == 0
    rows = [l.split(",") for l in body(out)[1:]]
    assert float(rows[2][1]) == pytest.approx(1 / np.sqrt(2 * np.pi), abs=1e-9)
    assert main(["oracle", "--model", "constant", "--output", str(out)]) == 2


def test_config_precedence(tmp_path, obs3):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# estimate settings\nh = 0.9\ngrid_points = 11\nvariant = direct\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["estimate", "--config", str(cfg), "--input", str(obs3), "--output", str(a)]) == 0
    assert len(body(a)) == 12 and "# h=0.9" in a.read_text()
    assert main(["estimate", "--config", str(cfg), "--h", "1.1", "--input", str(obs3),
                 "--output", str(b)]) == 0
    assert "# h=1.1" in b.read_text() and "# variant=direct" in b.read_text()


def test_config_errors(tmp_path, obs3):
    out = str(tmp_path / "e.csv")
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert main(["estimate", "--config", str(bad), "--h", "1", "--input", str(obs3), "--output", out]) == 1
    bad.write_text("h 0.8\n")
    assert main(["estimate", "--config", str(bad), "--input", str(obs3), "--output", out]) == 1
    bad.write_text("h = -2\n")
    assert main(["estimate", "--config", str(bad), "--input", str(obs3), "--output", out]) == 1
    assert main(["estimate", "--config", str(tmp_path / "nope.cfg"), "--h", "1",
                 "--input", str(obs3), "--output", out]) == 3


def test_read_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("a = 1  # trailing\n\n  b=x,y\n")
    assert read_config(p) == {"a": "1", "b": "x,y"}


def test_validate_kernel(tmp_path, capsys):
    assert main(["validate-kernel"]) == 0
    assert "kernel poly3: PASS" in capsys.readouterr().out
    assert main(["validate-kernel", "--kernel", "flat"]) == 2
    cfg = tmp_path / "k.cfg"
    cfg.write_text("kernel.coeffs = 0.9, 0, -0.9\nkernel.name = low\nkernel = low\n")
    assert main(["validate-kernel", "--config", str(cfg)]) == 2
    assert "[FAIL] normalized" in capsys.readouterr().out


def test_custom_kernel_in_estimate(tmp_path, obs3):
    cfg = tmp_path / "k.cfg"
    cfg.write_text("kernel.coeffs = 1,0,-3,0,3,0,-1\nkernel.name = mine\nkernel = mine\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["estimate", "--config", str(cfg), "--h", "1", "--input", str(obs3), "--output", str(a)]) == 0
    assert main(["estimate", "--h", "1", "--input", str(obs3), "--output", str(b)]) == 0
    assert body(a) == body(b)


def test_experiment(tmp_path, capsys):
    cfg = tmp_path / "x.cfg"
    cfg.write_text("h_schedule = 0.5,0.3\n")
    out = tmp_path / "out"
    assert main(["experiment", "--suite", "bounds", "--config", str(cfg),
                 "--output-dir", str(out)]) == 0
    assert "[PASS] bounds.sup_bound" in capsys.readouterr().out
    assert len(body(out / "bounds.csv")) == 3
    cfg.write_text("colour = blue\n")
    assert main(["experiment", "--suite", "bounds", "--config", str(cfg),
                 "--output-dir", str(out)]) == 1
    assert main(["experiment", "--suite", "nope", "--output-dir", str(out)]) == 1


def test_console_script_runs(tmp_path):
    res = subprocess.run([sys.executable, "-m", "voldens.cli", "validate-kernel", "--kernel", "flat"],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "tail_expansion" in res.stdout
