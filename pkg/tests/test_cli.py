import json

import pytest

from polylocal.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_daub4(capsys):
    code, out, _ = run(capsys, "validate", "--stencil", "daub4", "--n", "128")
    assert code == 0
    assert json.loads(out)["ok"]


def test_validate_failure_exit_code(capsys):
    code, out, _ = run(capsys, "validate", "--stencil", "daub4", "--n", "12")
    assert code == 2
    assert "N power of two" in json.loads(out)["failed"]


def test_factor_haar(capsys):
    code, out, _ = run(capsys, "factor", "--stencil", "haar", "--n", "64")
    assert code == 0
    d = json.loads(out)
    assert d["factorization_residual"] <= 1e-10
    assert {"K", "L_I", "unitarity_residual", "band_width", "block_residual"} <= set(d)


def test_factor_too_small(capsys):
    code, _, err = run(capsys, "factor", "--stencil", "daub4", "--n", "16")
    assert code == 2 and "N >= 64" in err


def test_compile_pyramid_fallback(capsys, tmp_path):
    out_file = tmp_path / "c.json"
    code, _, _ = run(capsys, "compile", "--stencil", "daub4", "--n", "16", "--mode", "pyramid", "--out", str(out_file))
    assert code == 0
    c = json.loads(out_file.read_text())
    assert c["n_qubits"] == 4 and any(g["kind"] == "BLOCK" for g in c["gates"])


def test_compile_then_simulate(capsys, tmp_path):
    path = tmp_path / "c.json"
    assert main(["compile", "--stencil", "haar", "--n", "64", "--lower", "--out", str(path)]) == 0
    capsys.readouterr()
    code, out, err = run(capsys, "simulate", "--circuit", str(path), "--seed", "3")
    assert code == 0 and "seed=3" in err
    lines = out.splitlines()
    assert lines[0] == "index,re,im" and len(lines) == 65


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["validate", "--bogus"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        main(["nope"])
    assert exc.value.code == 64
    code, _, _ = run(capsys, "validate", "--stencil", "haar")
    assert code == 64


def test_sample_is_deterministic(capsys):
    args = ("sample", "--stencil", "daub4", "--n", "32", "--mode", "pyramid", "--shots", "500", "--seed", "4")
    a = run(capsys, *args)
    b = run(capsys, *args)
    assert a == b and a[1].startswith("outcome,count\n")
    assert sum(int(line.split(",")[1]) for line in a[1].splitlines()[1:]) == 500


def test_dwt_with_input(capsys, tmp_path):
    src = tmp_path / "x.csv"
    src.write_text("value\n1\n1\n1\n1\n")
    code, out, _ = run(capsys, "dwt", "--stencil", "haar", "--input", str(src), "--min-size", "2")
    assert code == 0
    idx, re, im = out.splitlines()[1].split(",")
    assert idx == "0" and float(re) == pytest.approx(2.0) and float(im) == 0.0


def test_invert_oracle(capsys):
    code, out, _ = run(capsys, "invert-oracle", "--n", "3", "--a", "3", "--c", "1", "--y", "4")
    d = json.loads(out)
    assert code == 0 and d["x"] == 1 and d["oracle_calls"] == 1 and d["seed"] == 0
    code, _, _ = run(capsys, "invert-oracle", "--n", "3", "--a", "2")
    assert code == 2


def test_cascade_csv(capsys):
    code, out, _ = run(capsys, "cascade", "--stencil", "haar", "--iterations", "1", "--grid", "2", "--function", "psi")
    assert code == 0
    assert out.splitlines()[0] == "x,psi"
    assert len(out.splitlines()[1].split(",")) == 2


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('stencil = "haar"\nn = 12\n')
    code, out, _ = run(capsys, "validate", "--config", str(cfg))
    assert code == 2
    code, out, _ = run(capsys, "validate", "--config", str(cfg), "--n", "16")
    assert code == 0 and json.loads(out)["N"] == 16


def test_unknown_stencil(capsys):
    code, _, err = run(capsys, "validate", "--stencil", "nope.json", "--n", "16")
    assert code == 2 and "unknown stencil" in err


@pytest.mark.slow
def test_report_is_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["report", "--out", str(a), "--n-max", "256", "--shots", "20000"]) == 0
    assert main(["report", "--out", str(b), "--n-max", "256", "--shots", "20000"]) == 0
    assert a.read_bytes() == b.read_bytes()
    d = json.loads(a.read_text())
    assert d["config"]["seed"] == 0
    assert d["criteria"]["11_gate_scaling"]["n"] == list(range(6, 13))
