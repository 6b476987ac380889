import json

import numpy as np
import pytest

from rmtclt.cli import main, parse_complex

from oracles import MP_COMPANION_I_Y1, f_support, mp_support


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.mark.parametrize("text,val", [("1+1i", 1 + 1j), ("2", 2), ("-0.5-2i", -0.5 - 2j), ("1i", 1j)])
def test_parse_complex(text, val):
    assert parse_complex(text) == val


def test_solve(capsys):
    code, out, err = run(capsys, "solve", "--z", "0+1i", "--y", "1")
    assert code == 0
    d = json.loads(out)
    assert complex(d["m_under"]["re"], d["m_under"]["im"]) == pytest.approx(MP_COMPANION_I_Y1, abs=1e-10)
    assert "seed" in err


def test_j_suffix_rejected():
    with pytest.raises(Exception):
        parse_complex("3+1j")


def test_solve_malformed_z(capsys):
    code, _, err = run(capsys, "solve", "--z", "one plus i", "--y", "1")
    assert code == 1 and err


def test_solve_bad_h(capsys):
    assert run(capsys, "solve", "--z", "1+1i", "--y", "0.5", "--h", "atoms=oops")[0] == 1


def test_solve_real_axis_point_inside_support(capsys):
    assert run(capsys, "solve", "--z", "1", "--y", "0.5")[0] == 2


def test_support_mp(capsys):
    code, out, _ = run(capsys, "support", "--y", "0.5")
    lo, hi = map(float, out.split())
    assert (lo, hi) == pytest.approx(mp_support(0.5), abs=1e-6)


def test_support_f(capsys):
    code, out, _ = run(capsys, "support", "--y1", "0.5", "--y2", "0.25")
    lo, hi = map(float, out.split())
    assert (lo, hi) == pytest.approx(f_support(0.5, 0.25), abs=1e-6)
    # documented example values, which agree only to about 1e-4
    assert (lo, hi) == pytest.approx((0.077961, 5.699897), abs=1e-3)


def test_support_needs_both_ratios(capsys):
    assert run(capsys, "support", "--y1", "0.5")[0] == 1


def _csv(out):
    return np.array([[float(v) for v in line.split(",")] for line in out.strip().splitlines()[1:]])


def test_density_mp_integrates_to_one(capsys):
    code, out, _ = run(capsys, "density", "--y", "0.5", "--grid", "4096")
    assert code == 0
    x, d = _csv(out).T
    assert np.trapezoid(d, x) == pytest.approx(1.0, abs=1e-4)


def test_density_f_vanishes_outside_support(capsys, tmp_path):
    path = tmp_path / "d.csv"
    code, _, _ = run(capsys, "density", "--y1", "0.5", "--y2", "0.25", "--grid", "2048", "-o", str(path))
    assert code == 0
    x, d = _csv(path.read_text()).T
    lo, hi = f_support(0.5, 0.25)
    assert np.all(d[(x < lo - 1e-9) | (x > hi + 1e-9)] == 0)
    assert np.trapezoid(d, x) == pytest.approx(1.0, abs=1e-3)


def test_lss(capsys):
    code, out, _ = run(capsys, "lss", "--p", "20", "--n", "40", "--f", "x^2", "--seed", "3")
    d = json.loads(out)
    assert code == 0 and d["ratios"] == [20 / 39]
    assert d["value"] == pytest.approx(d["raw_sum"] - 20 * d["centering"])


def test_lss_f_needs_big_n(capsys):
    assert run(capsys, "lss", "--pipeline", "f-centralized", "--p", "5", "--n", "20")[0] == 1


def test_verify_shift(capsys):
    code, out, err = run(capsys, "verify", "--lemma", "4.1")
    assert code == 0 and "PASS" in err
    assert json.loads(out)["lemma_id"] == "4.1"


def test_verify_interlacing(capsys):
    code, _, err = run(capsys, "verify", "--lemma", "interlacing", "--p", "10", "--n", "20", "--reps", "50")
    assert code == 0 and "PASS" in err


def test_verify_unknown(capsys):
    assert run(capsys, "verify", "--lemma", "9.9")[0] == 1


def test_missing_config_is_io_error(capsys, tmp_path):
    assert run(capsys, "experiment", "--config", str(tmp_path / "missing.json"))[0] == 4


def test_bad_config_is_usage_error(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "experiment", "--config", str(bad))[0] == 1
    cfg = write(tmp_path / "c.json", {"pipeline": "cov-centralized", "p": 5, "n": 10, "zzz": 1})
    assert run(capsys, "experiment", "--config", cfg)[0] == 1


def test_unknown_subcommand(capsys):
    assert run(capsys, "frobnicate")[0] == 1


def test_experiment_writes_files(capsys, tmp_path):
    cfg = write(tmp_path / "c.json", {"pipeline": "cov-centralized", "p": 5, "n": 10, "reps": 30})
    out = tmp_path / "res.json"
    code, stdout, err = run(capsys, "experiment", "--config", cfg, "--seed", "4", "-o", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["seed"] == 4 and len(doc["samples"]) == 30
    assert out.with_suffix(".csv").exists()
    assert '"master_seed": 4' in err


def test_experiment_verdict_failure_exit_code(capsys, tmp_path):
    # p = 1, n = 3: a scaled chi-square, far from Gaussian
    cfg = write(tmp_path / "c.json", {"pipeline": "cov-centralized", "p": 1, "n": 3, "reps": 500})
    code, out, _ = run(capsys, "experiment", "--config", cfg, "-o", str(tmp_path / "r.json"))
    assert code == 3 and "FAIL" in out


def test_compare(capsys, tmp_path):
    a = {"pipeline": "cov-centralized", "p": 10, "n": 20, "reps": 100, "master_seed": 1}
    b = dict(a, pipeline="cov-simplified", n=20, master_seed=2)
    cfg = write(tmp_path / "c.json", {"a": a, "b": b})
    out = tmp_path / "cmp.json"
    code, stdout, _ = run(capsys, "compare", "--config", cfg, "-o", str(out))
    rep = json.loads(out.read_text())
    assert code == (0 if rep["verdict"] else 3)
    assert (tmp_path / "cmp_a.json").exists() and (tmp_path / "cmp_b.csv").exists()


def test_compare_rejects_mismatch(capsys, tmp_path):
    a = {"pipeline": "cov-centralized", "p": 10, "n": 20}
    cfg = write(tmp_path / "c.json", {"a": a, "b": dict(a, p=11)})
    assert run(capsys, "compare", "--config", cfg)[0] == 1


def test_bias_demo(capsys, tmp_path):
    out = tmp_path / "b.json"
    code, stdout, _ = run(capsys, "bias-demo", "--p", "10", "--n", "20", "--reps", "20", "-o", str(out))
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["offset"] == pytest.approx(100 / (20 * 19), rel=1e-9)


@pytest.mark.parametrize("name", ["compare_cov_x2", "compare_f_log", "trace_moments", "two_level_threepoint"])
def test_shipped_configs_parse(name):
    from pathlib import Path

    from rmtclt.harness import ExperimentConfig

    doc = json.loads((Path(__file__).parent.parent / "configs" / f"{name}.json").read_text())
    for d in (doc["a"], doc["b"]) if "a" in doc else (doc,):
        ExperimentConfig.from_dict(d)
