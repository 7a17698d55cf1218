import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from sek import io
from sek.cli import main
from sek.errors import ArgumentError
from sek.measurement import fourier, random_povm
from sek.states import random_state

GOLDEN = Path(__file__).parent / "golden"


def data(name):
    return str(io.data_file(name))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# --- file formats ----------------------------------------------------------


def test_state_roundtrip(tmp_path):
    s = random_state((2, 3), seed=4, labels=("A", "B"))
    path = tmp_path / "s.json"
    io.save_state(s, path)
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n")
    back = io.load_state(path)
    assert np.array_equal(back.matrix, s.matrix)
    assert back.labels == s.labels and back.dims == s.dims


def test_povm_roundtrip(tmp_path):
    p = random_povm(3, 4, 1)
    io.save_povm(p, tmp_path / "p.json")
    back = io.load_povm(tmp_path / "p.json")
    assert all(np.array_equal(a, b) for a, b in zip(back.elements, p.elements))
    assert json.loads((tmp_path / "p.json").read_text())["dim"] == 3


def test_malformed_inputs(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ArgumentError):
        io.load_state(bad)
    bad.write_text(json.dumps({"labels": ["A"], "dims": [2], "matrix": [[1, 0], [0, 1]]}))
    with pytest.raises(ArgumentError):
        io.load_state(bad)


def test_bundled_files():
    assert io.load_povm(data("mub3_fourier.json")).dim == 3
    assert np.allclose(io.load_povm(data("mub3_fourier.json")).elements[1], fourier(3).elements[1])
    assert io.load_state(data("phi_plus.json")).is_pure()


# --- entropy ---------------------------------------------------------------


def test_entropy_min_phi(capsys):
    code, out, _ = run(capsys, "entropy", data("phi_plus.json"), "--target", "A", "--condition", "B", "--kind", "min")
    assert code == 0
    obj = json.loads(out)
    assert obj["kind"] == "min" and obj["eps"] == 0.0
    assert obj["value_bits"] == pytest.approx(-1.0, abs=1e-6)


def test_entropy_default_eps_identical(capsys):
    args = ["entropy", data("phi_plus.json"), "--target", "A", "--condition", "B"]
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args, "--eps", "0")
    assert a == b


def test_entropy_missing_file(capsys, tmp_path):
    code, out, err = run(capsys, "entropy", str(tmp_path / "none.json"), "--target", "A")
    assert code == 2 and out == "" and "error" in err


def test_entropy_non_psd_file(capsys, tmp_path):
    path = tmp_path / "bad.json"
    m = np.diag([1.2, -0.2])
    path.write_text(json.dumps({"labels": ["A"], "dims": [2], "matrix": io.matrix_to_json(m)}))
    code, _, _ = run(capsys, "entropy", str(path), "--target", "A")
    assert code == 2


def test_entropy_bad_eps(capsys):
    code, _, _ = run(capsys, "entropy", data("phi_plus.json"), "--target", "A", "--eps", "1.5")
    assert code == 2


def test_entropy_numerical_failure_exit(capsys, monkeypatch):
    import sek.cli as cli
    from sek.errors import NumericalFailure

    def fail(*a, **k):
        raise NumericalFailure("forced", {"status": "numerical-failure"})

    monkeypatch.setattr(cli, "h_min_smooth", fail)
    code, _, err = run(capsys, "entropy", data("phi_plus.json"), "--target", "A", "--condition", "B")
    assert code == 3 and "forced" in err


def test_entropy_dimension_cap(capsys, monkeypatch):
    monkeypatch.setenv("SEK_MAX_DIM", "2")
    code, _, err = run(capsys, "entropy", data("phi_plus.json"), "--target", "A", "--condition", "B")
    assert code == 2 and "exceeds" in err


# --- overlap ---------------------------------------------------------------


def test_overlap_bb84(capsys):
    code, out, _ = run(capsys, "overlap", data("bb84_z.json"), data("bb84_x.json"))
    assert code == 0
    assert json.loads(out)["q_bits"] == pytest.approx(1.0, abs=1e-12)


def test_overlap_same_file(capsys):
    _, out, _ = run(capsys, "overlap", data("bb84_x.json"), data("bb84_x.json"))
    assert json.loads(out)["q_bits"] == pytest.approx(0.0, abs=1e-12)


def test_overlap_mub3(capsys):
    _, out, _ = run(capsys, "overlap", data("mub3_computational.json"), data("mub3_fourier.json"))
    assert json.loads(out)["q_bits"] == pytest.approx(math.log2(3), abs=1e-9)


def test_overlap_dim_mismatch(capsys):
    code, _, _ = run(capsys, "overlap", data("bb84_x.json"), data("mub3_fourier.json"))
    assert code == 2


# --- check -----------------------------------------------------------------


def test_check_mother(capsys, tmp_path):
    report = tmp_path / "r.json"
    code, out, _ = run(capsys, "check", "--relation", "mother", "--trials", "20", "--seed", "1", "--report", str(report))
    assert code == 0 and out.startswith("mother:")
    assert json.loads(report.read_text())["relations"]["mother"]["min_slack"] >= -2e-5


def test_check_child(capsys, tmp_path):
    report = tmp_path / "r.json"
    code, _, _ = run(capsys, "check", "--relation", "child", "--trials", "100", "--report", str(report))
    assert code == 0
    assert "min_slack" in json.loads(report.read_text())["relations"]["child"]


def test_check_tolerance_only_loosens(capsys, tmp_path):
    code, _, err = run(capsys, "check", "--relation", "mu", "--tolerance", "1e-12", "--report", str(tmp_path / "r.json"))
    assert code == 2 and "loosened" in err
    code, _, _ = run(capsys, "check", "--relation", "mu", "--tolerance", "1e-3", "--report", str(tmp_path / "r.json"))
    assert code == 0


def test_check_violation_exit(capsys, tmp_path, monkeypatch):
    import sek.uncertainty as unc

    monkeypatch.setattr(unc, "check_maassen_uffink", lambda s, x, z, **kw: unc._report("maassen_uffink", 0.0, 1.0, 0.0, kw.get("instance")))
    code, _, err = run(
        capsys, "check", "--relation", "mu", "--trials", "1", "--report", str(tmp_path / "r.json"), "--replay-dir", str(tmp_path)
    )
    assert code == 4 and "replay" in err
    assert list(tmp_path.glob("replay_*.json"))


def test_check_bad_dims(capsys):
    with pytest.raises(SystemExit) as info:
        main(["check", "--relation", "child", "--dims", "2,2"])
    assert info.value.code == 2


# --- qkd -------------------------------------------------------------------


def test_qkd_rate_curve(capsys):
    code, out, _ = run(capsys, "qkd", "--mode", "rate-curve", "--q", "1", "--delta-min", "0", "--delta-max", "0.25", "--steps", "26")
    rows = list(csv.DictReader(_io.StringIO(out)))
    assert code == 0 and len(rows) == 26
    assert float(rows[0]["rate"]) == 1.0


def test_qkd_key_length(capsys):
    _, out, _ = run(capsys, "qkd", "--mode", "key-length", "--n", "10000", "--delta", "0.05", "--q", "1")
    assert json.loads(out) == {"l": 4272}


def test_qkd_simulate(capsys):
    _, out, _ = run(capsys, "qkd", "--mode", "simulate", "--n", "1000", "--noise", "0", "--seed", "5")
    assert json.loads(out)["sampled_delta"] == 0.0


def test_qkd_invalid_ranges(capsys):
    assert run(capsys, "qkd", "--mode", "key-length", "--n", "10", "--delta", "0.7")[0] == 2
    assert run(capsys, "qkd", "--mode", "rate-curve", "--delta-min", "0.4", "--delta-max", "0.1")[0] == 2
    assert run(capsys, "qkd", "--mode", "simulate", "--n", "10", "--noise", "2")[0] == 2


# --- golden outputs --------------------------------------------------------


@pytest.mark.parametrize(
    "name, argv",
    [
        ("overlap_bb84.json", ["overlap", "@bb84_z.json", "@bb84_x.json"]),
        ("overlap_mub3.json", ["overlap", "@mub3_computational.json", "@mub3_fourier.json"]),
        ("key_length.json", ["qkd", "--mode", "key-length", "--n", "10000", "--delta", "0.05", "--q", "1"]),
        ("rate_curve.csv", ["qkd", "--mode", "rate-curve", "--q", "1", "--delta-min", "0", "--delta-max", "0.25", "--steps", "26"]),
        ("simulate_n1000_seed5.json", ["qkd", "--mode", "simulate", "--n", "1000", "--noise", "0", "--seed", "5"]),
        ("entropy_vn_phi.json", ["entropy", "@phi_plus.json", "--target", "A", "--condition", "B", "--kind", "vn"]),
    ],
)
def test_golden_stdout(capsys, name, argv):
    argv = [data(a[1:]) if a.startswith("@") else a for a in argv]
    code, out, _ = run(capsys, *argv)
    assert code == 0
    assert out == (GOLDEN / name).read_text(encoding="utf-8")


def test_golden_check_report(capsys, tmp_path):
    report = tmp_path / "r.json"
    code, out, _ = run(capsys, "check", "--relation", "child", "--trials", "5", "--seed", "2", "--report", str(report))
    assert code == 0
    assert out == (GOLDEN / "check_child_seed2.txt").read_text(encoding="utf-8")

    def strip(text):
        return [ln for ln in text.splitlines() if '"timestamp"' not in ln]

    assert strip(report.read_text()) == strip((GOLDEN / "check_child_seed2.json").read_text())
