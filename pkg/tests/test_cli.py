import csv
import json
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dbarlab.cli import EXIT_ERROR, EXIT_FAILED, EXIT_OK, EXIT_USAGE, parse_floats, parse_ints, run


@pytest.mark.parametrize("text, expect", [("4", [4]), ("4..7", [4, 5, 6, 7]), ("1,3..4,9", [1, 3, 4, 9])])
def test_parse_ints(text, expect):
    assert parse_ints(text) == expect


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=6))
def test_parse_floats_round_trip(xs):
    assert parse_floats(",".join(repr(x) for x in xs)) == xs


@pytest.mark.parametrize("text", ["", ",", "a..b"])
def test_parse_ints_rejects(text):
    with pytest.raises(ValueError):
        parse_ints(text)


def _doc(path):
    return json.loads(path.read_text())


def test_selftest(tmp_path):
    assert run(["selftest", "--out", str(tmp_path)]) == EXIT_OK
    doc = _doc(tmp_path / "selftest.json")
    assert {"schema", "command", "config", "status", "timestamp", "results"} <= set(doc)


def test_lemma1_small(tmp_path):
    code = run(["verify-lemma1", "--tau", "1,5", "--fields", "2", "--resolution", "128", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert len(_doc(tmp_path / "verify_lemma1.json")["results"]) == 4


def test_jobs_match_serial(tmp_path):
    args = ["verify-lemma2", "--tau", "2,8", "--fields", "2", "--resolution", "128"]
    run(args + ["--out", str(tmp_path / "a")])
    run(args + ["--out", str(tmp_path / "b"), "--jobs", "2"])
    ra = _doc(tmp_path / "a" / "verify_lemma2.json")["results"]
    rb = _doc(tmp_path / "b" / "verify_lemma2.json")["results"]
    assert [r["margin"] for r in ra] == [r["margin"] for r in rb]


def test_decay_csv(tmp_path):
    assert run(["decay-report", "--n", "6..8", "--format", "csv", "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "decay_report.csv")))
    assert [int(r["n"]) for r in rows] == [6, 7, 8]
    assert {"log2_sup_u", "bound", "local_order"} <= set(rows[0])


def test_remark2(tmp_path):
    assert run(["remark2", "--n", "40", "--out", str(tmp_path)]) == EXIT_OK
    recs = {r["p"]: (r["term1_ok"], r["term2_ok"]) for r in _doc(tmp_path / "remark2.json")["results"]}
    assert recs == {1.5: (True, False), 2.0: (True, True), 3.0: (False, True)}


def test_failed_claim_exit(tmp_path):
    # a negative tolerance cannot be met
    code = run(["sharpness", "--alpha", "0.3", "--tolerance", "-1", "--out", str(tmp_path)])
    assert code == EXIT_FAILED
    assert _doc(tmp_path / "sharpness.json")["status"]["claims_hold"] is False


def test_library_error_exit(tmp_path, capsys):
    assert run(["ratio-report", "--n", "3", "--out", str(tmp_path)]) == EXIT_ERROR
    assert "ParameterError" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["nope"], ["decay-report", "--n", "x"], ["remark2", "--bogus"]])
def test_usage_exit(argv):
    with pytest.raises(SystemExit) as exc:
        run(argv)
    assert exc.value.code == EXIT_USAGE


def test_out_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DBARLAB_OUT", str(tmp_path))
    r = subprocess.run([sys.executable, "-m", "dbarlab", "remark2"], capture_output=True, text=True)
    assert r.returncode == EXIT_OK
    assert (tmp_path / "remark2.json").exists()


def test_reduce_dump(tmp_path):
    assert run(["reduce", "--resolution", "128", "--dump", "--out", str(tmp_path)]) == EXIT_OK
    rec = _doc(tmp_path / "reduce.json")["results"][0]
    assert rec["kappa"] < 1 and rec["zero_sets_match"]
    assert any(p.name.startswith("reduce_v") for p in tmp_path.iterdir())
