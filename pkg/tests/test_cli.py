import csv
import io
import json

import pytest

from gwperc.cli import parse_grid, run

BINARY = '{"type": "finite", "pmf": [["2", 1.0]]}'
MIXED = '{"type": "finite", "pmf": [["1", 0.5], ["3", 0.5]]}'


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_coeffs(capsys, tmp_path):
    path = tmp_path / "binary.json"
    path.write_text(BINARY)
    code, out, _ = call(capsys, "coeffs", "--dist", str(path), "--order", "3")
    assert code == 0
    data = json.loads(out)
    assert data["r"] == pytest.approx([8, -32, 96], abs=1e-9)
    assert data["p_c"] == 0.5 and data["K"] == 8


def test_verify_constants(capsys):
    code, out, _ = call(capsys, "verify", "--suite", "constants", "--dist", BINARY, "--order", "4")
    assert code == 0 and json.loads(out)["pass"] is True


def test_usage_errors(capsys):
    code, _, err = call(capsys, "coeffs")
    assert code == 2 and "usage" in err
    assert call(capsys, "frobnicate")[0] == 2
    assert call(capsys, "coeffs", "--dist", BINARY, "--bogus")[0] == 2
    assert call(capsys, "survival", "--dist", BINARY, "--p", "0.9:0.1:0.1")[0] == 2
    assert call(capsys, "stats", "--dist", BINARY, "--seed", "-1")[0] == 2
    assert call(capsys, "coeffs", "--dist", '{"type": "finite", "pmf": [["1", 1.0]]}')[0] == 2


def test_grid():
    assert list(parse_grid("0.6:0.8:0.1")) == [0.6, 0.7, 0.8]
    assert list(parse_grid("0.5")) == [0.5]
    with pytest.raises(Exception):
        parse_grid("0:1:0.5")


def test_csv_outputs_deterministic(capsys):
    runs = [call(capsys, "survival", "--dist", MIXED, "--depth", "8", "--p", "0.6:0.9:0.1", "--mc", "500")
            for _ in range(2)]
    assert runs[0] == runs[1]
    rows = list(csv.DictReader(io.StringIO(runs[0][1])))
    assert list(rows[0]) == ["p", "g_exact", "g_mc", "se"] and len(rows) == 4
    code, out, _ = call(capsys, "stats", "--dist", MIXED, "--depth", "3")
    assert out.splitlines()[0] == "n,j,k,X,Y,deltaA"
    code, out, _ = call(capsys, "martingale", "--dist", BINARY, "--depth", "4", "--order", "3")
    assert out.splitlines()[:2] == ["n,i,M", "0,1,8.0"]


def test_out_and_threads(capsys, tmp_path):
    target = tmp_path / "c.json"
    code, out, _ = call(capsys, "--threads", "1", "coeffs", "--dist", BINARY, "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["r"][0] == pytest.approx(8)


def test_russo_and_collapsed(capsys):
    code, out, _ = call(capsys, "russo", "--dist", MIXED, "--depth", "12", "--p", "0.75", "--reps", "5000")
    data = json.loads(out)
    assert set(data) >= {"fd_derivative", "russo_estimate", "se", "pass"}
    assert code == (0 if data["pass"] else 1)
    code, out, _ = call(capsys, "collapsed", "--dist", BINARY, "--v", "(())", "--f", "1", "--p", "0.75",
                        "--reps", "5000", "--verify")
    data = json.loads(out)
    assert len(data["derivative_terms"]) == 9 and "verify" in data
    assert call(capsys, "collapsed", "--dist", BINARY, "--v", "(()())", "--f", "1", "--p", "0.75")[0] == 2


@pytest.mark.parametrize("suite", ["martingale", "expansion"])
def test_other_suites(capsys, suite):
    code, out, _ = call(capsys, "verify", "--suite", suite, "--dist", BINARY, "--order", "3", "--seeds", "20")
    assert code == 0 and json.loads(out)["suite"] == suite
