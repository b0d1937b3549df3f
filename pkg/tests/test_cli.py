import io
import json

import pytest

from padic_mhs.cli import EXIT_FAIL, EXIT_OK, EXIT_SHORTFALL, EXIT_USAGE, _status, main
from padic_mhs.pmzv import PhiApprox


def run(argv):
    buf = io.StringIO()
    code = main(argv, out=buf)
    return code, [json.loads(line) for line in buf.getvalue().splitlines()]


def test_harmonic_values():
    code, out = run(["harmonic", "--index", "1", "--upper", "5"])
    assert code == EXIT_OK and out == [{"value": "25/12"}]
    code, out = run(["harmonic", "--index", "2,1", "--upper", "4"])
    assert out[0]["value"] == "5/12"
    code, out = run(["harmonic", "--index", "1", "--upper", "5", "--p", "5", "--prec", "3"])
    assert out[0]["padic"] == {"p": 5, "v": 2, "unit": 73, "prec": 3}


def test_harmonic_variants():
    _, out = run(["harmonic", "--index", "1", "--upper", "10", "--exclude", "3"])
    assert out[0]["value"] == "621/280"
    _, out = run(["harmonic", "--index", "1,1", "--upper", "5", "--congruent", "2^1", "00"])
    _, plain = run(["harmonic", "--index", "1,1", "--upper", "5"])
    assert out == plain


@pytest.mark.parametrize("argv", [
    ["harmonic", "--index", "2,x", "--upper", "5"],
    ["harmonic", "--index", "0,1", "--upper", "5"],
    ["harmonic", "--index", "1", "--upper", "5", "--p", "5"],
    ["harmonic", "--index", "1,1", "--upper", "5", "--congruent", "2^1", "0"],
    ["solve", "--p", "5", "--max-weight", "6", "--max-depth", "3", "--prec", "3", "--out", "x.json"],
    ["frobnicate"],
])
def test_usage_errors(argv, capsys):
    code, _ = run(argv)
    assert code == EXIT_USAGE


def test_solve_writes_coefficients(tmp_path):
    path = tmp_path / "phi.json"
    code, out = run(["solve", "--p", "7", "--max-weight", "8", "--prec", "4", "--out", str(path)])
    assert code == EXIT_OK and out[0]["status"] == "ok" and out[0]["below_target"] == []
    phi = PhiApprox.from_json(json.loads(path.read_text()))
    assert phi.z1[4].is_zero and phi.z1[4].absprec >= 4
    code, recs = run(["verify", "theorem1", "--p", "7", "--max-N", "1", "--max-depth", "1",
                      "--max-weight", "3", "--prec", "2", "--phi", str(path)])
    assert code == EXIT_OK and all(r["agree"] for r in recs)


def test_verify_exact_identities():
    for name in ("addition", "multiplication", "translation"):
        code, recs = run(["verify", name, "--max-N", "5", "--max-depth", "2", "--max-weight", "2"])
        assert code == EXIT_OK, name
        assert recs and all(r["equal"] for r in recs)
        assert all(isinstance(r["runtime_us"], int) for r in recs)


def test_verify_digits():
    code, recs = run(["verify", "digits", "--p", "2", "--N", "7", "--max-depth", "1", "--max-weight", "2",
                      "--L-max", "20"])
    assert code == EXIT_OK
    assert recs[0]["params"]["cutpoints"] == [4, 6]


def test_verify_reindex():
    code, recs = run(["verify", "reindex", "--p", "5", "--k", "1", "--index", "2,1", "--index", "3"])
    assert code == EXIT_OK and all(r["fermat_equal"] for r in recs)


def test_verify_yasuda_hirose_and_theorem2():
    code, recs = run(["verify", "yasuda-hirose", "--p", "7", "--max-depth", "1", "--max-weight", "3"])
    assert code == EXIT_OK and len(recs) == 3
    code, recs = run(["verify", "theorem2", "--p", "5", "--index", "2", "--prec", "3"])
    assert code == EXIT_OK and [r["params"]["k"] for r in recs] == [1, 2]


def test_sampled_grid_is_reproducible():
    argv = ["verify", "addition", "--samples", "3", "--max-N", "4"]
    _, a = run(argv)
    _, b = run(argv)
    strip = lambda recs: [{k: v for k, v in r.items() if k != "runtime_us"} for r in recs]
    assert strip(a) == strip(b)


def test_status_codes():
    assert _status([{"equal": True}, {"agree": True}]) == EXIT_OK
    assert _status([{"agree": True, "degraded": True}]) == EXIT_SHORTFALL
    recs = [{"equal": False}, {"agree": True, "degraded": True}, {"equal": False}]
    assert _status(recs) == EXIT_FAIL
    assert recs[0]["failed"] and recs[2]["failed"]
