import json
import math
import subprocess
import sys

import pytest

from dysontau.cli import EXIT_FLAGGED, EXIT_INVALID, EXIT_OK, SCHEMAS, run


def _cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _run(capsys, argv):
    code = run(argv)
    return code, capsys.readouterr().out


def _csv_rows(text):
    lines = text.strip().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, line.split(","))) for line in lines[1:]]


def test_schur_tau_example(tmp_path, capsys):
    code, out = _run(capsys, ["schur-tau", "--config", _cfg(tmp_path, {"N": 2, "c": 1, "times": {}, "cutoff": 0})])
    assert code == EXIT_OK
    (row,) = _csv_rows(out)
    assert float(row["log_magnitude"]) == pytest.approx(2 * math.log(math.pi), rel=1e-14)
    assert row["error"] == "exact"


def test_json_format(tmp_path, capsys):
    code, out = _run(capsys, ["schur-tau", "--format", "json", "--config",
                              _cfg(tmp_path, {"N": [1, 2], "times": {"plus": [0.1, [0.0, 0.05]]}})])
    assert code == EXIT_OK
    rows = json.loads(out)
    assert [r["N"] for r in rows] == [1, 2]
    assert all("error" in r for r in rows)


def test_unknown_key_rejected(tmp_path, capsys):
    code, out = _run(capsys, ["schur-tau", "--config", _cfg(tmp_path, {"N": 2, "bogus": 1})])
    assert code == EXIT_INVALID and out == ""


def test_missing_config_and_bad_json(tmp_path, capsys):
    assert run(["fredholm-circle"]) == EXIT_INVALID
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run(["schur-tau", "--config", str(p)]) == EXIT_INVALID
    assert run(["no-such-command"]) == EXIT_INVALID


def test_every_schema_rejects_unknown_keys():
    for schema in SCHEMAS.values():
        assert schema["additionalProperties"] is False


def test_mc_tau_byte_identical(tmp_path):
    cfg = _cfg(tmp_path, {"N": [2], "samples": 20000, "times": {"plus": [0.1]}})
    outs = []
    for threads in ("1", "3", "1"):
        out = tmp_path / f"o{threads}{len(outs)}.csv"
        assert run(["mc-tau", "--config", cfg, "--seed", "7", "--threads", threads, "--out", str(out)]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_toeplitz_tau(tmp_path, capsys):
    code, out = _run(capsys, ["toeplitz-tau", "--config", _cfg(tmp_path, {"N": [0, 2], "times": {"plus": [0.2]}})])
    assert code == EXIT_OK
    rows = _csv_rows(out)
    assert float(rows[0]["log_magnitude"]) == 0
    assert float(rows[1]["error"]) < 1e-12


def test_hirota(tmp_path, capsys):
    code, out = _run(capsys, ["hirota", "--config", _cfg(tmp_path, {"family": "toeplitz", "points": 2, "n": [1]})])
    assert code == EXIT_OK
    assert all(float(r["residual"]) < 1e-4 for r in _csv_rows(out))


def test_fredholm_circle_and_expansion(tmp_path, capsys):
    cfg = _cfg(tmp_path, {"epsilon": 0.5, "fugacity": 0.1, "M": 64})
    code, out = _run(capsys, ["fredholm-circle", "--config", cfg])
    assert code == EXIT_OK and _csv_rows(out)[0]["flagged"] == "false"
    code, out = _run(capsys, ["grand-expansion", "--config", cfg])
    assert code == EXIT_OK
    rows = _csv_rows(out)
    assert rows[0]["error"] == "exact" and float(rows[0]["log_magnitude"]) == 0


def test_fredholm_halfplane(tmp_path, capsys):
    cfg = _cfg(tmp_path, {"epsilon": 0.5, "times": {"plus": [[0, 0.1]]}, "imaginary_times": True})
    code, out = _run(capsys, ["fredholm-halfplane", "--config", cfg])
    assert code == EXIT_OK
    assert float(_csv_rows(out)[0]["log_magnitude"]) > 0


def test_wick_verify(capsys):
    code, out = _run(capsys, ["wick-verify", "--seed", "3"])
    assert code == EXIT_OK
    assert all(r["passed"] == "true" for r in _csv_rows(out))


def test_dispersionless(tmp_path, capsys):
    code, out = _run(capsys, ["dispersionless", "--config",
                              _cfg(tmp_path, {"domain": {"variant": "disk", "radius": 1.0}, "h": 0.01})])
    assert code == EXIT_OK
    f0 = [r for r in _csv_rows(out) if r["quantity"] == "F0"][0]
    assert float(f0["re"]) == pytest.approx(-0.75, abs=1e-3)


def test_dispersionless_bitmap(tmp_path, capsys):
    bm = tmp_path / "b.txt"
    bm.write_text("h: 0.25\norigin: -0.5 -0.5\n####\n####\n####\n####\n")
    code, out = _run(capsys, ["dispersionless", "--config", _cfg(
        tmp_path, {"domain": {"variant": "bitmap", "path": str(bm)}, "quantities": ["moments"], "h": 0.05})])
    assert code == EXIT_OK
    assert float(_csv_rows(out)[0]["re"]) == pytest.approx(1 / math.pi)


def test_dispersionless_nonconvergent(tmp_path, capsys):
    cfg = _cfg(tmp_path, {"domain": {"variant": "disk", "radius": 1.0, "center": 3.0}, "quantities": ["moments"]})
    assert run(["dispersionless", "--config", cfg]) == EXIT_FLAGGED


def test_asymptotics(tmp_path, capsys):
    code, out = _run(capsys, ["asymptotics", "--config", _cfg(tmp_path, {"N": [10, 100]})])
    assert code == EXIT_OK
    devs = [float(r["deviation"]) for r in _csv_rows(out)]
    assert devs[1] < devs[0]


@pytest.mark.parametrize("target", ["fredholm-circle", "toeplitz-quadrature", "operator-integral"])
def test_crosscheck(capsys, target):
    code, out = _run(capsys, ["crosscheck", target])
    assert code == EXIT_OK
    assert all(float(r["delta"]) < 1e-6 for r in _csv_rows(out))


def test_crosscheck_schur_mc(tmp_path, capsys):
    code, out = _run(capsys, ["crosscheck", "schur-mc", "--config", _cfg(tmp_path, {"samples": 50000, "N": 2})])
    assert code == EXIT_OK


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "dysontau", "asymptotics"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0].startswith("N,")
