import io
import json
import subprocess
import sys
from fractions import Fraction
from importlib import resources

import jsonschema
import pytest

from star_forge.algebra import SymplecticFrame, WeylSeries, moyal_product
from star_forge.cli import AUDITS, run_command
from star_forge.parser import parse_series

SCHEMA = json.loads(resources.files("star_forge").joinpath("schema/output.schema.json").read_text())


def run(*argv):
    out = io.StringIO()
    code = run_command(list(argv), out)
    return code, out.getvalue()


def run_json(*argv):
    code, text = run(*argv, "--format", "json")
    assert code == 0, text
    doc = json.loads(text)
    jsonschema.validate(doc, SCHEMA)
    return doc


def test_star_matches_library():
    code, text = run("star", "Z1", "Z2", "-n", "1", "-N", "6")
    assert code == 0
    frame = SymplecticFrame.minus(1)
    want = moyal_product(WeylSeries.fiber_var(1, 0, 6), WeylSeries.fiber_var(1, 1, 6), frame)
    assert text == want.canonical_text() + "\n"
    assert text == "1 * Z1 * Z2 + -1/2 * nu\n"


def test_lambda_flag_flips_sign():
    _, a = run("commutator", "Z1", "Z2")
    _, b = run("commutator", "Z1", "Z2", "--lambda", "plus")
    assert a == "-1 * nu\n" and b == "1 * nu\n"


def test_audit_ccr_passes():
    code, text = run("audit", "ccr", "-n", "2", "-N", "8")
    assert code == 0
    assert text.splitlines()[0] == "PASS"
    assert "[Z1,Z3] = -1 * nu  ok" in text


def test_starexp_compare_zero_block():
    doc = run_json("starexp", "--A", "identity", "-n", "1", "-K", "4", "--compare")
    assert doc["result"]["equal"] is True
    assert all(t == "0" for t in doc["result"]["difference"])
    assert doc["result"]["taylor"] == doc["result"]["closed"]


@pytest.mark.parametrize("argv", [
    ("star", "Z1", "Z2"),
    ("commutator", "Z1 * Z1", "Z2"),
    ("sharp", "z1^2"),
    ("bch", "z1^3", "z1 * z2^2"),
    ("factorize", "Z1", "Z2 + Z1^2"),
    ("fedosov", "--battery", "quadratic", "-N", "4"),
    ("starexp", "--A", "[[1,0],[0,2]]", "--riccati", "0.5", "--steps", "200"),
    ("lift", "z1", "z2 + z1^3"),
    ("dgla", "mc-check", "--order", "2"),
    ("audit", "hodge", "--trials", "3"),
])
def test_json_output_validates(argv):
    doc = run_json(*argv)
    assert doc["status"] == "ok"


def test_riccati_floats_are_tagged():
    doc = run_json("starexp", "--riccati", "0.5", "--steps", "100")
    assert doc["result"]["riccati"]["type"] == "float"
    bad = json.loads(json.dumps(doc))
    bad["result"]["riccati"].pop("type")
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, SCHEMA)
    bad = json.loads(json.dumps(doc))
    bad["result"]["extra"] = 0.5
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, SCHEMA)


@pytest.mark.parametrize("argv, code", [
    (("star", "Z1 +", "Z2"), 2),
    (("star", "Z1", "Z5"), 2),
    (("bogus",), 2),
    (("star", "Z1"), 2),
    (("factorize", "Z1"), 2),
    (("lift", "2 * z1", "z2"), 1),
    (("fedosov", "--state", "/nonexistent/state.json"), 1),
    (("starexp", "--riccati", "1.7", "--steps", "1000"), 1),
])
def test_exit_codes(argv, code, capsys):
    assert run(*argv)[0] == code
    assert capsys.readouterr().err


def test_fedosov_battery_flat():
    for battery in ("zero", "nu2", "quadratic"):
        doc = run_json("fedosov", "--battery", battery, "-N", "5")
        assert doc["result"]["flat"] is True
        assert doc["result"]["defect"] == "0"


def test_fedosov_state_with_wrong_curvature(tmp_path):
    state = {"n": 1, "lambda": "minus", "N": 4, "R": "nu * Z1 * Z1 * dz1 * dz2"}
    path = tmp_path / "state.json"
    path.write_text(json.dumps(state))
    doc = run_json("fedosov", "--state", str(path))
    assert doc["result"]["flat"] is False
    assert doc["result"]["curvature_mismatch"] != "0"
    state["gamma"] = [[0, 0]]
    path.write_text(json.dumps(state))
    assert run("fedosov", "--state", str(path))[0] == 1


def test_lift_reports_defect_and_repair():
    doc = run_json("lift", "z1 + (z2 + z1^3)^3", "z2 + z1^3", "-N", "5")
    res = doc["result"]
    assert res["defects"]["3"]["1,2"] != "0"
    assert res["closed"]["3"] is True
    assert res["repaired"] is True


def test_dgla_file(tmp_path):
    from star_forge.dgla import moyal_cochains
    B = moyal_cochains(SymplecticFrame.minus(1), 2)
    data = {"dim": 2, "B": {"1": B[1].to_json(), "2": B[2].to_json()}}
    good = tmp_path / "good.json"
    good.write_text(json.dumps(data))
    assert run_json("dgla", "mc-check", str(good), "--order", "2")["result"]["zero"] is True
    data["B"]["2"] = [dict(t, coeff=str(2 * Fraction(t["coeff"]))) for t in data["B"]["2"]]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    res = run_json("dgla", "mc-check", str(bad), "--order", "2")["result"]
    assert res["zero"] is False and res["orders"]["1"] == {} and res["orders"]["2"]


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nlambda = plus\nN = 4\n")
    _, text = run("commutator", "Z1", "Z2", "--config", str(cfg))
    assert text == "1 * nu\n"
    _, text = run("commutator", "Z1", "Z2", "--config", str(cfg), "--lambda", "minus")
    assert text == "-1 * nu\n"
    doc = run_json("star", "Z1", "Z2", "--config", str(cfg))
    assert doc["config"]["N"] == 4 and doc["config"]["lambda"] == "plus"


def test_out_file(tmp_path):
    path = tmp_path / "out.txt"
    code, text = run("star", "Z1", "Z2", "--out", str(path))
    assert code == 0 and text == ""
    assert path.read_text() == "1 * Z1 * Z2 + -1/2 * nu\n"


@pytest.mark.parametrize("which", sorted(AUDITS))
def test_audits_byte_deterministic(which):
    argv = ("audit", which, "--seed", "11", "--trials", "4", "--format", "json")
    first = run(*argv)
    second = run(*argv)
    assert first == second and first[0] == 0
    assert json.loads(first[1])["result"]["pass"] is True
    assert run("audit", which, "--seed", "12", "--trials", "4")[0] == 0


def test_audit_seed_changes_content():
    a = run("audit", "assoc", "--seed", "1", "--trials", "3", "--format", "json")[1]
    b = run("audit", "assoc", "--seed", "2", "--trials", "3", "--format", "json")[1]
    assert a != b


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "star_forge.cli", "sharp", "z1*z2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    frame = SymplecticFrame.minus(1)
    assert parse_series(proc.stdout.strip(), frame) == parse_series("(z1 + Z1) * (z2 + Z2)", frame, 6)
    proc = subprocess.run([sys.executable, "-m", "star_forge.cli", "star", "Z1 +", "Z2"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "line 1, column 5" in proc.stderr
