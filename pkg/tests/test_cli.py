"""Command-line interface: problem files, exit codes and JSON reports."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from foliquant import cli, exprlang
from foliquant.quant import OperatorTable

PROBLEM = """\
[dims]
p = 1
q = 2

[connection]
Gamma[1][1][2] = 0.2*x1 + y1
Gamma[2][2][3] = 0.3*y1*y2
Gamma[3][2][2] = y2^2 - 0.1

[symbol]
degree = 2
S[2][3] = 1 + y1
S[1][1] = x1*y2
S[3][3] = 0.5

[function]
f = sin(y1) + y2^2*y1

[points]
m1 = 0.1, 0.2, 0.3
m2 = -0.2, 0.1, 0.4
"""


def write(tmp_path, text, name="problem.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# =============================================================================
# validate
# =============================================================================


class TestValidate:
    def test_adapted_problem(self, tmp_path, capsys):
        code, out, _ = run(capsys, "validate", write(tmp_path, PROBLEM))
        report = json.loads(out)
        assert code == 0
        assert report["schema"] == 1 and report["valid"] and report["violations"] == []

    def test_mixed_block_violation(self, tmp_path, capsys):
        text = PROBLEM.replace("[connection]\n", "[connection]\nGamma[2][1][3] = y1\n")
        code, out, err = run(capsys, "validate", write(tmp_path, text))
        assert code == 1
        assert "Γ^𝔨_{iλ}=0" in err
        assert json.loads(out)["violations"] == ["Γ^𝔨_{iλ}=0"]

    def test_codimension_one(self, tmp_path, capsys):
        text = "[dims]\np = 1\nq = 1\n[symbol]\ndegree = 0\n[function]\nf = 1\n[points]\nm = 0, 0\n"
        code, _, err = run(capsys, "validate", write(tmp_path, text))
        assert code == 1
        assert "different from 1" in err


# =============================================================================
# Problem-file errors
# =============================================================================


class TestConfigErrors:
    def test_byte_offset_points_at_offending_character(self, tmp_path, capsys):
        text = PROBLEM.replace("0.3*y1*y2", "0.3*y1 + * y2")
        code, _, err = run(capsys, "quantize", write(tmp_path, text))
        assert code == 2
        offset = int(err.split("(byte ")[1].split(")")[0])
        assert text.encode()[offset:offset + 1] == b"*"
        assert text.encode()[offset - 2:offset] == b"+ "

    def test_byte_offset_counts_multibyte_comments(self, tmp_path, capsys):
        text = PROBLEM.replace("[dims]", "; connexion affine à feuilletage\n[dims]").replace("y2^2*y1", "y2^2*z1")
        code, _, err = run(capsys, "quantize", write(tmp_path, text))
        assert code == 2
        offset = int(err.split("(byte ")[1].split(")")[0])
        assert text.encode()[offset:offset + 2] == b"z1"

    @pytest.mark.parametrize(
        "old, new",
        [
            ("p = 1", "p = one"),
            ("Gamma[1][1][2]", "Gamma[1][1]"),
            ("S[3][3]", "S[3]"),
            ("S[3][3]", "S[2][3] "),
            ("m2 = -0.2, 0.1, 0.4", "m2 = -0.2, 0.1"),
            ("Gamma[1][1][2]", "Gamma[4][1][2]"),
        ],
    )
    def test_malformed_entries(self, tmp_path, capsys, old, new):
        code, _, err = run(capsys, "quantize", write(tmp_path, PROBLEM.replace(old, new, 1)))
        assert code == 2
        assert err.startswith("error:")

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(capsys, "validate", str(tmp_path / "absent.ini"))
        assert code == 2

    def test_point_index_out_of_range(self, tmp_path, capsys):
        code, _, _ = run(capsys, "quantize", write(tmp_path, PROBLEM), "--point", "5")
        assert code == 2


# =============================================================================
# quantize
# =============================================================================


class TestQuantize:
    def test_degree_zero_multiplies(self, tmp_path, capsys):
        text = PROBLEM.replace("degree = 2\nS[2][3] = 1 + y1\nS[1][1] = x1*y2\nS[3][3] = 0.5", "degree = 0\nS = 2 + y2")
        code, out, _ = run(capsys, "quantize", write(tmp_path, text), "--point", "1")
        value = json.loads(out)["value"]
        expected = (2 + 0.4) * (math.sin(0.1) + 0.4**2 * 0.1)
        assert code == 0
        assert value == pytest.approx(expected, abs=1e-14)

    def test_foliated_mode_matches_adapted(self, tmp_path, capsys):
        path = write(tmp_path, PROBLEM)
        _, out_a, _ = run(capsys, "quantize", path)
        _, out_f, _ = run(capsys, "quantize", path, "--mode", "foliated")
        a, f = json.loads(out_a), json.loads(out_f)
        assert f["point"] == [0.2, 0.3]
        assert f["value"] == pytest.approx(a["value"], abs=1e-10)

    def test_emitted_operator_reproduces_value(self, tmp_path, capsys):
        code, out, _ = run(capsys, "quantize", write(tmp_path, PROBLEM), "--emit-operator")
        report = json.loads(out)
        op = report["operator"]
        assert code == 0
        assert op["k"] == 2 and op["q"] == 2
        assert op["C"] == {"0": "1", "1": "2/5", "2": "0"}
        coeffs = {tuple(int(v) for v in key.split(",")): val for key, val in op["coefficients"].items()}
        table = OperatorTable(np.array(op["base_point"]), op["degree"], 3, coeffs)
        f = exprlang.parse("sin(y1) + y2^2*y1", 1, 2)
        assert table.apply(f) == pytest.approx(report["value"], abs=1e-10)

    def test_output_is_byte_identical_across_runs(self, tmp_path):
        path = write(tmp_path, PROBLEM)
        cmd = [sys.executable, "-m", "foliquant.cli", "quantize", path, "--emit-operator"]
        first = subprocess.run(cmd, capture_output=True, check=True).stdout
        second = subprocess.run(cmd, capture_output=True, check=True).stdout
        assert first == second


# =============================================================================
# verify
# =============================================================================


class TestVerify:
    def test_single_suite(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "q1-rejection", "--seed", "3")
        report = json.loads(out)
        assert code == 0
        assert report["schema"] == 1 and report["seed"] == 3 and report["passed"]
        assert [r["name"] for r in report["reports"]] == ["q1-rejection"]

    def test_seed_from_environment(self, capsys, monkeypatch):
        monkeypatch.setenv("FOLIQUANT_SEED", "11")
        _, out, _ = run(capsys, "verify", "--suite", "q1-rejection")
        assert json.loads(out)["seed"] == 11

    def test_json_file(self, tmp_path, capsys):
        dest = tmp_path / "report.json"
        code, out, _ = run(capsys, "verify", "--suite", "q1-rejection", "--json", str(dest))
        assert code == 0
        assert out.startswith("PASS q1-rejection")
        assert json.loads(dest.read_text())["schema"] == 1

    def test_unknown_suite_lists_names(self, capsys):
        code, _, err = run(capsys, "verify", "--suite", "nope")
        assert code == 2
        assert "normality" in err and "q1-rejection" in err

    def test_console_script_help(self):
        out = subprocess.run([sys.executable, "-m", "foliquant.cli", "--help"], capture_output=True, text=True)
        assert out.returncode == 0
        assert "quantize" in out.stdout
