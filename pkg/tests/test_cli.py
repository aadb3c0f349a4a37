import json
import subprocess
import sys

from moserpairs.cli import main
from moserpairs.gallery import BUILDERS, builtin_documents

FAST = ["--grid", "5", "--t-steps", "20", "--seeds", "4", "--fourier-order", "2"]


def test_validate_builtin_exit_zero(capsys):
    assert main(["validate", "--scenario", "builtin:t3-cs-pair", "--report", "json"] + FAST) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["matched"] and report["first_mismatch"] is None


def test_mismatch_exit_one(tmp_path, capsys):
    doc = builtin_documents()["t3-cs-pair"]
    doc["tasks"] = [{"op": "validate", "structure": "main", "expect": "fail"}]
    path = tmp_path / "wrong.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", "--scenario", str(path)] + FAST) == 1
    assert capsys.readouterr().err.strip()


def test_input_errors_exit_two(tmp_path, capsys):
    doc = builtin_documents()["t3-cs-pair"]
    doc["forms"]["alpha"]["components"][0]["expr"] = "sin("
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", "--scenario", str(path)]) == 2
    assert main(["validate", "--scenario", "builtin:no-such"]) == 2
    assert main(["validate", "--scenario", str(tmp_path / "missing.json")]) == 2
    assert "input error" in capsys.readouterr().err


def test_out_directory_files(tmp_path):
    assert main(["all", "--scenario", "builtin:t4-exact", "--out", str(tmp_path)] + FAST) == 0
    report = json.loads((tmp_path / "t4-exact.all.json").read_text())
    assert [t["op"] for t in report["tasks"]][0] == "validate"
    assert (tmp_path / "t4-exact.all.txt").read_text().strip()


def test_list_and_export(tmp_path, capsys):
    assert main(["list"]) == 0
    listed = capsys.readouterr().out.split("\n")
    assert set(BUILDERS) <= set(listed)
    out = tmp_path / "t.json"
    assert main(["export", "ghys-nil", "--out", str(out)]) == 0
    assert main(["validate", "--scenario", str(out)] + FAST) == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "moserpairs", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "t4-exact" in proc.stdout
