import hashlib
import json
import subprocess
import sys

import pytest

from enn.cli import main
from enn.experiments import load_model

REPRODUCIBLE = ("model.json", "report.json", "error.csv", "experiment.cfg", "manifest.json")


def files_of(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes()
            for p in sorted(directory.rglob("*")) if p.is_file() and not p.name.startswith("timings.")}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_train_and_eval_are_bytewise_reproducible(tmp_path, capsys):
    for d in ("a", "b"):
        code, out, _ = run(["train", "--config", "logic_enn", "--out", str(tmp_path / d)], capsys)
        assert code == 0 and json.loads(out)["errors"]["train"] == 0.0
        code, _, _ = run(["eval", "--model", str(tmp_path / d / "model.json"), "--out", str(tmp_path / d / "ev")],
                         capsys)
        assert code == 0
    a, b = files_of(tmp_path / "a"), files_of(tmp_path / "b")
    assert set(REPRODUCIBLE) <= set(a)
    assert a == b
    assert (tmp_path / "a" / "timings.json").is_file()


def test_seed_changes_the_run(tmp_path, capsys):
    run(["train", "--config", "logic_enn", "--seed", "0", "--out", str(tmp_path / "s0")], capsys)
    run(["train", "--config", "logic_enn", "--seed", "1", "--out", str(tmp_path / "s1")], capsys)
    m0 = json.loads((tmp_path / "s0" / "manifest.json").read_text())
    m1 = json.loads((tmp_path / "s1" / "manifest.json").read_text())
    assert (m0["seed"], m1["seed"]) == (0, 1)
    assert m0["files"]["model.json"] != m1["files"]["model.json"]


def test_manifest_hashes_match_files(tmp_path, capsys):
    out = tmp_path / "run"
    run(["train", "--config", "logic_enn", "--out", str(out)], capsys)
    doc = json.loads((out / "manifest.json").read_text())
    assert doc["timing_files"] == ["timings.json"]
    for name, digest in doc["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert doc["config_sha256"] == doc["files"]["experiment.cfg"]
    assert load_model((out / "model.json").read_bytes()).network.widths[1:] == [8, 2]


def test_gen_data_and_report(tmp_path, capsys):
    code, out, _ = run(["gen-data", "logic", "--out", str(tmp_path / "data")], capsys)
    assert code == 0 and json.loads(out)["files"] == 3
    assert (tmp_path / "data" / "train.X.npy").is_file()
    run(["train", "--config", "logic_enn", "--out", str(tmp_path / "runs" / "enn")], capsys)
    code, out, _ = run(["report", str(tmp_path / "runs")], capsys)
    assert code == 0 and json.loads(out) == {"runs": 1}
    report = json.loads((tmp_path / "runs" / "report.json").read_text())
    assert report["runs"]["enn"]["error"] == {"train": 0.0}
    assert "## enn" in (tmp_path / "runs" / "report.md").read_text()


def test_errors_are_json_with_exit_codes(tmp_path, capsys):
    code, _, err = run(["train", "--config", "nope", "--out", str(tmp_path)], capsys)
    assert code == 2 and json.loads(err)["error"] == "config"
    code, _, err = run(["train", "--out", str(tmp_path)], capsys)
    assert code == 2 and json.loads(err)["error"] == "usage"
    bad = tmp_path / "bad.cfg"
    bad.write_text("[experiment]\nschema_version = 1\nname = x\ndataset = logic\ntrainer = enn\nbogus = 1\n")
    code, _, err = run(["train", "--config", str(bad), "--out", str(tmp_path / "o")], capsys)
    doc = json.loads(err)
    assert code == 2 and doc["line"] == 6 and "bogus" in doc["message"]
    broken = tmp_path / "m" / "model.json"
    broken.parent.mkdir()
    broken.write_text("{not json")
    code, _, err = run(["eval", "--model", str(broken), "--config", "logic_enn", "--out", str(tmp_path / "e")],
                       capsys)
    assert code == 1 and "error" in json.loads(err)
    code, _, err = run(["eval", "--model", str(broken), "--out", str(tmp_path / "e")], capsys)
    assert code == 2
    code, _, err = run(["eval", "--model", str(broken), "--config", "logic_enn", "--evaluation", "magic",
                        "--out", str(tmp_path / "e")], capsys)
    assert code == 2 and "magic" in json.loads(err)["message"]


def test_presets_listing_and_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "enn.cli", "presets", "--write", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "logic_enn" in res.stdout.split()
    assert (tmp_path / "mnist_enn.cfg").is_file()
    res = subprocess.run([sys.executable, "-m", "enn.cli", "train", "--config", "nope", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 2 and json.loads(res.stderr)["error"] == "config"


@pytest.mark.parametrize("command", ["gen-data", "train", "eval", "attack", "lesion", "report", "scaling"])
def test_subcommands_exist(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    assert command in capsys.readouterr().out
