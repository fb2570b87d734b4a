import json
import subprocess
import sys

import pytest

from neuid3.cli import main
from neuid3.data.archive import read_meta
from neuid3.tree import load_tree


@pytest.fixture
def cards(tmp_path):
    out = tmp_path / "cards"
    assert main(["generate", "--kind", "eleusis", "--concept", "suit_order", "--sizes", "30", "4", "20",
                 "--seed", "1", "--out", str(out)]) == 0
    return out


FAST = ["--set", "epochs_per_test=2", "--set", "min_examples=5"]


def test_generate_eleusis(cards):
    meta = read_meta(cards)
    assert meta["concept"] == "suit_order" and meta["sizes"] == {"train": 30, "val": 4, "test": 20}


def test_generate_tabular_split(tmp_path):
    out = tmp_path / "tab"
    assert main(["generate", "--kind", "tabular", "--rows", "100", "--features", "3", "--out", str(out)]) == 0
    assert read_meta(out)["sizes"] == {"train": 70, "val": 10, "test": 20}


def test_induce_evaluate_export(cards, tmp_path, capsys):
    tree_path = tmp_path / "t.json"
    assert main(["induce", "--data", str(cards), "--pool", "opt", "--out", str(tree_path), *FAST]) == 0
    tree = load_tree(tree_path)
    assert tree.config["epochs_per_test"] == 2
    assert main(["evaluate", "--tree", str(tree_path), "--data", str(cards)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["n_examples"] == 20 and 0 <= doc["metrics"]["accuracy"] <= 1
    assert main(["evaluate", "--tree", str(tree_path), "--data", str(cards), "--out",
                 str(tmp_path / "results.json")]) == 0
    saved = json.loads((tmp_path / "results.json").read_text())
    assert set(saved["metrics"]) == {"accuracy", "default_accuracy", "f1_pos", "f1_neg"}
    assert main(["export", "--tree", str(tree_path), "--dot", str(tmp_path / "t.dot")]) == 0
    assert (tmp_path / "t.dot").read_text().startswith("digraph")


def test_symbolic_pool_on_tabular(tmp_path):
    data = tmp_path / "tab"
    main(["generate", "--kind", "tabular", "--rows", "80", "--features", "3", "--out", str(data)])
    assert main(["induce", "--data", str(data), "--pool", "symbolic", "--out", str(tmp_path / "t.json")]) == 0
    root = load_tree(tmp_path / "t.json").root
    assert root.test.kind == "deterministic_fact"


def test_seed_from_environment(cards, tmp_path, monkeypatch):
    monkeypatch.setenv("NEUID3_SEED", "7")
    main(["induce", "--data", str(cards), "--pool", "nf", "--out", str(tmp_path / "a.json"), *FAST])
    assert load_tree(tmp_path / "a.json").seed == 7
    main(["induce", "--data", str(cards), "--pool", "nf", "--seed", "3", "--out", str(tmp_path / "b.json"),
          *FAST])
    assert load_tree(tmp_path / "b.json").seed == 3
    monkeypatch.setenv("NEUID3_SEED", "x")
    assert main(["induce", "--data", str(cards), "--out", str(tmp_path / "c.json")]) == 1


def test_config_file(cards, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("max_depth = 1\nepochs_per_test = 1\npool = opt\n")
    main(["induce", "--data", str(cards), "--config", str(cfg), "--out", str(tmp_path / "t.json")])
    tree = load_tree(tmp_path / "t.json")
    assert tree.depth <= 1 and tree.config["max_depth"] == 1


@pytest.mark.parametrize("argv", [
    ["induce"],
    ["frobnicate"],
    ["export", "--tree", "t.json", "--dot", "t.dot", "--colour"],
    ["generate", "--kind", "eleusis", "--out", "x"],
    ["generate", "--kind", "eleusis", "--concept", "nope", "--out", "x"],
])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == 1
    assert capsys.readouterr().err


def test_bad_settings_exit_1(cards, tmp_path):
    out = str(tmp_path / "t.json")
    assert main(["induce", "--data", str(cards), "--out", out, "--set", "bogus=1"]) == 1
    assert main(["induce", "--data", str(cards), "--out", out, "--set", "epsilon=2"]) == 1
    assert main(["induce", "--data", str(cards), "--out", out, "--pool", "symbolic"]) == 1


def test_runtime_errors_exit_2(tmp_path, capsys):
    assert main(["induce", "--data", str(tmp_path / "missing"), "--out", str(tmp_path / "t.json")]) == 2
    (tmp_path / "bad.json").write_text("{")
    assert main(["export", "--tree", str(tmp_path / "bad.json"), "--dot", str(tmp_path / "x.dot")]) == 2
    assert "ParseError" in capsys.readouterr().err


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "neuid3.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "induce" in proc.stdout
