import json
import shutil
import subprocess

import pytest
import yaml

from conftest import ROOT
from evarg.cli import main

BASE = dict(
    ontology_path="fixtures/ontology.yaml",
    train_path="fixtures/train.jsonl",
    test_path="fixtures/test.jsonl",
    k=1,
    selection_mode="same",
    seed=0,
    backend="replay",
    fixture_path="fixtures/completions.jsonl",
)


@pytest.fixture
def config_file(tmp_path, in_repo_root):
    def write(name="cfg.yaml", **overrides):
        path = tmp_path / name
        path.write_text(yaml.safe_dump({**BASE, **overrides}))
        return str(path)

    return write


# --- run -------------------------------------------------------------------


def test_run_writes_golden_report(config_file, tmp_path, golden_dir):
    out = tmp_path / "report.json"
    code = main(["run", "--config", config_file(), "--out", str(out)])
    assert code == 0
    assert out.read_bytes() == (golden_dir / "run_report.json").read_bytes()


def test_run_prints_report_when_no_out(config_file, capsys):
    assert main(["run", "--config", config_file()]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["score"]["micro"]["arg_c"]["f1"] == pytest.approx(0.8125)


def test_run_flag_overrides_config_file(config_file, tmp_path):
    out = tmp_path / "report.json"
    code = main(
        ["run", "--config", config_file(prompt_style="code"), "--style", "t1",
         "--out", str(out)]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert report["config"]["prompt_style"] == "t1"
    assert report["score"]["micro"]["arg_i"]["f1"] == pytest.approx(52 / 63)


def test_run_missing_fixture_entries_exit_3(config_file, tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    code = main(["run", "--config", config_file(fixture_path=str(empty))])
    assert code == 3
    assert "missing from fixtures" in capsys.readouterr().err


def test_run_backend_failure_exit_4(config_file, stub, capsys):
    stub.set_default(400, {"error": "rejected"})
    code = main(
        ["run", "--config", config_file(backend="http", endpoint=stub.url)]
    )
    assert code == 4
    assert "HTTP 400" in capsys.readouterr().err


@pytest.mark.parametrize(
    "mutate",
    [
        lambda tmp: str(tmp / "absent.yaml"),
        lambda tmp: _write(tmp / "list.yaml", "- just\n- a\n- list\n"),
        lambda tmp: _write(tmp / "unknown.yaml", "nonsense_key: 1\n"),
        lambda tmp: _write(tmp / "short.yaml", "k: 1\n"),
    ],
)
def test_run_bad_config_files_exit_2(tmp_path, in_repo_root, capsys, mutate):
    assert main(["run", "--config", mutate(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_run_missing_input_file_exit_2(config_file, capsys):
    code = main(["run", "--config", config_file(train_path="fixtures/nope.jsonl")])
    assert code == 2


def test_rejected_flag_value_is_argparse_error(config_file):
    with pytest.raises(SystemExit) as err:
        main(["run", "--config", config_file(), "--style", "prose"])
    assert err.value.code == 2


# --- emit ------------------------------------------------------------------


def test_emit_writes_golden_prompt_bytes(config_file, tmp_path, golden_dir):
    out = tmp_path / "prompt.txt"
    code = main(
        ["emit", "--config", config_file(), "--id", "test-001", "--out-file", str(out)]
    )
    assert code == 0
    assert out.read_bytes() == (golden_dir / "prompt_default.txt").read_bytes()


def test_emit_prints_prompt_with_final_newline(config_file, capsys, golden_dir):
    assert main(["emit", "--config", config_file(), "--id", "test-001"]) == 0
    expected = (golden_dir / "prompt_default.txt").read_text() + "\n"
    assert capsys.readouterr().out == expected


def test_emit_style_flag_switches_layout(config_file, capsys, golden_dir):
    code = main(
        ["emit", "--config", config_file(), "--id", "test-001", "--style", "t1"]
    )
    assert code == 0
    expected = (golden_dir / "prompt_t1.txt").read_text() + "\n"
    assert capsys.readouterr().out == expected


def test_emit_boolean_flag_drops_trigger_marking(config_file, capsys):
    code = main(
        ["emit", "--config", config_file(), "--id", "test-001", "--no-mark-trigger"]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "**returned**" not in out
    assert "Kim returned to Boston" in out


def test_emit_unknown_id_exit_2(config_file, capsys):
    assert main(["emit", "--config", config_file(), "--id", "test-999"]) == 2
    assert "test-999" in capsys.readouterr().err


# --- compare ---------------------------------------------------------------


def test_compare_prints_delta_line_when_writing(config_file, tmp_path, capsys):
    out = tmp_path / "compare.json"
    code = main(
        [
            "compare",
            "--config-code", config_file("code.yaml", prompt_style="code"),
            "--config-text", config_file("t1.yaml", prompt_style="t1"),
            "--out", str(out),
        ]
    )
    assert code == 0
    assert capsys.readouterr().out == "delta arg_i_f1=+0.0184 arg_c_f1=+0.0188\n"
    assert set(json.loads(out.read_text())) == {"code", "text", "delta"}


def test_compare_prints_full_report_without_out(config_file, capsys):
    code = main(
        [
            "compare",
            "--config-code", config_file("a.yaml"),
            "--config-text", config_file("b.yaml"),
        ]
    )
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["delta"] == {"arg_i_f1": 0.0, "arg_c_f1": 0.0}


def test_compare_mismatched_configs_exit_2(config_file, capsys):
    code = main(
        [
            "compare",
            "--config-code", config_file("a.yaml", k=1),
            "--config-text", config_file("b.yaml", k=0),
        ]
    )
    assert code == 2


# --- variability -----------------------------------------------------------


def test_variability_matches_golden(in_repo_root, capsys, golden_dir):
    code = main(
        [
            "variability",
            "--vectors", "fixtures/vectors.jsonl",
            "--grid", "fixtures/variability_grid.yaml",
        ]
    )
    assert code == 0
    expected = (golden_dir / "variability_report.json").read_text()
    assert capsys.readouterr().out == expected


def test_variability_writes_golden_bytes(in_repo_root, tmp_path, golden_dir):
    out = tmp_path / "variability.json"
    code = main(
        [
            "variability",
            "--vectors", "fixtures/vectors.jsonl",
            "--grid", "fixtures/variability_grid.yaml",
            "--out", str(out),
        ]
    )
    assert code == 0
    assert out.read_bytes() == (golden_dir / "variability_report.json").read_bytes()


def test_variability_missing_vector_id_exit_2(in_repo_root, tmp_path, capsys):
    grid = tmp_path / "grid.yaml"
    grid.write_text(
        yaml.safe_dump(
            {
                "clusters": {1: {"Transport": ["train-001", "train-999"]}},
                "arg_c_f1": {1: 0.5},
            }
        )
    )
    code = main(
        ["variability", "--vectors", "fixtures/vectors.jsonl", "--grid", str(grid)]
    )
    assert code == 2
    assert "train-999" in capsys.readouterr().err


def test_variability_mismatched_grid_exit_2(in_repo_root, tmp_path, capsys):
    grid = tmp_path / "grid.yaml"
    grid.write_text(
        yaml.safe_dump(
            {
                "clusters": {1: {"Transport": ["train-001"]}},
                "arg_c_f1": {2: 0.5},
            }
        )
    )
    code = main(
        ["variability", "--vectors", "fixtures/vectors.jsonl", "--grid", str(grid)]
    )
    assert code == 2


# --- validate --------------------------------------------------------------


def test_validate_clean_corpus(in_repo_root, capsys):
    code = main(
        [
            "validate",
            "--ontology", "fixtures/ontology.yaml",
            "--corpus", "fixtures/train.jsonl",
        ]
    )
    assert code == 0
    assert capsys.readouterr().out == "ok\n"


def test_validate_flags_problems_on_stderr(in_repo_root, tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    sentence = "Kim returned to Boston ."
    bad.write_text(
        json.dumps(
            {
                "id": "x-1",
                "sentence": sentence,
                "event_type": "Movement:Transport",
                "trigger": {"start": 4, "end": 12, "surface": "returned"},
                "arguments": [
                    {"role": "pilot", "surface": "Kim", "entity_type": "PER", "head": None}
                ],
            }
        )
        + "\n"
    )
    code = main(
        ["validate", "--ontology", "fixtures/ontology.yaml", "--corpus", str(bad)]
    )
    assert code == 2
    err = capsys.readouterr().err
    assert "pilot" in err


def test_validate_ontology_only(in_repo_root, capsys):
    assert main(["validate", "--ontology", "fixtures/ontology.yaml"]) == 0
    assert capsys.readouterr().out == "ok\n"


# --- console script --------------------------------------------------------


def test_console_script_is_installed_and_runs():
    exe = shutil.which("evarg")
    assert exe, "console script 'evarg' not on PATH; install with pip install -e ."
    proc = subprocess.run(
        [exe, "validate", "--ontology", "fixtures/ontology.yaml"],
        cwd=ROOT,
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == "ok"
