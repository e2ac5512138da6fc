import json
import logging
import shutil

import pytest

from colt import cli
from colt.config import PipelineConfig
from colt.pipeline import STAGES

from conftest import CORPUS, PIPELINE_TOML


def _args(out, *extra):
    return ["--config", str(PIPELINE_TOML), "--corpus", str(CORPUS), "--out", str(out), *extra]


@pytest.fixture
def run_copy(pipeline_runs, tmp_path):
    out = tmp_path / "out"
    shutil.copytree(pipeline_runs[0], out)
    return out


def test_run_all_produces_artifact_chain(pipeline_runs):
    out = pipeline_runs[0]
    for name in ("corpus.jsonl", "dedup_report.jsonl", "tasks.jsonl", "contexts.jsonl",
                 "prompts.jsonl", "triples.jsonl", "curves.csv", "report.jsonl",
                 "report_summary.csv", "similar_code_buckets.csv"):
        assert (out / name).is_file(), name
    assert sorted(p.stem for p in (out / "manifests").glob("*.jsonl")) == sorted(STAGES)
    head = json.loads((out / "manifests" / "train-toy.jsonl").read_text().splitlines()[0])
    assert head["type"] == "stage" and head["name"] == "train-toy"


def test_missing_input_is_pipeline_error(tmp_path):
    assert cli.main(["dedup", *_args(tmp_path)]) == 3


def test_missing_corpus_is_pipeline_error(tmp_path):
    assert cli.main(["ingest", "--out", str(tmp_path), "--corpus", str(tmp_path / "nope")]) == 3


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[dedup]\nbands = 3\n")
    assert cli.main(["ingest", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert cli.main(["ingest", "--config", str(tmp_path / "absent.toml")]) == 2


def test_http_provider_without_url_exit_code(run_copy, monkeypatch):
    monkeypatch.delenv("COLT_PROVIDER_URL", raising=False)
    assert cli.main(["prefs", *_args(run_copy, "--provider", "http")]) == 4


def test_unreachable_provider_skips_tasks(run_copy):
    code = cli.main(["prefs", *_args(run_copy, "--provider", "http", "--provider-url",
                                     "http://127.0.0.1:9", "--provider-timeout", "0.5")])
    assert code == 0
    head = json.loads((run_copy / "manifests" / "prefs.jsonl").read_text().splitlines()[0])
    assert head["triples"] == 0 and head["skipped"]
    assert (run_copy / "candidates.jsonl").read_text() == ""


def test_stale_input_warning(run_copy, caplog):
    tasks = run_copy / "tasks.jsonl"
    tasks.write_text(tasks.read_text() + "\n")
    with caplog.at_level(logging.WARNING):
        assert cli.main(["contexts", *_args(run_copy)]) == 0
    assert any("stale input tasks.jsonl" in r.getMessage() for r in caplog.records)
    tasks.write_text(tasks.read_text() + "\n")
    caplog.clear()
    with caplog.at_level(logging.WARNING):
        assert cli.main(["prompts", *_args(run_copy, "--force")]) == 0
    assert not any("stale input" in r.getMessage() for r in caplog.records)


def test_single_stage_rerun_is_reproducible(run_copy, pipeline_runs):
    assert cli.main(["report", *_args(run_copy)]) == 0
    for name in ("report_summary.csv", "similar_code_buckets.csv"):
        assert (run_copy / name).read_bytes() == (pipeline_runs[0] / name).read_bytes()


def test_report_on_empty_eval(run_copy):
    (run_copy / "report.jsonl").write_text("")
    assert cli.main(["report", *_args(run_copy, "--force")]) == 0
    assert (run_copy / "report_summary.csv").read_text() == "language,scenario,metric,value\n"
    rows = (run_copy / "similar_code_buckets.csv").read_text().splitlines()
    assert len(rows) == 11 and all(r.endswith(",0") for r in rows[1:])


def test_config_command_prints_effective_toml(capsys):
    assert cli.main(["config", "--config", str(PIPELINE_TOML), "--seed", "9"]) == 0
    cfg = PipelineConfig.from_toml(capsys.readouterr().out)
    assert cfg.seed == 9 and cfg.tasks.test_created_after == "2023-01-01"
