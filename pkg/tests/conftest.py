import time
from pathlib import Path

import pytest

from colt import cli, corpus
from colt.codegraph import build_symbol_index, parse_repo

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"
PIPELINE_TOML = FIXTURES / "pipeline.toml"

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def fixture_records():
    records, failures = corpus.ingest_corpus(CORPUS)
    assert not failures
    return {r.repo_id: r for r in records}


@pytest.fixture(scope="session")
def fixture_repos(fixture_records):
    """repo_id -> (record, trees, index, files) for every fixture repository."""
    out = {}
    for rid, rec in fixture_records.items():
        trees, failed = parse_repo(rec.files)
        assert not failed
        files = {f.relative_path: f.content for f in rec.files}
        out[rid] = (rec, trees, build_symbol_index(trees), files)
    return out


@pytest.fixture(scope="session")
def pipeline_runs(tmp_path_factory):
    """Two run-all passes over the fixture corpus: (out_a, out_b, seconds)."""
    outs = [tmp_path_factory.mktemp("run_a"), tmp_path_factory.mktemp("run_b")]
    t0 = time.perf_counter()
    for out in outs:
        code = cli.main(["run-all", "--config", str(PIPELINE_TOML), "--corpus", str(CORPUS),
                         "--out", str(out)])
        assert code == 0
    return outs[0], outs[1], time.perf_counter() - t0


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's outcome for the end-of-run summary."""
    results = request.config.stash.setdefault(_ACCEPTANCE, [])

    class _Recorder:
        def __init__(self, number, title):
            self.number, self.title, self.detail = number, title, ""

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            status = "PASS" if exc_type is None else "FAIL"
            results.append((self.number, self.title, status, self.detail))
            return False

    return _Recorder


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, detail in sorted(results):
        line = f"[{status}] #{number} {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
