"""Stage orchestration: artifacts, manifests and provenance hashes."""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import os
import random
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import contextgen, corpus, dedup, evalmetrics, preference, taskgen, traincore
from .codegraph import build_symbol_index, parse_repo
from .config import PipelineConfig

log = logging.getLogger(__name__)

STAGES = ("ingest", "dedup", "graph", "extract", "contexts", "prompts", "prefs", "train-toy",
          "eval", "report")


class PipelineError(RuntimeError):
    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def atomic_write(path: Path, data: bytes | str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def jsonl(rows) -> str:
    return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows)


def read_jsonl(path: Path) -> list[dict]:
    with path.open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@dataclass
class StageRun:
    """Collects a stage's inputs and outputs and writes its manifest."""

    ctx: "Pipeline"
    name: str
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)

    def need(self, rel: str) -> Path:
        p = self.ctx.out / rel
        if not p.exists():
            raise PipelineError("MissingArtifact", f"{rel} (run the producing stage first)")
        digest = sha256_bytes(p.read_bytes())
        recorded = self.ctx.recorded_output(rel)
        if recorded is not None and recorded != digest and not self.ctx.force:
            log.warning("stale input %s: contents changed since it was produced", rel)
        self.inputs[rel] = digest
        return p

    def write(self, rel: str, data: bytes | str) -> None:
        if isinstance(data, str):
            data = data.encode("utf-8")
        atomic_write(self.ctx.out / rel, data)
        self.outputs[rel] = sha256_bytes(data)

    def finish(self, config_sections: tuple[str, ...] = (), extra: dict | None = None) -> None:
        rows = [{"type": "stage", "name": self.name, "seed": self.ctx.cfg.stage_seed(self.name),
                 "config_sha256": self.ctx.cfg.section_hash(*config_sections)}]
        if extra:
            rows[0].update(extra)
        rows += [{"type": "input", "path": k, "sha256": v} for k, v in sorted(self.inputs.items())]
        rows += [{"type": "output", "path": k, "sha256": v} for k, v in sorted(self.outputs.items())]
        atomic_write(self.ctx.out / "manifests" / f"{self.name}.jsonl", jsonl(rows))


class Pipeline:
    def __init__(self, cfg: PipelineConfig, force: bool = False):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.force = force
        self._repo_cache: dict[str, tuple] = {}

    def recorded_output(self, rel: str) -> str | None:
        mdir = self.out / "manifests"
        if not mdir.is_dir():
            return None
        for m in sorted(mdir.glob("*.jsonl")):
            for row in read_jsonl(m):
                if row.get("type") == "output" and row.get("path") == rel:
                    return row["sha256"]
        return None

    def run(self, name: str) -> None:
        fn = getattr(self, "stage_" + name.replace("-", "_"), None)
        if fn is None:
            raise PipelineError("UnknownStage", name)
        log.info("stage %s", name)
        fn(StageRun(self, name))

    def run_all(self) -> None:
        for name in STAGES:
            self.run(name)

    # -- helpers -------------------------------------------------------------

    def _records(self, run: StageRun, rel: str) -> list[corpus.RepoRecord]:
        path = run.need(rel)
        return [corpus.RepoRecord.from_manifest(e, self.cfg.corpus_root) for e in read_jsonl(path)]

    def _repo_state(self, rec: corpus.RepoRecord):
        """(trees, index, files) for one repository, memoized per run."""
        hit = self._repo_cache.get(rec.repo_id)
        if hit is None:
            trees, _ = parse_repo(rec.files, timeout=self.cfg.tasks.parse_timeout)
            index = build_symbol_index(trees)
            files = {f.relative_path: f.content for f in rec.files}
            hit = self._repo_cache[rec.repo_id] = (trees, index, files)
        return hit

    def _tasks(self, run: StageRun) -> list[taskgen.CompletionTask]:
        return [taskgen.CompletionTask.from_json(r) for r in read_jsonl(run.need("tasks.jsonl"))]

    def _provider(self):
        p = self.cfg.preference
        return preference.make_provider(p.provider, self.cfg.stage_seed("provider"),
                                        self.cfg.context.scheme, p.provider_url, p.provider_timeout)

    # -- stages --------------------------------------------------------------

    def stage_ingest(self, run: StageRun) -> None:
        root = Path(self.cfg.corpus_root)
        if not root.is_dir():
            raise PipelineError("MissingArtifact", f"corpus root {root} is not a directory")
        records, failures = corpus.ingest_corpus(root, jobs=self.cfg.jobs)
        run.inputs["corpus"] = _tree_digest(root)
        f = self.cfg.filter
        policy = corpus.FilterPolicy(
            min_stars=f.min_stars, max_staleness_days=f.max_staleness_days,
            allowed_licenses=frozenset(f.licenses), drop_fraction=f.drop_fraction,
            as_of=dt.date.fromisoformat(f.as_of) if f.as_of else None)
        kept, dropped = corpus.filter_corpus(records, policy)
        run.write("corpus.jsonl", jsonl(r.to_manifest() for r in kept))
        report = [{"repo_id": name, "reason": reason} for name, reason in failures]
        report += [{"repo_id": r.repo_id, "reason": reason, "quality_score": round(r.quality_score, 12)}
                   for r, reason in dropped]
        run.write("filter_report.jsonl", jsonl(sorted(report, key=lambda x: x["repo_id"])))
        run.finish(("filter",), {"kept": len(kept), "dropped": len(report)})

    def stage_dedup(self, run: StageRun) -> None:
        records = self._records(run, "corpus.jsonl")
        d = self.cfg.dedup
        kept, report = dedup.dedup_corpus(records, d.threshold, self.cfg.stage_seed("dedup"),
                                          d.bands, d.rows)
        run.write("corpus_dedup.jsonl", jsonl(r.to_manifest() for r in kept))
        run.write("dedup_report.jsonl", jsonl(sorted(report, key=lambda x: x["file_id"])))
        run.finish(("dedup",), {"repos": len(kept), "removed_files": len(report)})

    def stage_graph(self, run: StageRun) -> None:
        records = self._records(run, "corpus_dedup.jsonl")
        timeouts = []
        n_defs = 0
        for rec in records:
            trees, failed = parse_repo(rec.files, timeout=self.cfg.tasks.parse_timeout)
            timeouts += [{"repo_id": rec.repo_id, "path": p} for p in failed]
            index = build_symbol_index(trees)
            n_defs += len(index.definitions)
            run.write(f"symbols/{rec.repo_id}/symbols.jsonl", jsonl(index.to_jsonl_records()))
        run.write("graph_report.jsonl", jsonl(timeouts))
        run.finish(("tasks",), {"definitions": n_defs})

    def stage_extract(self, run: StageRun) -> None:
        records = self._records(run, "corpus_dedup.jsonl")
        for rec in records:
            run.need(f"symbols/{rec.repo_id}/symbols.jsonl")
        t = self.cfg.tasks
        bounds = (t.min_tokens, t.max_tokens)
        rng = random.Random(self.cfg.stage_seed("extract"))
        cutoff = dt.date.fromisoformat(t.test_created_after) if t.test_created_after else None
        split = taskgen.split_repos(records, cutoff, t.test_fraction, rng)
        pools: dict[str, list] = {"train": [], "test": []}
        for rec in records:
            trees, index, _ = self._repo_state(rec)
            cands = (taskgen.api_candidates(rec.repo_id, trees, index, bounds)
                     + taskgen.single_line_candidates(rec.repo_id, trees, bounds)
                     + taskgen.span_candidates(rec.repo_id, trees, bounds))
            for c in cands:
                c.split = split[rec.repo_id]
            pools[split[rec.repo_id]].extend(cands)
        tasks, shortfall = [], {}
        for name in ("train", "test"):
            drawn, short = taskgen.balance_and_sample(pools[name], t.quota_per_cell, rng,
                                                      self.cfg.dedup.threshold)
            tasks += drawn
            shortfall.update({f"{name}/{k}": v for k, v in short.items()})
        tasks.sort(key=lambda x: x.task_id)
        run.write("tasks.jsonl", jsonl(x.to_json() for x in tasks))
        run.write("splits.jsonl", jsonl({"repo_id": k, "split": v} for k, v in sorted(split.items())))
        run.finish(("tasks", "dedup"), {"tasks": len(tasks), "shortfall": shortfall})

    def stage_contexts(self, run: StageRun) -> None:
        records = {r.repo_id: r for r in self._records(run, "corpus_dedup.jsonl")}
        tasks = self._tasks(run)
        c = self.cfg.context
        corpora: dict[str, contextgen.RetrievalCorpus] = {}
        rows = []
        for task in tasks:
            trees, index, files = self._repo_state(records[task.repo_id])
            if task.repo_id not in corpora:
                corpora[task.repo_id] = contextgen.RetrievalCorpus(files, c.window_lines)
            snippets = contextgen.dependency_context(task.file_id, index, trees)
            snippets += contextgen.retrieval_context(task, files, corpora[task.repo_id],
                                                     c.top_k, c.window_lines)
            rows.append({"task_id": task.task_id, "snippets": [s.to_json() for s in snippets]})
        run.write("contexts.jsonl", jsonl(rows))
        run.finish(("context",), {"tasks": len(rows)})

    def stage_prompts(self, run: StageRun) -> None:
        records = {r.repo_id: r for r in self._records(run, "corpus_dedup.jsonl")}
        tasks = {t.task_id: t for t in self._tasks(run)}
        contexts = read_jsonl(run.need("contexts.jsonl"))
        c = self.cfg.context
        scheme = contextgen.SCHEMES[c.scheme]
        rows, oversize = [], []
        for row in contexts:
            task = tasks[row["task_id"]]
            content = self._repo_state(records[task.repo_id])[2][task.file_id]
            prefix, suffix = contextgen.split_in_file(content, task.gt_span)
            snippets = [contextgen.CrossFileSnippet.from_json(s) for s in row["snippets"]]
            try:
                bundle = contextgen.assemble_prompt(task.task_id, prefix, suffix, snippets, scheme,
                                                    c.context_window, task.language)
            except contextgen.OversizeError as exc:
                log.warning("skipping %s", exc)
                oversize.append(task.task_id)
                continue
            rows.append(bundle.to_json())
        run.write("prompts.jsonl", jsonl(rows))
        run.finish(("context",), {"prompts": len(rows), "oversize": oversize})

    def stage_prefs(self, run: StageRun) -> None:
        tasks = [t for t in self._tasks(run) if t.split == "train"]
        prompts = {r["task_id"]: r["assembled"] for r in read_jsonl(run.need("prompts.jsonl"))}
        p = self.cfg.preference
        rng = random.Random(self.cfg.stage_seed("prefs"))
        if len({t.repo_id for t in tasks}) >= 2:
            sft, rl = preference.split_sft_rl(tasks, p.split_ratio, rng)
        else:
            log.warning("fewer than two training repositories; all tasks go to the RL part")
            sft, rl = [], tasks
        sampling = preference.Sampling(p.candidates, p.temperature, p.top_p, p.max_tokens)
        rl_prompts = {t.task_id: prompts[t.task_id] for t in rl if t.task_id in prompts}
        sets, skipped = preference.generate_all(self._provider(), rl_prompts, sampling, self.cfg.jobs)
        triples = preference.build_triples(rl, rl_prompts, sets, p.rejected_cap)
        parts = [{"task_id": t.task_id, "part": "sft"} for t in sft]
        parts += [{"task_id": t.task_id, "part": "rl"} for t in rl]
        run.write("sft_rl_split.jsonl", jsonl(sorted(parts, key=lambda x: x["task_id"])))
        run.write("candidates.jsonl", jsonl(sets[k].to_json() for k in sorted(sets)))
        run.write("triples.jsonl", jsonl(x.to_json() for x in triples))
        run.finish(("preference", "context"), {"triples": len(triples),
                                               "skipped": [k for k, _ in skipped]})

    def stage_train_toy(self, run: StageRun) -> None:
        t = self.cfg.train
        seed = self.cfg.stage_seed("train-toy") % 2**32
        res = traincore.toy_experiment(
            t.synthetic_prompts, t.vocab_size, t.order, t.beta, seed,
            traincore.SftConfig(t.sft_learning_rate, t.sft_epochs, t.batch_size, seed),
            traincore.DpoConfig(t.beta, t.dpo_learning_rate, t.dpo_epochs, t.batch_size, seed))
        run.write("curves.csv", res["curves"].to_csv())
        run.write("toy_model.bin", traincore.dump_model(res["theta"]))
        run.finish(("train",), {"triples": res["n_triples"], "rl_triples": res["n_rl_triples"],
                                "held_out_reward_accuracy": res["held_out_accuracy"]})

    def stage_eval(self, run: StageRun) -> None:
        tasks = {t.task_id: t for t in self._tasks(run) if t.split == "test"}
        prompts = {r["task_id"]: r["assembled"] for r in read_jsonl(run.need("prompts.jsonl"))
                   if r["task_id"] in tasks}
        contexts = {r["task_id"]: r["snippets"] for r in read_jsonl(run.need("contexts.jsonl"))}
        greedy = preference.Sampling(n=1, temperature=1e-6, top_p=1.0,
                                     max_tokens=self.cfg.preference.max_tokens)
        sets, skipped = preference.generate_all(self._provider(), prompts, greedy, self.cfg.jobs)
        rows = []
        for tid in sorted(sets):
            task = tasks[tid]
            pred = sets[tid].candidates[0] if sets[tid].candidates else ""
            rec = evalmetrics.score_task(task, pred)
            rec["prediction"] = pred
            top = [s for s in contexts.get(tid, []) if s["origin"] == "Retrieval" and s["rank"] == 1]
            rec["similar_code_sim"] = (evalmetrics.codebleu_lite(top[0]["text"], task.gt_text,
                                                                 task.language) if top else 0.0)
            rows.append(rec)
        run.write("report.jsonl", jsonl(rows))
        run.finish(("preference",), {"scored": len(rows), "skipped": [k for k, _ in skipped]})

    def stage_report(self, run: StageRun) -> None:
        rows = read_jsonl(run.need("report.jsonl"))
        report = evalmetrics.MetricReport(rows)
        run.write("report_summary.csv", report.summary_csv())
        hist = evalmetrics.similar_code_buckets([r["similar_code_sim"] for r in rows],
                                                [r["em"] for r in rows])
        run.write("similar_code_buckets.csv", evalmetrics.buckets_csv(hist))
        run.finish((), {"cells": len(report.aggregates())})


def _tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            p = Path(dirpath) / name
            h.update(p.relative_to(root).as_posix().encode() + b"\0")
            h.update(hashlib.sha256(p.read_bytes()).digest())
    return h.hexdigest()
