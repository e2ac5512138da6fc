"""Local repository ingestion, quality scoring and popularity/license filters."""

from __future__ import annotations

import datetime as dt
import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .lexer import LANGUAGES, Token, language_for_path, tokenize

MAX_FILE_BYTES = 1 << 20

PERMISSIVE_LICENSES = frozenset(
    {"MIT", "Apache-2.0", "BSD-2-Clause", "BSD-3-Clause", "ISC", "Unlicense", "0BSD",
     "Zlib", "CC0-1.0", "BSL-1.0", "MIT-0"}
)

SKIP_DIRS = frozenset(
    {".git", ".hg", ".svn", "node_modules", "vendor", "third_party", "build", "dist",
     "__pycache__", ".venv", "venv", "target", "out"}
)

_GENERATED_MARKERS = ("code generated", "do not edit", "@generated", "autogenerated",
                      "auto-generated")


class IngestError(Exception):
    def __init__(self, reason: str, path: str | os.PathLike = ""):
        super().__init__(f"{reason}: {path}" if path else reason)
        self.reason = reason
        self.path = str(path)


@dataclass
class SourceFile:
    repo_id: str
    relative_path: str
    language: str
    content: str

    @property
    def file_id(self) -> str:
        return f"{self.repo_id}/{self.relative_path}"

    @property
    def line_count(self) -> int:
        if not self.content:
            return 0
        return self.content.count("\n") + (0 if self.content.endswith("\n") else 1)

    @cached_property
    def lex_tokens(self) -> list[Token]:
        return tokenize(self.content, self.language)

    def manifest_entry(self) -> dict:
        return {"path": self.relative_path, "language": self.language,
                "line_count": self.line_count}


@dataclass
class RepoRecord:
    repo_id: str
    language: str
    license: str | None = None
    stars: int | None = None
    last_update: dt.date | None = None
    created_at: dt.date | None = None
    commit_frequency: float | None = None
    has_tests: bool = False
    quality_score: float = 0.0
    root: str = ""
    files: list[SourceFile] = field(default_factory=list)

    def to_manifest(self) -> dict:
        """One ``corpus.jsonl`` line. File contents are referenced, not inlined."""
        return {
            "repo_id": self.repo_id,
            "language": self.language,
            "license": self.license,
            "stars": self.stars,
            "last_update": self.last_update.isoformat() if self.last_update else None,
            "created_at": self.created_at.isoformat() if self.created_at else None,
            "commit_frequency": self.commit_frequency,
            "has_tests": self.has_tests,
            "quality_score": round(self.quality_score, 12),
            "root": self.root,
            "files": [f.manifest_entry() for f in self.files],
        }

    @classmethod
    def from_manifest(cls, entry: dict, corpus_root: str | os.PathLike | None = None,
                      load_files: bool = True) -> "RepoRecord":
        rec = cls(
            repo_id=entry["repo_id"],
            language=entry["language"],
            license=entry.get("license"),
            stars=entry.get("stars"),
            last_update=_parse_date(entry.get("last_update")),
            created_at=_parse_date(entry.get("created_at")),
            commit_frequency=entry.get("commit_frequency"),
            has_tests=bool(entry.get("has_tests")),
            quality_score=float(entry.get("quality_score") or 0.0),
            root=entry.get("root", ""),
        )
        base = Path(corpus_root) / rec.root if corpus_root is not None else Path(rec.root)
        for f in entry.get("files", []):
            content = ""
            if load_files:
                content = (base / f["path"]).read_text(encoding="utf-8")
            rec.files.append(SourceFile(rec.repo_id, f["path"], f["language"], content))
        return rec


def _parse_date(value) -> dt.date | None:
    if value is None or value == "":
        return None
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value)[:10])


def is_test_path(relative_path: str) -> bool:
    parts = relative_path.replace("\\", "/").split("/")
    if any(p in ("test", "tests") for p in parts[:-1]):
        return True
    name = parts[-1]
    stem = name.rsplit(".", 1)[0]
    return stem.startswith("test_") or stem.endswith("_test") or stem.endswith("Test")


def _looks_generated(head: str) -> bool:
    head = head.lower()
    return any(marker in head for marker in _GENERATED_MARKERS)


def load_sidecar(path: str | os.PathLike) -> dict[str, dict]:
    """Read ``repo_meta.jsonl`` into ``{repo_id: metadata}``."""
    meta = {}
    p = Path(path)
    if not p.exists():
        return meta
    with p.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                meta[obj["repo_id"]] = obj
    return meta


def ingest_repo(root_path: str | os.PathLike, metadata_sidecar: dict | None = None,
                repo_id: str | None = None, corpus_root: str | os.PathLike | None = None
                ) -> RepoRecord:
    """Scan one repository directory into a :class:`RepoRecord`.

    Only Python/Java/C++/Go sources are kept. Files over 1 MiB, files that
    fail UTF-8 decoding or contain NUL bytes, and files carrying a
    generated-code banner are skipped. A missing sidecar leaves metadata
    unknown (``None``).
    """
    root = Path(root_path)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise IngestError("Unreadable", root)
    repo_id = repo_id or root.name
    files = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d not in SKIP_DIRS and not d.startswith("."))
        for name in sorted(filenames):
            full = Path(dirpath) / name
            rel = full.relative_to(root).as_posix()
            lang = language_for_path(name)
            if lang is None:
                continue
            try:
                if full.stat().st_size > MAX_FILE_BYTES:
                    continue
                raw = full.read_bytes()
            except OSError:
                continue
            if b"\x00" in raw:
                continue
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError:
                continue
            if _looks_generated(text[:512]):
                continue
            files.append(SourceFile(repo_id, rel, lang, text.replace("\r\n", "\n")))
    if not files:
        raise IngestError("NoSourceFiles", root)
    files.sort(key=lambda f: f.relative_path)

    counts = {lang: 0 for lang in LANGUAGES}
    for f in files:
        counts[f.language] += 1
    language = max(LANGUAGES, key=lambda lang: (counts[lang], -LANGUAGES.index(lang)))

    meta = metadata_sidecar or {}
    if corpus_root is not None:
        rel_root = root.resolve().relative_to(Path(corpus_root).resolve()).as_posix()
    else:
        rel_root = str(root)
    rec = RepoRecord(
        repo_id=repo_id,
        language=language,
        license=meta.get("license"),
        stars=meta.get("stars"),
        last_update=_parse_date(meta.get("last_update")),
        created_at=_parse_date(meta.get("created_at")),
        commit_frequency=meta.get("commit_frequency"),
        has_tests=any(is_test_path(f.relative_path) for f in files),
        root=rel_root,
        files=files,
    )
    rec.quality_score = score_repo(rec)
    return rec


@dataclass(frozen=True)
class ScoreWeights:
    stars: float = 1.0
    commits: float = 0.5
    tests: float = 1.0


def score_repo(record: RepoRecord, weights: ScoreWeights = ScoreWeights()) -> float:
    """``w_s*log(1+stars) + w_c*commit_frequency + w_t*[has_tests]``; unknowns count as 0."""
    stars = record.stars or 0
    freq = record.commit_frequency or 0.0
    return (weights.stars * math.log1p(stars) + weights.commits * freq
            + weights.tests * (1.0 if record.has_tests else 0.0))


@dataclass
class FilterPolicy:
    min_stars: int = 10
    max_staleness_days: int = 730
    allowed_licenses: frozenset = PERMISSIVE_LICENSES
    drop_fraction: float = 0.10
    as_of: dt.date | None = None
    weights: ScoreWeights = field(default_factory=ScoreWeights)


def _hard_filter_reason(rec: RepoRecord, policy: FilterPolicy, as_of: dt.date | None) -> str | None:
    # exactly one primary reason: first failing check wins
    if rec.license is None or rec.license not in policy.allowed_licenses:
        return "License"
    if (rec.stars or 0) < policy.min_stars:
        return "Stars"
    if rec.last_update is None or (
        as_of is not None and (as_of - rec.last_update).days > policy.max_staleness_days
    ):
        return "Stale"
    return None


def filter_corpus(records: list[RepoRecord], policy: FilterPolicy | None = None
                  ) -> tuple[list[RepoRecord], list[tuple[RepoRecord, str]]]:
    """Apply hard filters, then drop the lowest-scoring ``drop_fraction``.

    Staleness is measured against ``policy.as_of``; when unset, the most
    recent ``last_update`` in the corpus is used so results do not depend
    on the wall clock.
    """
    policy = policy or FilterPolicy()
    as_of = policy.as_of
    if as_of is None:
        dates = [r.last_update for r in records if r.last_update is not None]
        as_of = max(dates) if dates else None

    survivors, dropped = [], []
    for rec in records:
        reason = _hard_filter_reason(rec, policy, as_of)
        if reason is None:
            rec.quality_score = score_repo(rec, policy.weights)
            survivors.append(rec)
        else:
            dropped.append((rec, reason))

    n_drop = math.floor(round(len(survivors) * policy.drop_fraction, 9))
    ranked = sorted(survivors, key=lambda r: (r.quality_score, r.repo_id))
    for rec in ranked[:n_drop]:
        dropped.append((rec, "Quality"))
    low = {r.repo_id for r in ranked[:n_drop]}
    kept = sorted((r for r in survivors if r.repo_id not in low), key=lambda r: r.repo_id)
    dropped.sort(key=lambda pair: pair[0].repo_id)
    return kept, dropped


def ingest_corpus(corpus_root: str | os.PathLike, sidecar_path: str | os.PathLike | None = None,
                  jobs: int = 1) -> tuple[list[RepoRecord], list[tuple[str, str]]]:
    """Ingest every immediate subdirectory of ``corpus_root`` as one repository.

    Returns ``(records, failures)`` where failures are ``(repo_dir, reason)``.
    """
    root = Path(corpus_root)
    if not root.is_dir():
        raise IngestError("Unreadable", root)
    sidecar = load_sidecar(sidecar_path if sidecar_path is not None else root / "repo_meta.jsonl")
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))

    def one(d: Path):
        try:
            return ingest_repo(d, sidecar.get(d.name), repo_id=d.name, corpus_root=root), None
        except IngestError as exc:
            return None, (d.name, exc.reason)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, dirs))
    else:
        results = [one(d) for d in dirs]
    records = [r for r, _ in results if r is not None]
    failures = [f for _, f in results if f is not None]
    return records, failures
