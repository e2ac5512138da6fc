"""Pipeline configuration with TOML round-tripping."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .contextgen import SCHEMES
from .corpus import PERMISSIVE_LICENSES
from .dedup import NUM_PERM


class ConfigError(ValueError):
    pass


@dataclass
class FilterSection:
    min_stars: int = 10
    max_staleness_days: int = 730
    drop_fraction: float = 0.10
    licenses: list[str] = field(default_factory=lambda: sorted(PERMISSIVE_LICENSES))
    as_of: str | None = None  # ISO date; defaults to the newest last_update


@dataclass
class DedupSection:
    threshold: float = 0.85
    bands: int = 32
    rows: int = 8


@dataclass
class TasksSection:
    min_tokens: int = 5
    max_tokens: int = 100
    quota_per_cell: int = 40
    test_fraction: float = 0.2
    test_created_after: str | None = None  # ISO date; overrides test_fraction
    parse_timeout: float = 5.0


@dataclass
class ContextSection:
    window_lines: int = 20
    top_k: int = 10
    context_window: int = 16384
    scheme: str = "default"


@dataclass
class PreferenceSection:
    provider: str = "toy"  # toy | http
    provider_url: str | None = None
    provider_timeout: float = 60.0
    candidates: int = 10
    temperature: float = 1.5
    top_p: float = 0.95
    max_tokens: int = 128
    rejected_cap: int = 3
    split_ratio: float = 0.5


@dataclass
class TrainSection:
    beta: float = 0.9
    vocab_size: int = 12
    order: int = 2
    synthetic_prompts: int = 1500
    sft_learning_rate: float = 2.0
    sft_epochs: int = 30
    dpo_learning_rate: float = 0.5
    dpo_epochs: int = 3
    batch_size: int = 64


_SECTIONS = {"filter": FilterSection, "dedup": DedupSection, "tasks": TasksSection,
             "context": ContextSection, "preference": PreferenceSection, "train": TrainSection}


@dataclass
class PipelineConfig:
    corpus_root: str = "corpus"
    out_dir: str = "colt-out"
    seed: int = 0
    jobs: int = 1
    stage_seeds: dict[str, int] = field(default_factory=dict)
    filter: FilterSection = field(default_factory=FilterSection)
    dedup: DedupSection = field(default_factory=DedupSection)
    tasks: TasksSection = field(default_factory=TasksSection)
    context: ContextSection = field(default_factory=ContextSection)
    preference: PreferenceSection = field(default_factory=PreferenceSection)
    train: TrainSection = field(default_factory=TrainSection)

    def validate(self) -> "PipelineConfig":
        d = self.dedup
        if d.bands <= 0 or d.rows <= 0 or d.bands * d.rows != NUM_PERM:
            raise ConfigError(f"dedup.bands * dedup.rows must equal {NUM_PERM}")
        if not 0.0 < d.threshold <= 1.0:
            raise ConfigError("dedup.threshold must be in (0, 1]")
        if not 0 < self.tasks.min_tokens <= self.tasks.max_tokens:
            raise ConfigError("tasks.min_tokens must be positive and <= tasks.max_tokens")
        if self.context.scheme not in SCHEMES:
            raise ConfigError(f"unknown marker scheme {self.context.scheme!r}")
        if self.preference.provider not in ("toy", "http"):
            raise ConfigError(f"unknown provider {self.preference.provider!r}")
        if not 0.0 <= self.preference.split_ratio <= 1.0:
            raise ConfigError("preference.split_ratio must be in [0, 1]")
        if not self.train.beta > 0:
            raise ConfigError("train.beta must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        return self

    def stage_seed(self, stage: str) -> int:
        if stage in self.stage_seeds:
            return int(self.stage_seeds[stage])
        digest = hashlib.sha256(f"{self.seed}:{stage}".encode()).digest()
        return int.from_bytes(digest[:8], "little")

    def to_dict(self) -> dict:
        return _drop_none(dataclasses.asdict(self))

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def section_hash(self, *names: str) -> str:
        d = self.to_dict()
        picked = {n: d.get(n) for n in names}
        return hashlib.sha256(json.dumps(picked, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        kwargs = {}
        for name, section in _SECTIONS.items():
            if name in data:
                kwargs[name] = _build(section, data.pop(name), name)
        top = {f.name for f in dataclasses.fields(cls)} - set(_SECTIONS)
        unknown = set(data) - top
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs.update(data)
        try:
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        _check_types(cfg)
        return cfg.validate()

    @classmethod
    def from_toml(cls, text: str) -> "PipelineConfig":
        try:
            return cls.from_dict(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_toml(text)


def _drop_none(obj):
    if isinstance(obj, dict):
        return {k: _drop_none(v) for k, v in obj.items() if v is not None}
    return obj


def _build(section, values, name):
    if not isinstance(values, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in dataclasses.fields(section)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return section(**values)


def _check_types(cfg: PipelineConfig) -> None:
    def check(obj, prefix):
        defaults = type(obj)()
        for f in dataclasses.fields(obj):
            v, ref = getattr(obj, f.name), getattr(defaults, f.name)
            if f.name in _SECTIONS:
                check(v, f.name + ".")
                continue
            if v is None or ref is None:
                continue
            ok = isinstance(v, type(ref))
            if isinstance(ref, float) and isinstance(v, int) and not isinstance(v, bool):
                ok = True
                setattr(obj, f.name, float(v))
            if isinstance(ref, int) and isinstance(v, bool):
                ok = False
            if not ok:
                raise ConfigError(f"{prefix}{f.name} should be {type(ref).__name__}, "
                                  f"got {type(v).__name__}")
    check(cfg, "")
