"""Candidate generation through a pluggable provider and preference-triple construction."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from .contextgen import DEFAULT_SCHEME, SCHEMES, MarkerScheme
from .lexer import flat_tokens

log = logging.getLogger(__name__)

REJECTED_CAP = 3


class UsageError(ValueError):
    pass


class ProviderError(RuntimeError):
    pass


class ProtocolError(ProviderError):
    pass


@dataclass(frozen=True)
class Sampling:
    n: int = 10
    temperature: float = 1.5
    top_p: float = 0.95
    max_tokens: int = 128
    stop: tuple[str, ...] | None = None


@dataclass
class CandidateSet:
    task_id: str
    candidates: list[str]
    sampling: Sampling
    prompt_ref: str = ""  # sha256 of the prompt text
    failures: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        d = asdict(self)
        d["sampling"] = asdict(self.sampling)
        return d


@dataclass(frozen=True)
class PreferenceTriple:
    task_id: str
    prompt: str
    chosen: str
    rejected: str

    def to_json(self) -> dict:
        return asdict(self)


def normalize(text: str) -> str:
    return text.replace("\r\n", "\n").strip()


def filter_rejected(candidates: list[str], gt: str, cap: int = REJECTED_CAP) -> list[str]:
    """Incorrect, unique candidates in original order, at most ``cap`` of them.

    Drops empty candidates, those equal to the ground truth, those containing
    it, and repeats (all compared after normalization). Survivors are
    returned verbatim.
    """
    ngt = normalize(gt)
    out, seen = [], set()
    for c in candidates:
        nc = normalize(c)
        if not nc or nc == ngt or (ngt and ngt in nc) or nc in seen:
            continue
        seen.add(nc)
        out.append(c)
    return out[:cap]


# -- providers ---------------------------------------------------------------


class ToyProvider:
    """Deterministic offline stand-in: proposes lines copied from the prompt.

    Lines of the prompt are scored by token overlap with the last prefix
    line, then drawn with temperature and nucleus sampling. The draw is
    seeded by ``seed`` and the prompt text, so repeated calls agree.
    """

    def __init__(self, seed: int = 0, scheme: MarkerScheme = DEFAULT_SCHEME):
        self.seed = seed
        self.scheme = scheme

    def _pool(self, prompt: str) -> tuple[list[str], str]:
        s = self.scheme
        head, _, rest = prompt.rpartition(s.prefix)
        prefix, _, rest = rest.partition(s.suffix)
        suffix = rest.rsplit(s.middle, 1)[0]
        anchor = next((ln for ln in reversed(prefix.split("\n")) if ln.strip()), "")
        lines = []
        for ln in (head + "\n" + prefix + "\n" + suffix).split("\n"):
            ln = ln.strip()
            if ln and ln not in lines:
                lines.append(ln)
        return lines, anchor

    def complete(self, prompt: str, sampling: Sampling) -> list[str]:
        if sampling.n <= 0:
            return []
        pool, anchor = self._pool(prompt)
        if not pool:
            return []
        key = hashlib.sha256(f"{self.seed}\x00{prompt}".encode()).digest()
        rng = random.Random(int.from_bytes(key[:8], "little"))
        a = set(flat_tokens(anchor))
        scores = []
        for ln in pool:
            b = set(flat_tokens(ln))
            scores.append(4.0 * len(a & b) / max(1, len(a | b)))
        t = max(sampling.temperature, 1e-6)
        top = max(scores)
        weights = [math.exp((x - top) / t) for x in scores]
        total = sum(weights)
        probs = sorted(((w / total, i) for i, w in enumerate(weights)), key=lambda p: (-p[0], p[1]))
        nucleus, mass = [], 0.0
        for p, i in probs:
            nucleus.append((p, i))
            mass += p
            if mass >= sampling.top_p:
                break
        idx = [i for _, i in nucleus]
        w = [p for p, _ in nucleus]
        return [pool[i] for i in rng.choices(idx, weights=w, k=sampling.n)]


class HttpProvider:
    """Client for an external completion service speaking the JSON protocol.

    ``POST {url}/v1/complete`` with ``{prompt, n, temperature, top_p,
    max_tokens, stop}``; the reply must be ``{"completions": [str, ...]}``.
    """

    def __init__(self, url: str | None = None, timeout: float = 60.0):
        url = url or os.environ.get("COLT_PROVIDER_URL")
        if not url:
            raise ProviderError("no provider URL (set --provider-url or COLT_PROVIDER_URL)")
        self.url = url.rstrip("/") + "/v1/complete"
        self.timeout = timeout

    def complete(self, prompt: str, sampling: Sampling) -> list[str]:
        body = {"prompt": prompt, "n": sampling.n, "temperature": sampling.temperature,
                "top_p": sampling.top_p, "max_tokens": sampling.max_tokens}
        if sampling.stop:
            body["stop"] = list(sampling.stop)
        req = urllib.request.Request(self.url, data=json.dumps(body).encode("utf-8"),
                                     headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                raw = resp.read()
        except (urllib.error.URLError, OSError) as exc:
            raise ProviderError(f"provider unreachable: {exc}") from exc
        try:
            data = json.loads(raw)
        except ValueError as exc:
            raise ProtocolError("response is not JSON") from exc
        comps = data.get("completions") if isinstance(data, dict) else None
        if not isinstance(comps, list) or not all(isinstance(c, str) for c in comps):
            raise ProtocolError("response lacks a 'completions' list of strings")
        return comps[:sampling.n]


def make_provider(kind: str = "toy", seed: int = 0, scheme: str = "default",
                  url: str | None = None, timeout: float = 60.0):
    if kind == "toy":
        return ToyProvider(seed, SCHEMES[scheme])
    if kind == "http":
        return HttpProvider(url, timeout)
    raise UsageError(f"unknown provider kind {kind!r}")


def generate_candidates(provider, task_id: str, prompt: str, sampling: Sampling = Sampling()
                        ) -> CandidateSet:
    ref = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    if sampling.n <= 0:
        return CandidateSet(task_id, [], sampling, ref)
    comps = provider.complete(prompt, sampling)
    return CandidateSet(task_id, list(comps[:sampling.n]), sampling, ref)


def generate_all(provider, prompts: dict[str, str], sampling: Sampling = Sampling(),
                 jobs: int = 1) -> tuple[dict[str, CandidateSet], list[tuple[str, str]]]:
    """Candidates for every ``task_id -> prompt``, at most ``jobs`` calls in flight.

    Tasks whose provider call fails are skipped and reported as
    ``(task_id, message)``. Malformed responses abort the run.
    """
    ids = sorted(prompts)

    def one(tid):
        try:
            return generate_candidates(provider, tid, prompts[tid], sampling), None
        except ProtocolError:
            raise
        except ProviderError as exc:
            log.warning("skipping %s: %s", tid, exc)
            return None, str(exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, ids))
    else:
        results = [one(t) for t in ids]
    sets, skipped = {}, []
    for tid, (cs, err) in zip(ids, results):
        if cs is None:
            skipped.append((tid, err))
        else:
            sets[tid] = cs
    return sets, skipped


def build_triples(tasks, prompts: dict[str, str], candidate_sets: dict[str, CandidateSet],
                  cap: int = REJECTED_CAP) -> list[PreferenceTriple]:
    """One triple per surviving rejected candidate, ordered by task id."""
    out = []
    for task in sorted(tasks, key=lambda t: t.task_id):
        cs = candidate_sets.get(task.task_id)
        if cs is None or task.task_id not in prompts:
            continue
        for rej in filter_rejected(cs.candidates, task.gt_text, cap):
            out.append(PreferenceTriple(task.task_id, prompts[task.task_id], task.gt_text, rej))
    return out


def split_sft_rl(tasks, ratio: float = 0.5, rng: random.Random | None = None):
    """Split tasks by repository into an SFT part and an RL part."""
    repos = sorted({t.repo_id for t in tasks})
    if len(repos) < 2:
        raise UsageError(f"need at least 2 repositories to split, got {len(repos)}")
    if not 0.0 <= ratio <= 1.0:
        raise UsageError(f"ratio must be in [0, 1], got {ratio}")
    rng = rng or random.Random(0)
    rng.shuffle(repos)
    n_sft = round(len(repos) * ratio)
    if n_sft in (0, len(repos)):
        log.warning("split ratio %s leaves one side empty", ratio)
    sft_repos = set(repos[:n_sft])
    sft = [t for t in tasks if t.repo_id in sft_repos]
    rl = [t for t in tasks if t.repo_id not in sft_repos]
    return sft, rl
