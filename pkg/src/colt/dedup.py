"""Exact and near deduplication: shingling, MinHash, LSH banding, cluster reduction."""

from __future__ import annotations

import hashlib
import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lexer import token_texts

log = logging.getLogger(__name__)

NUM_PERM = 256
DEFAULT_BANDS = 32
DEFAULT_ROWS = 8
SHINGLE_K = 5
NEAR_DUP_THRESHOLD = 0.85
SENTINEL = np.uint64(0xFFFFFFFFFFFFFFFF)


class UsageError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def hash64(data: str) -> int:
    return int.from_bytes(hashlib.blake2b(data.encode("utf-8"), digest_size=8).digest(), "little")


@dataclass
class ShingleSet:
    owner: str
    shingles: frozenset

    def sorted_array(self) -> np.ndarray:
        return np.array(sorted(self.shingles), dtype=np.uint64)


def shingle_tokens(tokens: list[str], k: int = SHINGLE_K) -> set[int]:
    if not tokens:
        return set()
    if len(tokens) < k:
        return {hash64("\x1f".join(tokens))}
    return {hash64("\x1f".join(tokens[i:i + k])) for i in range(len(tokens) - k + 1)}


def shingle_text(owner: str, text: str, language: str | None = None,
                 k: int = SHINGLE_K) -> ShingleSet:
    """Token ``k``-gram shingles of ``text`` (comments excluded)."""
    return ShingleSet(owner, frozenset(shingle_tokens(token_texts(text, language), k)))


def unigram_set(text: str, language: str | None = None) -> frozenset:
    return frozenset(token_texts(text, language))


def jaccard(a, b) -> float:
    """``|a & b| / |a | b|``; 1.0 when both are empty, 0.0 when exactly one is."""
    sa = a.shingles if isinstance(a, ShingleSet) else a
    sb = b.shingles if isinstance(b, ShingleSet) else b
    if not sa and not sb:
        return 1.0
    if not sa or not sb:
        return 0.0
    inter = len(sa & sb)
    return inter / (len(sa) + len(sb) - inter)


@dataclass
class MinHashSignature:
    owner: str
    values: np.ndarray
    seed: int
    empty: bool = False


@dataclass(frozen=True)
class PermutationFamily:
    """``NUM_PERM`` multiply-shift permutations ``h -> a*h + b (mod 2**64)``, ``a`` odd."""

    seed: int
    a: np.ndarray = field(repr=False, compare=False)
    b: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def from_seed(cls, seed: int, num_perm: int = NUM_PERM) -> "PermutationFamily":
        rng = np.random.default_rng(seed)
        a = rng.integers(0, 2**64, size=num_perm, dtype=np.uint64, endpoint=False) | np.uint64(1)
        b = rng.integers(0, 2**64, size=num_perm, dtype=np.uint64, endpoint=False)
        return cls(seed, a, b)


_FAMILIES: dict[int, PermutationFamily] = {}


def _family(seed: int) -> PermutationFamily:
    fam = _FAMILIES.get(seed)
    if fam is None:
        fam = _FAMILIES[seed] = PermutationFamily.from_seed(seed)
    return fam


def minhash_signature(s: ShingleSet, seed: int = 0) -> MinHashSignature:
    fam = _family(seed)
    if not s.shingles:
        return MinHashSignature(s.owner, np.full(NUM_PERM, SENTINEL, dtype=np.uint64), seed, True)
    hashes = np.fromiter(s.shingles, dtype=np.uint64, count=len(s.shingles))
    return MinHashSignature(s.owner, kernels.minhash(hashes, fam.a, fam.b), seed)


def estimate_jaccard(sig_a: MinHashSignature, sig_b: MinHashSignature) -> float:
    if sig_a.seed != sig_b.seed:
        raise UsageError(f"signature seeds differ: {sig_a.seed} != {sig_b.seed}")
    return float(np.count_nonzero(sig_a.values == sig_b.values)) / len(sig_a.values)


def lsh_candidate_pairs(signatures: list[MinHashSignature], bands: int = DEFAULT_BANDS,
                        rows: int = DEFAULT_ROWS, groups: list[str] | None = None
                        ) -> set[tuple[int, int]]:
    """Index pairs ``(i, j)``, ``i < j``, whose signatures collide in at least one band.

    ``groups`` optionally partitions signatures (e.g. by language); pairs
    never cross groups. Empty-input signatures are excluded.
    """
    if bands <= 0 or rows <= 0 or bands * rows != NUM_PERM:
        raise ConfigError(f"bands*rows must equal {NUM_PERM}, got {bands}x{rows}")
    buckets: dict[tuple, list[int]] = defaultdict(list)
    for i, sig in enumerate(signatures):
        if sig.empty:
            continue
        g = groups[i] if groups is not None else ""
        vals = sig.values
        for band in range(bands):
            key = (g, band, vals[band * rows:(band + 1) * rows].tobytes())
            buckets[key].append(i)
    pairs = set()
    for members in buckets.values():
        if len(members) < 2:
            continue
        for x in range(len(members)):
            for y in range(x + 1, len(members)):
                a, b = members[x], members[y]
                pairs.add((a, b) if a < b else (b, a))
    return pairs


@dataclass
class DupCluster:
    cluster_id: int
    members: list[str]
    retained: list[str]
    # removed member -> retained member it is similar to
    representative: dict[str, str] = field(default_factory=dict)


def reduce_cluster(members: list[str], edges: dict[str, set[str]]) -> list[str]:
    """Greedy cover: every member must be, or be similar to, a retained member.

    Picks the node covering the most still-uncovered members, ties by id.
    """
    uncovered = set(members)
    retained = []
    order = sorted(members)
    while uncovered:
        best = max(order, key=lambda m: (len(({m} | edges[m]) & uncovered), -order.index(m)))
        retained.append(best)
        uncovered -= {best} | edges[best]
    return sorted(retained)


def near_dedup(items: list[tuple[str, ShingleSet]], threshold: float = NEAR_DUP_THRESHOLD,
               seed: int = 0, bands: int = DEFAULT_BANDS, rows: int = DEFAULT_ROWS,
               groups: list[str] | None = None) -> tuple[list[str], list[DupCluster]]:
    """Near-duplicate removal over ``(file_id, shingles)`` items.

    LSH candidates are verified with exact Jaccard ``> threshold``; connected
    components of verified pairs form clusters, each reduced with
    :func:`reduce_cluster`. Returns ``(kept ids, clusters)``.
    """
    ids = [fid for fid, _ in items]
    sigs = [minhash_signature(s, seed) for _, s in items]
    cand = lsh_candidate_pairs(sigs, bands, rows, groups)
    edges: dict[str, set[str]] = {fid: set() for fid in ids}
    for i, j in sorted(cand):
        if jaccard(items[i][1], items[j][1]) > threshold:
            edges[ids[i]].add(ids[j])
            edges[ids[j]].add(ids[i])

    seen = set()
    clusters = []
    removed = set()
    for fid in ids:
        if fid in seen or not edges[fid]:
            continue
        comp, stack = [], [fid]
        seen.add(fid)
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in edges[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        comp.sort()
        retained = reduce_cluster(comp, edges)
        rset = set(retained)
        rep = {}
        for m in comp:
            if m not in rset:
                rep[m] = min(edges[m] & rset)
                removed.add(m)
        clusters.append(DupCluster(len(clusters), comp, retained, rep))
    kept = [fid for fid in ids if fid not in removed]
    return kept, clusters


def exact_dedup(records):
    """Keep one repository (lowest ``repo_id``) per identical file-content multiset.

    Returns ``(kept, removed)`` where removed is ``[(record, survivor_id)]``.
    """
    by_key: dict[tuple, list] = defaultdict(list)
    for rec in records:
        key = tuple(sorted(hashlib.sha256(f.content.encode("utf-8")).hexdigest() for f in rec.files))
        by_key[key].append(rec)
    kept, removed = [], []
    for group in by_key.values():
        group.sort(key=lambda r: r.repo_id)
        kept.append(group[0])
        removed.extend((r, group[0].repo_id) for r in group[1:])
    kept.sort(key=lambda r: r.repo_id)
    removed.sort(key=lambda pair: pair[0].repo_id)
    return kept, removed


def dedup_ground_truths(tasks, threshold: float = NEAR_DUP_THRESHOLD):
    """Drop later tasks whose unigram-token Jaccard with an earlier kept task,
    within the same scenario, is strictly above ``threshold``."""
    kept = []
    sets_by_scenario: dict[str, list[frozenset]] = defaultdict(list)
    for task in tasks:
        s = unigram_set(task.gt_text, getattr(task, "language", None))
        pool = sets_by_scenario[task.scenario]
        if any(jaccard(s, other) > threshold for other in pool):
            continue
        pool.append(s)
        kept.append(task)
    return kept


def dedup_corpus(records, threshold: float = NEAR_DUP_THRESHOLD, seed: int = 0,
                 bands: int = DEFAULT_BANDS, rows: int = DEFAULT_ROWS):
    """Exact repo dedup, then file-level near dedup across the corpus.

    Near-duplicate detection stays within one language. Repositories left
    with no files are dropped. Returns ``(kept records, report rows)``.
    """
    kept, removed = exact_dedup(records)
    report = []
    for rec, survivor in removed:
        survivor_rec = next(r for r in kept if r.repo_id == survivor)
        by_hash = {}
        for f in survivor_rec.files:
            by_hash.setdefault(hashlib.sha256(f.content.encode()).hexdigest(), f.file_id)
        for f in rec.files:
            h = hashlib.sha256(f.content.encode()).hexdigest()
            report.append({"file_id": f.file_id, "reason": "exact",
                           "cluster_id": f"exact:{survivor}", "representative": by_hash.get(h)})

    items, groups = [], []
    for rec in kept:
        for f in rec.files:
            items.append((f.file_id, shingle_text(f.file_id, f.content, f.language)))
            groups.append(f.language)
    kept_ids, clusters = near_dedup(items, threshold, seed, bands, rows, groups)
    keep = set(kept_ids)
    for cl in clusters:
        for m in cl.members:
            if m not in keep:
                report.append({"file_id": m, "reason": "near", "cluster_id": f"near:{cl.cluster_id}",
                               "representative": cl.representative[m]})
    out = []
    for rec in kept:
        rec.files = [f for f in rec.files if f.file_id in keep]
        if rec.files:
            out.append(rec)
        else:
            log.info("repository %s emptied by near dedup", rec.repo_id)
    return out, report
