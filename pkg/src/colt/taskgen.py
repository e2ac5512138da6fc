"""Ground-truth extraction for the three completion scenarios, plus balancing."""

from __future__ import annotations

import datetime as dt
import hashlib
import logging
import math
import random
from collections import defaultdict
from dataclasses import asdict, dataclass

from .codegraph import SymbolIndex, SyntaxTree, cross_file_call_lines, cross_file_callees
from .dedup import jaccard, unigram_set
from .lexer import code_tokens, count_tokens, tokenize

log = logging.getLogger(__name__)

MIN_TOKENS = 5
MAX_TOKENS = 100
BOUNDS = (MIN_TOKENS, MAX_TOKENS)

SCENARIOS = ("ApiInvocation", "SingleLine", "StructuredSpan")
SPAN_KINDS = ("Block", "IfStatement", "Loop")


@dataclass
class CompletionTask:
    task_id: str
    repo_id: str
    file_id: str  # repository-relative path
    language: str
    scenario: str
    gt_span: tuple[int, int]  # character offsets into the file
    gt_lines: tuple[int, int]  # 0-based, inclusive
    gt_text: str
    gt_token_count: int
    api_name: str | None = None
    node_kind: str | None = None
    split: str = "train"

    def to_json(self) -> dict:
        d = asdict(self)
        d["gt_span"] = list(self.gt_span)
        d["gt_lines"] = list(self.gt_lines)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "CompletionTask":
        d = dict(d)
        d["gt_span"] = tuple(d["gt_span"])
        d["gt_lines"] = tuple(d["gt_lines"])
        return cls(**d)


def make_task_id(scenario: str, repo_id: str, path: str, span: tuple[int, int]) -> str:
    key = f"{scenario}|{repo_id}|{path}|{span[0]}|{span[1]}"
    return f"{scenario[:3].lower()}-{hashlib.sha1(key.encode()).hexdigest()[:12]}"


class _LineInfo:
    """Per-line token layout and import coverage for one tree."""

    def __init__(self, tree: SyntaxTree):
        text = tree.text
        self.starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                self.starts.append(i + 1)
        n_lines = len(self.starts)
        self.tokens: list[list] = [[] for _ in range(n_lines)]
        self.crossing = [False] * n_lines
        for t in tree.tokens:
            last = t.line + text.count("\n", t.start, t.end)
            if last != t.line:
                for ln in range(t.line, min(last, n_lines - 1) + 1):
                    self.crossing[ln] = True
            self.tokens[t.line].append(t)
        self.import_lines = set()
        for i in tree.walk():
            n = tree.nodes[i]
            if n.kind == "ImportStatement":
                self.import_lines.update(range(n.start_line, n.end_line + 1))

    def line_end(self, text: str, ln: int) -> int:
        end = text.find("\n", self.starts[ln])
        return len(text) if end < 0 else end


def _line_info(tree: SyntaxTree) -> _LineInfo:
    info = tree.__dict__.get("_line_info")
    if info is None:
        info = tree.__dict__["_line_info"] = _LineInfo(tree)
    return info


def eligible_single_line(line: int, tree: SyntaxTree, bounds: tuple[int, int] = BOUNDS) -> bool:
    """Non-blank, not a comment, not part of an import, 5..100 code tokens.

    Lines touched by a token that spans several lines (multi-line strings,
    block comments) are never eligible.
    """
    info = _line_info(tree)
    if line < 0 or line >= len(info.tokens):
        return False
    if info.crossing[line] or line in info.import_lines:
        return False
    code = [t for t in info.tokens[line] if t.kind != "comment"]
    if not code:
        return False
    if code[0].kind == "directive":
        return False
    return bounds[0] <= len(code) <= bounds[1]


def _line_span(line: int, tree: SyntaxTree) -> tuple[int, int]:
    code = [t for t in _line_info(tree).tokens[line] if t.kind != "comment"]
    return code[0].start, code[-1].end


def _task(scenario, repo_id, path, language, tree, span, lines, **kw) -> CompletionTask:
    text = tree.text[span[0]:span[1]]
    return CompletionTask(
        task_id=make_task_id(scenario, repo_id, path, span), repo_id=repo_id, file_id=path,
        language=language, scenario=scenario, gt_span=span, gt_lines=lines, gt_text=text,
        gt_token_count=count_tokens(text, language), **kw)


def single_line_candidates(repo_id: str, trees: dict[str, SyntaxTree],
                           bounds: tuple[int, int] = BOUNDS) -> list[CompletionTask]:
    out = []
    for path in sorted(trees):
        tree = trees[path]
        for ln in range(len(_line_info(tree).tokens)):
            if eligible_single_line(ln, tree, bounds):
                out.append(_task("SingleLine", repo_id, path, tree.language, tree,
                                 _line_span(ln, tree), (ln, ln)))
    return out


def _sample(cands: list, quota: int | None, rng: random.Random) -> list:
    if quota is None or quota >= len(cands):
        picked = list(cands)
        rng.shuffle(picked)
        return picked
    return rng.sample(cands, quota)


def extract_single_line_tasks(repo_id: str, trees: dict[str, SyntaxTree], rng: random.Random,
                              quota: int | None = None) -> list[CompletionTask]:
    return _sample(single_line_candidates(repo_id, trees), quota, rng)


def api_candidates(repo_id: str, trees: dict[str, SyntaxTree], index: SymbolIndex,
                   bounds: tuple[int, int] = BOUNDS) -> list[CompletionTask]:
    out = []
    for path in sorted(trees):
        tree = trees[path]
        for ln in cross_file_call_lines(path, index):
            if not eligible_single_line(ln, tree, bounds):
                continue
            names = cross_file_callees(path, ln, index)
            out.append(_task("ApiInvocation", repo_id, path, tree.language, tree,
                             _line_span(ln, tree), (ln, ln), api_name=names[0]))
    return out


def extract_api_tasks(repo_id: str, trees: dict[str, SyntaxTree], index: SymbolIndex,
                      rng: random.Random, quota: int | None = None) -> list[CompletionTask]:
    return _sample(api_candidates(repo_id, trees, index), quota, rng)


def span_node_eligible(tree: SyntaxTree, idx: int, bounds: tuple[int, int] = BOUNDS) -> bool:
    n = tree.nodes[idx]
    if idx == tree.root or n.parent < 0 or not n.children:
        return False
    if n.kind not in SPAN_KINDS:
        return False
    if n.kind == "Block" and tree.nodes[n.parent].kind == "Class":
        return False
    kids = [tree.nodes[c] for c in n.children if tree.nodes[c].kind != "Comment"]
    if not kids or all(k.kind == "ImportStatement" for k in kids):
        return False
    count = len(code_tokens(tree.text[n.start:n.end], tree.language))
    return bounds[0] <= count <= bounds[1]


def span_candidates(repo_id: str, trees: dict[str, SyntaxTree],
                    bounds: tuple[int, int] = BOUNDS) -> list[CompletionTask]:
    out = []
    for path in sorted(trees):
        tree = trees[path]
        for i in tree.walk():
            if span_node_eligible(tree, i, bounds):
                n = tree.nodes[i]
                kind = n.kind
                if kind == "Block" and tree.nodes[n.parent].kind == "Function":
                    kind = "FunctionBody"
                out.append(_task("StructuredSpan", repo_id, path, tree.language, tree,
                                 (n.start, n.end), (n.start_line, n.end_line), node_kind=kind))
    return out


def extract_span_tasks(repo_id: str, trees: dict[str, SyntaxTree], rng: random.Random,
                       quota: int | None = None) -> list[CompletionTask]:
    return _sample(span_candidates(repo_id, trees), quota, rng)


def balance_and_sample(tasks: list[CompletionTask], quota: int, rng: random.Random,
                       threshold: float = 0.85) -> tuple[list[CompletionTask], dict]:
    """Uniform sampling across repositories, per (scenario, language) cell.

    Repositories are visited round-robin (sorted by id, each repo's pool
    shuffled), so no repo contributes more than ``ceil(quota/repos)+1``
    tasks while others still have some. Ground-truth near-duplicates are
    skipped during the draw. Returns ``(tasks, shortfall per cell)``.
    """
    cells: dict[tuple[str, str], dict[str, list]] = defaultdict(lambda: defaultdict(list))
    for t in tasks:
        cells[(t.scenario, t.language)][t.repo_id].append(t)
    out, shortfall = [], {}
    for cell in sorted(cells):
        by_repo = cells[cell]
        queues = []
        for repo in sorted(by_repo):
            pool = sorted(by_repo[repo], key=lambda t: t.task_id)
            rng.shuffle(pool)
            queues.append(pool)
        drawn, drawn_sets = [], []
        while len(drawn) < quota and any(queues):
            for q in queues:
                if len(drawn) >= quota:
                    break
                while q:
                    cand = q.pop(0)
                    s = unigram_set(cand.gt_text, cand.language)
                    if not any(jaccard(s, o) > threshold for o in drawn_sets):
                        drawn.append(cand)
                        drawn_sets.append(s)
                        break
        if len(drawn) < quota:
            shortfall["/".join(cell)] = quota - len(drawn)
        out.extend(drawn)
    if shortfall:
        log.warning("insufficient tasks in %d cells: %s", len(shortfall), shortfall)
    return out, shortfall


def split_repos(repos, test_created_after: dt.date | None = None, test_fraction: float = 0.2,
                rng: random.Random | None = None) -> dict[str, str]:
    """Assign each repository wholly to ``train`` or ``test``.

    With a creation-date cutoff, newer repositories form the test split;
    otherwise a seeded ``test_fraction`` of repositories is held out.
    """
    ids = sorted(r.repo_id for r in repos)
    if test_created_after is not None:
        return {r.repo_id: ("test" if r.created_at is not None and r.created_at > test_created_after
                            else "train") for r in repos}
    rng = rng or random.Random(0)
    shuffled = list(ids)
    rng.shuffle(shuffled)
    n_test = min(len(ids) - 1, max(1, math.floor(len(ids) * test_fraction))) if len(ids) > 1 else 0
    test = set(shuffled[:n_test])
    return {rid: ("test" if rid in test else "train") for rid in ids}


def check_task(task: CompletionTask, tree: SyntaxTree | None = None,
               bounds: tuple[int, int] = BOUNDS) -> list[str]:
    """Invariant violations for one task (empty list when sound)."""
    problems = []
    n = len(code_tokens(task.gt_text, task.language))
    if not (bounds[0] <= n <= bounds[1]):
        problems.append(f"token count {n}")
    if not task.gt_text.strip():
        problems.append("empty")
    toks = tokenize(task.gt_text, task.language)
    if toks and all(t.kind == "comment" for t in toks):
        problems.append("comment")
    code = [t for t in toks if t.kind != "comment"]
    if code and (code[0].text == "import" or code[0].text.lstrip("# ").startswith("include")
                 or (code[0].text == "from" and any(t.text == "import" for t in code))):
        problems.append("import")
    if (task.scenario == "ApiInvocation") != (task.api_name is not None):
        problems.append("api_name presence")
    if tree is not None:
        if tree.text[task.gt_span[0]:task.gt_span[1]] != task.gt_text:
            problems.append("span mismatch")
        if task.scenario == "StructuredSpan":
            match = [i for i in tree.walk()
                     if (tree.nodes[i].start, tree.nodes[i].end) == task.gt_span
                     and tree.nodes[i].kind in SPAN_KINDS]
            if not any(i != tree.root and tree.nodes[i].children for i in match):
                problems.append("span is root or leaf")
    return problems
