"""In-file and cross-file context extraction and fill-in-the-middle prompt assembly."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .codegraph import SymbolIndex, SyntaxTree
from .dedup import hash64
from .lexer import flat_tokens

WINDOW_LINES = 20
TOP_K = 10
DEFAULT_CONTEXT_WINDOW = 16384


class UsageError(ValueError):
    pass


class OversizeError(ValueError):
    pass


@dataclass(frozen=True)
class MarkerScheme:
    name: str
    prefix: str
    middle: str
    suffix: str

    @property
    def markers(self) -> tuple[str, str, str]:
        return (self.prefix, self.middle, self.suffix)


DEFAULT_SCHEME = MarkerScheme("default", "<PRE>", "<MID>", "<SUF>")
AIX_SCHEME = MarkerScheme("aixcoder", "<AIX-SPAN-PRE>", "<AIX-SPAN-MIDDLE>", "<AIX-SPAN-POST>")
SCHEMES = {s.name: s for s in (DEFAULT_SCHEME, AIX_SCHEME)}


@dataclass
class CrossFileSnippet:
    origin: str  # Dependency | Retrieval
    source_path: str
    text: str
    rank: int | None = None
    similarity: float | None = None
    start_line: int | None = None

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "CrossFileSnippet":
        return cls(**d)


@dataclass
class PromptBundle:
    task_id: str
    prefix: str
    suffix: str
    snippets: list[CrossFileSnippet]
    marker_scheme: MarkerScheme
    assembled: str
    token_length: int
    prefix_trimmed: int = 0  # characters cut from the start of ``prefix``
    dropped: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "assembled": self.assembled,
            "prefix": self.prefix,
            "suffix": self.suffix,
            "snippets": [s.to_json() for s in self.snippets],
            "scheme": self.marker_scheme.name,
            "markers": list(self.marker_scheme.markers),
            "token_length": self.token_length,
            "prefix_trimmed": self.prefix_trimmed,
            "dropped": self.dropped,
        }


def split_in_file(content: str, gt_span: tuple[int, int]) -> tuple[str, str]:
    start, end = gt_span
    if not (0 <= start <= end <= len(content)):
        raise UsageError(f"span {gt_span} outside file of length {len(content)}")
    return content[:start], content[end:]


# -- function-body stripping -------------------------------------------------


def _line_indent(text: str, pos: int) -> str:
    ls = text.rfind("\n", 0, pos) + 1
    j = ls
    while j < len(text) and text[j] in " \t":
        j += 1
    return text[ls:j]


def _outer_functions(tree: SyntaxTree) -> list[int]:
    out = []
    stack = [tree.root]
    while stack:
        i = stack.pop()
        n = tree.nodes[i]
        if n.kind == "Function" and i != tree.root:
            out.append(i)
            continue
        stack.extend(n.children)
    return sorted(out, key=lambda i: tree.nodes[i].start)


def strip_function_bodies(tree: SyntaxTree) -> str:
    """Replace each outermost function body with one elision line.

    Signatures, leading doc comments and Python docstrings are kept;
    everything outside functions is untouched. Nested functions vanish
    with their enclosing body.
    """
    text = tree.text
    python = tree.language == "Python"
    pieces = []
    pos = 0
    for fi in _outer_functions(tree):
        body_idx = tree.body_of(fi)
        if body_idx is None:
            continue
        fn, body = tree.nodes[fi], tree.nodes[body_idx]
        fn_indent = _line_indent(text, fn.start)
        unit = "\t" if "\t" in fn_indent or (not fn_indent and tree.language == "Go") else "    "
        if python:
            same_line = text.count("\n", fn.start, body.start) == 0
            body_indent = fn_indent + unit if same_line else _line_indent(text, body.start)
            keep_end = text.rfind(":", fn.start, body.start) + 1 if same_line else None
            kids = [c for c in body.children if tree.nodes[c].kind != "Comment"]
            if not same_line:
                keep_end = text.rfind("\n", fn.start, body.start)
                first = tree.nodes[kids[0]] if kids else None
                if first is not None:
                    toks = [t for t in tree.tokens if first.start <= t.start < first.end
                            and t.kind != "comment"]
                    if len(toks) == 1 and toks[0].kind == "string":
                        keep_end = first.end
            pieces.append(text[pos:keep_end])
            pieces.append("\n" + body_indent + "...")
            pos = body.end
        else:
            pieces.append(text[pos:body.start + 1])
            pieces.append("\n" + fn_indent + unit + "// ...\n" + fn_indent + "}")
            pos = body.end
    pieces.append(text[pos:])
    return "".join(pieces)


# -- cross-file context ------------------------------------------------------


def dependency_context(file_path: str, index: SymbolIndex, trees: dict[str, SyntaxTree]
                       ) -> list[CrossFileSnippet]:
    """Directly imported in-repo files, bodies stripped, in import order."""
    out = []
    for path in index.imported_files(file_path):
        if path in trees:
            out.append(CrossFileSnippet("Dependency", path, strip_function_bodies(trees[path])))
    return out


@dataclass
class _Window:
    path: str
    start_line: int
    text: str
    ids: np.ndarray


def token_id_set(text: str) -> np.ndarray:
    return np.array(sorted({hash64(t) for t in flat_tokens(text)}), dtype=np.uint64)


class RetrievalCorpus:
    """Non-overlapping fixed-size line windows over every file of a repository."""

    def __init__(self, files: dict[str, str], window: int = WINDOW_LINES):
        self.window = window
        self.windows: list[_Window] = []
        for path in sorted(files):
            lines = files[path].split("\n")
            if lines and lines[-1] == "" and len(lines) > 1:
                lines.pop()
            for s in range(0, len(lines), window):
                text = "\n".join(lines[s:s + window])
                self.windows.append(_Window(path, s, text, token_id_set(text)))
        sizes = [len(w.ids) for w in self.windows]
        self.offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
        np.cumsum(sizes, out=self.offsets[1:])
        self.pool = (np.concatenate([w.ids for w in self.windows])
                     if self.windows else np.zeros(0, dtype=np.uint64))

    def query(self, text: str, exclude: tuple[str, int, int] | None = None, top_k: int = TOP_K
              ) -> list[CrossFileSnippet]:
        """Top-``k`` windows by token-set Jaccard; ties by (path, start line).

        ``exclude`` = (path, first_line, last_line) removes windows overlapping
        that line range.
        """
        sims = kernels.jaccard_many(token_id_set(text), self.pool, self.offsets)
        order = []
        for i, w in enumerate(self.windows):
            if exclude is not None and w.path == exclude[0]:
                w_last = w.start_line + self.window - 1
                if not (w_last < exclude[1] or w.start_line > exclude[2]):
                    continue
            order.append((-sims[i], w.path, w.start_line, i))
        order.sort()
        out = []
        for rank, (neg, path, start, i) in enumerate(order[:top_k], 1):
            out.append(CrossFileSnippet("Retrieval", path, self.windows[i].text, rank,
                                        float(-neg), start))
        return out


def retrieval_query(prefix: str, window: int = WINDOW_LINES) -> str:
    """The last ``window`` lines of the in-file prefix."""
    return "\n".join(prefix.split("\n")[-window:])


def retrieval_context(task, files: dict[str, str], corpus: RetrievalCorpus | None = None,
                      top_k: int = TOP_K, window: int = WINDOW_LINES) -> list[CrossFileSnippet]:
    content = files[task.file_id]
    prefix = content[:task.gt_span[0]]
    if not prefix:
        return []
    corpus = corpus or RetrievalCorpus(files, window)
    return corpus.query(retrieval_query(prefix, window),
                        (task.file_id, task.gt_lines[0], task.gt_lines[1]), top_k)


# -- prompt assembly ---------------------------------------------------------


def count_prompt_tokens(text: str, scheme: MarkerScheme) -> int:
    """Flat token count where each marker string counts as one token."""
    pieces = [text]
    n_markers = 0
    for m in scheme.markers:
        nxt = []
        for p in pieces:
            parts = p.split(m)
            n_markers += len(parts) - 1
            nxt.extend(parts)
        pieces = nxt
    return n_markers + sum(len(flat_tokens(p)) for p in pieces)


def _comment_prefix(language: str) -> str:
    return "#" if language == "Python" else "//"


def format_snippet(s: CrossFileSnippet, language: str) -> str:
    body = s.text if s.text.endswith("\n") else s.text + "\n"
    return f"{_comment_prefix(language)} path: {s.source_path}\n{body}"


def _ordered(snippets: list[CrossFileSnippet]) -> list[CrossFileSnippet]:
    deps = [s for s in snippets if s.origin == "Dependency"]
    rets = sorted((s for s in snippets if s.origin == "Retrieval"), key=lambda s: s.rank)
    return deps + rets


def _layout(snippets, prefix, suffix, scheme, language) -> str:
    blocks = "".join(format_snippet(s, language) for s in snippets)
    return blocks + scheme.prefix + prefix + scheme.suffix + suffix + scheme.middle


def assemble_prompt(task_id: str, prefix: str, suffix: str, snippets: list[CrossFileSnippet],
                    scheme: MarkerScheme = DEFAULT_SCHEME,
                    window_limit: int = DEFAULT_CONTEXT_WINDOW, language: str = "Python"
                    ) -> PromptBundle:
    """Lay out cross-file blocks, then prefix/suffix between the FIM markers.

    Over the limit, drop retrieval snippets from the lowest rank, then
    dependency snippets from the last import, then whole lines from the
    start of the prefix. The suffix and markers are never cut.
    """
    kept = _ordered(snippets)
    dropped = {"retrieval": 0, "dependency": 0}

    def size(snips, pre):
        return count_prompt_tokens(_layout(snips, pre, suffix, scheme, language), scheme)

    while size(kept, prefix) > window_limit and kept:
        rets = [s for s in kept if s.origin == "Retrieval"]
        victim = rets[-1] if rets else kept[-1]
        kept.remove(victim)
        dropped["retrieval" if victim.origin == "Retrieval" else "dependency"] += 1

    trimmed = 0
    if size(kept, prefix) > window_limit:
        lines = prefix.splitlines(keepends=True)
        lo, hi = 0, len(lines)
        if size(kept, "") > window_limit:
            raise OversizeError(f"{task_id}: suffix and markers alone exceed {window_limit} tokens")
        while lo < hi:  # smallest number of leading lines to drop
            mid = (lo + hi) // 2
            if size(kept, "".join(lines[mid:])) <= window_limit:
                hi = mid
            else:
                lo = mid + 1
        trimmed = sum(len(x) for x in lines[:lo])
    kept_prefix = prefix[trimmed:]
    assembled = _layout(kept, kept_prefix, suffix, scheme, language)
    return PromptBundle(task_id, prefix, suffix, kept, scheme, assembled,
                        count_prompt_tokens(assembled, scheme), trimmed, dropped)
