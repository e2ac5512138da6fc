"""Completion metrics: exact match, BLEU-4, edit distance, API accuracy, CodeBLEU-lite."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from . import kernels
from .codegraph import parse_text
from .lexer import KEYWORDS, LANGUAGES, token_texts, tokenize

KEYWORD_WEIGHT = 4.0
N_BUCKETS = 10
METRICS = ("em", "bleu", "edit_distance", "codebleu_lite", "api_correct")


def normalize(text: str) -> str:
    return text.replace("\r\n", "\n").strip()


def first_line(text: str) -> str:
    return normalize(text).split("\n", 1)[0]


def exact_match(pred: str, gt: str) -> int:
    return int(normalize(pred) == normalize(gt))


def edit_distance(pred: str, gt: str) -> int:
    """Character-level Levenshtein distance of the normalized strings."""
    return int(kernels.levenshtein(normalize(pred), normalize(gt)))


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _precisions(pred: list[str], ref: list[str], unigram_weight=None) -> list[float]:
    out = []
    for n in range(1, 5):
        cp, cr = _ngrams(pred, n), _ngrams(ref, n)
        if n == 1 and unigram_weight is not None:
            match = sum(unigram_weight(g[0]) * min(c, cr[g]) for g, c in cp.items())
            total = sum(unigram_weight(g[0]) * c for g, c in cp.items())
        else:
            match = sum(min(c, cr[g]) for g, c in cp.items())
            total = max(len(pred) - n + 1, 0)
        if n == 1:
            out.append(match / total if total else 0.0)
        elif match == 0:
            out.append(1.0 / (total + 1))  # add-one on zero counts only
        else:
            out.append(match / total)
    return out


def _bleu_from(pred: list[str], ref: list[str], unigram_weight=None) -> float:
    if not pred:
        return 0.0
    ps = _precisions(pred, ref, unigram_weight)
    if ps[0] == 0.0:
        return 0.0
    bp = min(1.0, math.exp(1.0 - len(ref) / len(pred)))
    return bp * math.exp(sum(math.log(p) for p in ps) / 4.0)


def _tokens(text: str, language: str | None) -> list[str]:
    return token_texts(text, language if language in LANGUAGES else None)


def bleu4(pred: str, gt: str, language: str | None = None) -> float:
    """Sentence BLEU-4 over lexer tokens with a brevity penalty."""
    return _bleu_from(_tokens(pred, language), _tokens(gt, language))


def keyword_bleu(pred: str, gt: str, language: str) -> float:
    """BLEU-4 whose unigram precision weights language keywords ``KEYWORD_WEIGHT``-fold."""
    kw = KEYWORDS.get(language, frozenset())
    return _bleu_from(_tokens(pred, language), _tokens(gt, language),
                      lambda t: KEYWORD_WEIGHT if t in kw else 1.0)


def callee_names(line: str, language: str | None = None) -> list[str]:
    """Identifiers directly followed by ``(``; keywords never count."""
    if language in LANGUAGES:
        toks = [t for t in tokenize(line, language) if t.kind != "comment"]
        return [a.text for a, b in zip(toks, toks[1:]) if a.kind == "ident" and b.text == "("]
    kws = set().union(*KEYWORDS.values())
    toks = _tokens(line, None)
    return [a for a, b in zip(toks, toks[1:])
            if b == "(" and (a[0].isalpha() or a[0] == "_") and a not in kws]


def api_accuracy(pred: str, gt_api_name: str, language: str | None = None) -> int:
    """1 when the first line of ``pred`` calls ``gt_api_name``, arguments ignored."""
    return int(gt_api_name in callee_names(first_line(pred), language))


def _parse_fragment(text: str, language: str):
    """Parse a code fragment that may start mid-line (Python needs re-indenting)."""
    if language != "Python" or "\n" not in text:
        return parse_text(text.strip() if language == "Python" else text, language)
    first, rest = text.split("\n", 1)
    rest_lines = rest.split("\n")
    indents = [len(ln) - len(ln.lstrip(" ")) for ln in rest_lines if ln.strip()]
    top = min(indents) if indents else 0
    tree = None
    for ind in range(top, -1, -1):
        lines = [" " * ind + first] + rest_lines
        cut = min(ind, top)
        shifted = "\n".join(ln[cut:] if ln[:cut].strip() == "" else ln.lstrip() for ln in lines)
        tree = parse_text(shifted, language)
        if tree.errors == 0:
            return tree
    return tree


def kind_paths(tree, max_depth: int = 3) -> set[tuple[str, ...]]:
    """Kind sequences from a top-level node down to each node at depth <= ``max_depth``."""
    out = set()

    def visit(idx, path):
        for c in tree.nodes[idx].children:
            kind = tree.nodes[c].kind
            if kind == "Comment":
                continue
            p = path + (kind,)
            out.add(p)
            if len(p) < max_depth:
                visit(c, p)

    visit(tree.root, ())
    return out


def subtree_match(pred: str, gt: str, language: str) -> float | None:
    """Share of the gt's kind-paths present in the prediction; None on parse errors."""
    tg, tp = _parse_fragment(gt, language), _parse_fragment(pred, language)
    if tg.errors or tp.errors:
        return None
    gp = kind_paths(tg)
    if not gp:
        return 1.0
    return len(gp & kind_paths(tp)) / len(gp)


def codebleu_lite(pred: str, gt: str, language: str) -> float:
    """``0.4*bleu + 0.3*keyword bleu + 0.3*subtree match``; plain BLEU if either side fails to parse."""
    if not normalize(pred):
        return 0.0
    b = bleu4(pred, gt, language)
    if language not in LANGUAGES:
        return b
    sm = subtree_match(pred, gt, language)
    if sm is None:
        return b
    return 0.4 * b + 0.3 * keyword_bleu(pred, gt, language) + 0.3 * sm


def bucket_of(similarity: float) -> int:
    return min(N_BUCKETS - 1, max(0, int(math.floor(similarity * N_BUCKETS + 1e-9))))


def similar_code_buckets(similarities: list[float], correct: list[int]) -> list[int]:
    """Correct-prediction counts in ten equal-width similarity buckets."""
    hist = [0] * N_BUCKETS
    for s, ok in zip(similarities, correct):
        if ok:
            hist[bucket_of(s)] += 1
    return hist


def score_task(task, pred: str) -> dict:
    """Per-task metric record. Line scenarios are scored on the first line."""
    language, gt = task.language, task.gt_text
    p = first_line(pred) if task.scenario in ("ApiInvocation", "SingleLine") else pred
    rec = {"task_id": task.task_id, "language": language, "scenario": task.scenario,
           "em": exact_match(p, gt), "bleu": bleu4(p, gt, language),
           "edit_distance": edit_distance(p, gt), "codebleu_lite": codebleu_lite(p, gt, language)}
    if task.scenario == "ApiInvocation":
        rec["api_correct"] = api_accuracy(p, task.api_name, language)
    return rec


@dataclass
class MetricReport:
    records: list[dict] = field(default_factory=list)

    def aggregates(self) -> dict[tuple[str, str], dict[str, float]]:
        cells: dict[tuple[str, str], list[dict]] = defaultdict(list)
        for r in self.records:
            cells[(r["language"], r["scenario"])].append(r)
        out = {}
        for cell in sorted(cells):
            rows = cells[cell]
            out[cell] = {m: sum(r[m] for r in rows if m in r) / sum(1 for r in rows if m in r)
                         for m in METRICS if any(m in r for r in rows)}
        return out

    def summary_rows(self) -> list[tuple[str, str, str, float]]:
        return [(lang, scen, m, v) for (lang, scen), ms in self.aggregates().items()
                for m, v in ms.items()]

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("language", "scenario", "metric", "value"))
        for lang, scen, m, v in self.summary_rows():
            w.writerow((lang, scen, m, repr(float(v))))
        return buf.getvalue()


def buckets_csv(hist: list[int]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("bucket", "low", "high", "correct"))
    for i, c in enumerate(hist):
        w.writerow((i + 1, f"{i / N_BUCKETS:.1f}", f"{(i + 1) / N_BUCKETS:.1f}", c))
    return buf.getvalue()
