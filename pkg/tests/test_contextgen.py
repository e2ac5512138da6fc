import random
import re

import pytest

from colt import contextgen
from colt.codegraph import build_symbol_index, parse, parse_text
from colt.contextgen import (AIX_SCHEME, DEFAULT_SCHEME, CrossFileSnippet, assemble_prompt,
                             count_prompt_tokens, split_in_file, strip_function_bodies)
from colt.corpus import SourceFile
from colt.taskgen import CompletionTask

PY_SOURCE = '''import os

RATE = 3


def scale(values, factor=2):
    """Multiply every value."""
    out = []
    for v in values:
        out.append(v * factor)
    if not out:
        return None
    total = sum(out)
    return total


class Box:
    def outer(self):
        def inner():
            return 1
        return inner()
'''

PY_STRIPPED = '''import os

RATE = 3


def scale(values, factor=2):
    """Multiply every value."""
    ...


class Box:
    def outer(self):
        ...
'''


def test_split_in_file():
    text = "abc\ndef\n"
    assert split_in_file(text, (0, 3)) == ("", "\ndef\n")
    assert split_in_file(text, (4, 8)) == ("abc\n", "")
    pre, suf = split_in_file(text, (2, 5))
    assert pre + text[2:5] + suf == text
    with pytest.raises(contextgen.UsageError):
        split_in_file(text, (5, 100))


def test_strip_python_bodies():
    tree = parse_text(PY_SOURCE, "Python")
    out = strip_function_bodies(tree)
    assert out == PY_STRIPPED
    assert "inner" not in out
    assert parse_text(out, "Python").errors == 0


def test_strip_brace_bodies():
    java = "/** Adds. */\npublic int add(int a, int b) {\n    int c = a + b;\n    return c;\n}\n"
    assert strip_function_bodies(parse_text(java, "Java")) == (
        "/** Adds. */\npublic int add(int a, int b) {\n    // ...\n}\n")
    go = "func f() int {\n\treturn 1\n}\n"
    assert strip_function_bodies(parse_text(go, "Go")) == "func f() int {\n\t// ...\n}\n"


def test_strip_without_functions_is_identity():
    src = "x = 1\ny = [i for i in range(3)]\n"
    assert strip_function_bodies(parse_text(src, "Python")) == src


def test_strip_fixture_files_reparse(fixture_repos):
    for rid, (_, trees, _, _) in fixture_repos.items():
        for path, tree in trees.items():
            out = strip_function_bodies(tree)
            assert parse_text(out, tree.language).errors == 0, (rid, path)


def _trees(files):
    return {p: parse(SourceFile("r", p, "Python", c)) for p, c in files.items()}


def test_dependency_context():
    trees = _trees({"a.py": "def f():\n    return 1\n", "b.py": "def g():\n    return 2\n",
                    "main.py": "import a\nimport b\nimport json\nx = a.f()\n",
                    "solo.py": "x = 1\n"})
    index = build_symbol_index(trees)
    snips = contextgen.dependency_context("main.py", index, trees)
    assert [(s.origin, s.source_path) for s in snips] == [("Dependency", "a.py"),
                                                         ("Dependency", "b.py")]
    assert snips[0].text == "def f():\n    ...\n"
    assert contextgen.dependency_context("solo.py", index, trees) == []


# -- retrieval ---------------------------------------------------------------

_FLAT = re.compile(r"\w+|[^\w\s]")


def _brute(files, query, exclude, k=10):
    q = set(_FLAT.findall(query))
    rows = []
    for path in sorted(files):
        lines = files[path].split("\n")
        if len(lines) > 1 and lines[-1] == "":
            lines.pop()
        for s in range(0, len(lines), 20):
            if exclude and path == exclude[0] and not (s + 19 < exclude[1] or s > exclude[2]):
                continue
            w = set(_FLAT.findall("\n".join(lines[s:s + 20])))
            sim = len(q & w) / len(q | w) if q | w else 1.0
            rows.append((-sim, path, s))
    rows.sort()
    return [(p, s, -n) for n, p, s in rows[:k]]


def _synthetic_repo(seed, n_windows=30):
    rng = random.Random(seed)
    words = [f"w{i}" for i in range(25)]
    files = {}
    for f in range(3):
        lines = [" ".join(rng.choice(words) for _ in range(rng.randint(1, 5)))
                 for _ in range(20 * n_windows // 3)]
        files[f"f{f}.py"] = "\n".join(lines) + "\n"
    return files


@pytest.mark.parametrize("seed", range(5))
def test_retrieval_matches_brute_force(seed):
    files = _synthetic_repo(seed)
    corpus = contextgen.RetrievalCorpus(files)
    assert len(corpus.windows) == 30
    rng = random.Random(seed)
    for _ in range(10):
        query = "\n".join(rng.choice(list(files.values())).split("\n")[rng.randint(0, 150):][:20])
        ex = ("f1.py", rng.randint(0, 150), rng.randint(150, 199))
        got = [(s.source_path, s.start_line, s.similarity) for s in corpus.query(query, ex)]
        assert got == _brute(files, query, ex)
        assert [s.rank for s in corpus.query(query, ex)] == list(range(1, 11))


def test_retrieval_exact_copy_ranks_first():
    block = "\n".join(f"value_{i} = compute_{i}(x)" for i in range(20))
    files = {"a.py": block + "\n", "b.py": "\n".join(f"other{i} = 1" for i in range(20)) + "\n"}
    hits = contextgen.RetrievalCorpus(files).query(block)
    assert (hits[0].source_path, hits[0].similarity, hits[0].rank) == ("a.py", 1.0, 1)
    assert len(hits) == 2


def test_retrieval_context_excludes_task_lines_and_empty_prefix():
    files = {"m.py": "a = 1\nb = 2\n", "o.py": "a = 1\n"}
    task = CompletionTask("t", "r", "m.py", "Python", "SingleLine", (6, 11), (1, 1), "b = 2", 3)
    hits = contextgen.retrieval_context(task, files)
    assert [h.source_path for h in hits] == ["o.py"]
    first = CompletionTask("t", "r", "m.py", "Python", "SingleLine", (0, 5), (0, 0), "a = 1", 3)
    assert contextgen.retrieval_context(first, files) == []


# -- prompt assembly ---------------------------------------------------------


def _ret(rank, text):
    return CrossFileSnippet("Retrieval", f"r{rank}.py", text, rank, 0.5, 0)


def test_assemble_without_snippets():
    b = assemble_prompt("t", "a = ", "\nb = 2", [])
    assert b.assembled == "<PRE>a = <SUF>\nb = 2<MID>"
    assert b.token_length == count_prompt_tokens(b.assembled, DEFAULT_SCHEME) == 8
    aix = assemble_prompt("t", "a = ", "", [], AIX_SCHEME)
    assert aix.assembled == "<AIX-SPAN-PRE>a = <AIX-SPAN-POST><AIX-SPAN-MIDDLE>"


def test_assemble_layout_and_headers():
    dep = CrossFileSnippet("Dependency", "dep.py", "def f():\n    ...")
    b = assemble_prompt("t", "x", "y", [_ret(2, "two"), dep, _ret(1, "one")])
    assert b.assembled == ("# path: dep.py\ndef f():\n    ...\n# path: r1.py\none\n"
                           "# path: r2.py\ntwo\n<PRE>x<SUF>y<MID>")
    go = assemble_prompt("t", "x", "y", [_ret(1, "one")], language="Go")
    assert go.assembled.startswith("// path: r1.py\n")


def test_truncation_drops_lowest_ranks_first():
    snips = [_ret(r, " ".join(f"t{r}_{i}" for i in range(10))) for r in range(1, 11)]
    full = assemble_prompt("t", "p", "s", snips)
    per = count_prompt_tokens(contextgen.format_snippet(snips[0], "Python"), DEFAULT_SCHEME)
    b = assemble_prompt("t", "p", "s", snips, window_limit=full.token_length - per - 1)
    assert [s.rank for s in b.snippets] == list(range(1, 9))
    assert b.dropped == {"retrieval": 2, "dependency": 0}
    assert b.token_length <= full.token_length - per - 1


def test_truncation_order_dependency_then_prefix():
    dep1 = CrossFileSnippet("Dependency", "d1.py", "a b c d")
    dep2 = CrossFileSnippet("Dependency", "d2.py", "e f g h")
    prefix = "".join(f"line{i} = {i}\n" for i in range(10))
    b = assemble_prompt("t", prefix, "end", [dep1, dep2, _ret(1, "q r s")], window_limit=25)
    assert b.snippets == []
    assert b.dropped == {"retrieval": 1, "dependency": 2}
    assert b.prefix_trimmed > 0 and prefix[b.prefix_trimmed - 1] == "\n"
    assert b.token_length <= 25
    only_first = assemble_prompt("t", prefix, "end", [dep1]).token_length
    b2 = assemble_prompt("t", prefix, "end", [dep1, dep2, _ret(1, "q r s")],
                         window_limit=only_first)
    assert [s.source_path for s in b2.snippets] == ["d1.py"]
    assert b2.dropped == {"retrieval": 1, "dependency": 1} and b2.prefix_trimmed == 0


def test_oversize():
    with pytest.raises(contextgen.OversizeError):
        assemble_prompt("t", "a", "x y z w v", [], window_limit=5)


def test_token_limit_holds_for_random_tasks():
    rng = random.Random(0)
    words = ["x", "=", "foo", "(", ")", "bar", "+", "1"]
    for _ in range(1000):
        prefix = "".join(" ".join(rng.choice(words) for _ in range(rng.randint(0, 6))) + "\n"
                         for _ in range(rng.randint(0, 8)))
        suffix = " ".join(rng.choice(words) for _ in range(rng.randint(0, 4)))
        snips = [_ret(r, " ".join(rng.choice(words) for _ in range(rng.randint(1, 8))))
                 for r in range(1, rng.randint(1, 11))]
        limit = rng.randint(5, 120)
        try:
            b = assemble_prompt("t", prefix, suffix, snips, window_limit=limit)
        except contextgen.OversizeError:
            assert count_prompt_tokens(f"<PRE><SUF>{suffix}<MID>", DEFAULT_SCHEME) > limit
            continue
        assert b.token_length <= limit
        recount = len(_FLAT.findall(b.assembled.replace("<PRE>", " ").replace("<SUF>", " ")
                                    .replace("<MID>", " "))) + 3
        assert recount == b.token_length
        assert b.assembled.endswith(suffix + "<MID>")


def test_assembly_is_idempotent():
    snips = [_ret(1, "alpha beta"), CrossFileSnippet("Dependency", "d.py", "gamma")]
    a = assemble_prompt("t", "pre\nfix\n", "suf", snips, window_limit=12)
    b = assemble_prompt("t", "pre\nfix\n", "suf", snips, window_limit=12)
    assert a.to_json() == b.to_json()
