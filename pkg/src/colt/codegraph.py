"""Lightweight syntax trees, symbol index and cross-file call detection.

The parser covers a reduced grammar shared by the four languages:
functions, types, blocks, if-statements, loops, imports and comments.
Everything else becomes an ``Other`` node. Parsing never fails on bad
input; unbalanced regions are absorbed and counted in ``SyntaxTree.errors``.
"""

from __future__ import annotations

import posixpath
import time
from dataclasses import dataclass, field

from .lexer import LANGUAGES, Token, UnsupportedLanguage, tokenize

NODE_KINDS = ("Function", "Class", "Block", "IfStatement", "Loop", "ImportStatement",
              "Comment", "Other")

DEFAULT_PARSE_TIMEOUT = 5.0


class ParseTimeout(Exception):
    pass


@dataclass
class Node:
    kind: str
    start: int
    end: int
    start_line: int
    end_line: int  # inclusive
    children: list[int] = field(default_factory=list)
    parent: int = -1
    name: str | None = None
    declares: str | None = None  # prototype/constant name on Other nodes


@dataclass
class SyntaxTree:
    file_id: str
    language: str
    text: str
    nodes: list[Node]
    root: int = 0
    errors: int = 0
    tokens: list[Token] = field(default_factory=list, repr=False)

    def walk(self, idx: int | None = None):
        """Pre-order traversal yielding node indices."""
        stack = [self.root if idx is None else idx]
        while stack:
            i = stack.pop()
            yield i
            stack.extend(reversed(self.nodes[i].children))

    def of_kind(self, kind: str) -> list[int]:
        return [i for i in self.walk() if self.nodes[i].kind == kind]

    def depth(self, idx: int) -> int:
        d = 0
        while self.nodes[idx].parent >= 0:
            idx = self.nodes[idx].parent
            d += 1
        return d

    def body_of(self, idx: int) -> int | None:
        """The Block child carrying a Function/Class body."""
        for c in self.nodes[idx].children:
            if self.nodes[c].kind == "Block":
                return c
        return None

    def text_of(self, idx: int) -> str:
        n = self.nodes[idx]
        return self.text[n.start:n.end]


# ---------------------------------------------------------------------------
# tree assembly helpers


class _Builder:
    def __init__(self, text: str, tokens: list[Token], deadline: float | None):
        self.text = text
        self.tokens = tokens
        self.nodes: list[Node] = []
        self.errors = 0
        self.deadline = deadline
        self._ticks = 0

    def tick(self):
        self._ticks += 1
        if self.deadline is not None and self._ticks % 64 == 0 and time.monotonic() > self.deadline:
            raise ParseTimeout()

    def new(self, kind: str, first: Token, last: Token, children=(), **kw) -> int:
        idx = len(self.nodes)
        self.nodes.append(Node(kind, first.start, last.end, first.line,
                               last.line + self.text.count("\n", last.start, last.end),
                               list(children), **kw))
        for c in children:
            self.nodes[c].parent = idx
        return idx

    def span_node(self, kind: str, children: list[int], **kw) -> int:
        """Node spanning exactly its children (used for Python suites)."""
        a, b = self.nodes[children[0]], self.nodes[children[-1]]
        idx = len(self.nodes)
        self.nodes.append(Node(kind, a.start, b.end, a.start_line, b.end_line, list(children), **kw))
        for c in children:
            self.nodes[c].parent = idx
        return idx


def _attach_comments(b: _Builder, root: int, comments: list[Token]) -> None:
    """Insert Comment nodes under the innermost node containing them.

    Consecutive full-line comments are merged into one node.
    """
    text = b.text
    groups: list[list[Token]] = []
    for tok in comments:
        line_start = text.rfind("\n", 0, tok.start) + 1
        full_line = text[line_start:tok.start].strip() == ""
        if (groups and full_line and groups[-1][-1].line + 1 == tok.line
                and getattr(groups[-1], "full", False)):
            prev = groups[-1][-1]
            between = text[prev.end:tok.start]
            if between.count("\n") == 1 and between.strip() == "":
                groups[-1].append(tok)
                continue
        g = _Group([tok])
        g.full = full_line
        groups.append(g)
    for g in groups:
        idx = b.new("Comment", g[0], g[-1])
        cnode = b.nodes[idx]
        parent = root
        while True:
            nxt = None
            for c in b.nodes[parent].children:
                n = b.nodes[c]
                if n.start <= cnode.start and cnode.end <= n.end and n.kind != "Comment":
                    nxt = c
                    break
            if nxt is None:
                break
            parent = nxt
        b.nodes[parent].children.append(idx)
        cnode.parent = parent
        b.nodes[parent].children.sort(key=lambda c: b.nodes[c].start)


class _Group(list):
    full = False


# ---------------------------------------------------------------------------
# Python: indentation-structured logical lines

_PY_COMPOUND = {"def", "class", "if", "elif", "else", "for", "while", "try", "except",
                "finally", "with", "async", "match", "case"}


def _py_logical_lines(text: str, tokens: list[Token]) -> list[list[Token]]:
    lines: list[list[Token]] = []
    cur: list[Token] = []
    depth = 0
    prev = None
    for tok in tokens:
        if prev is not None and depth == 0 and cur:
            gap = text[prev.end:tok.start]
            if "\n" in gap and "\\\n" not in gap.replace("\\\r\n", "\\\n"):
                lines.append(cur)
                cur = []
        cur.append(tok)
        if tok.kind == "op":
            if tok.text in "([{":
                depth += 1
            elif tok.text in ")]}":
                depth = max(0, depth - 1)
        prev = tok
    if cur:
        lines.append(cur)
    return lines


def _indent_of(text: str, tok: Token) -> int:
    line_start = text.rfind("\n", 0, tok.start) + 1
    return len(text[line_start:tok.start].expandtabs(8))


def _header_colon(line: list[Token]) -> int | None:
    depth = 0
    for i, t in enumerate(line):
        if t.kind != "op":
            continue
        if t.text in "([{":
            depth += 1
        elif t.text in ")]}":
            depth -= 1
        elif t.text == ":" and depth == 0:
            return i
    return None


def _parse_python(b: _Builder) -> tuple[list[int], list[Token]]:
    code = [t for t in b.tokens if t.kind != "comment"]
    comments = [t for t in b.tokens if t.kind == "comment"]
    lines = _py_logical_lines(b.text, code)
    indents = [_indent_of(b.text, ln[0]) for ln in lines]
    pos = 0

    def simple(line: list[Token]) -> int:
        first = line[0]
        if first.text == "import" or (first.text == "from" and any(t.text == "import" for t in line)):
            return b.new("ImportStatement", first, line[-1])
        declares = None
        if (len(line) >= 3 and first.kind == "ident" and line[1].text == "="
                and first.text.isupper()):
            declares = first.text
        return b.new("Other", first, line[-1], declares=declares)

    def inline_block(toks: list[Token]) -> int:
        stmt = simple(toks)
        return b.span_node("Block", [stmt])

    def suite(level: int) -> list[int]:
        nonlocal pos
        out: list[int] = []
        while pos < len(lines) and indents[pos] >= level:
            b.tick()
            if indents[pos] > level and out:
                # dangling indentation: absorb as siblings
                b.errors += 1
            out.append(statement())
        return out

    def clause(line: list[Token], colon: int, hdr_indent: int) -> int:
        """Body Block for a header line ending at ``colon``."""
        nonlocal pos
        rest = line[colon + 1:]
        if rest:
            return inline_block(rest)
        if pos < len(lines) and indents[pos] > hdr_indent:
            body = suite(indents[pos])
            return b.span_node("Block", body)
        b.errors += 1
        return -1

    def statement() -> int:
        nonlocal pos
        line = lines[pos]
        my_indent = indents[pos]
        pos += 1
        first = line[0]
        word = first.text
        if word == "async" and len(line) > 1 and line[1].text in ("def", "for", "with"):
            word = line[1].text
        colon = _header_colon(line) if (first.kind == "keyword" or word in ("match", "case")) else None
        if word not in _PY_COMPOUND or colon is None:
            return simple(line)
        body = clause(line, colon, my_indent)
        children = [body] if body >= 0 else []
        last_end = b.nodes[body] if body >= 0 else None
        kind = {"def": "Function", "class": "Class", "if": "IfStatement",
                "for": "Loop", "while": "Loop"}.get(word, "Other")
        name = None
        if kind in ("Function", "Class"):
            k = 1 if first.text != "async" else 2
            if k < len(line) and line[k].kind == "ident":
                name = line[k].text
        # chain continuation clauses at the same indent into the same node
        if kind in ("IfStatement", "Loop") or word in ("try", "with", "match"):
            cont = {"IfStatement": ("elif", "else"), "Loop": ("else",),
                    }.get(kind, ("except", "else", "finally"))
            while pos < len(lines) and indents[pos] == my_indent and lines[pos][0].text in cont:
                nline = lines[pos]
                pos += 1
                c2 = _header_colon(nline)
                if c2 is None:
                    b.errors += 1
                    continue
                blk = clause(nline, c2, my_indent)
                if blk >= 0:
                    children.append(blk)
                    last_end = b.nodes[blk]
        last_tok = line[-1]
        idx = len(b.nodes)
        end = last_end.end if last_end is not None else last_tok.end
        end_line = last_end.end_line if last_end is not None else last_tok.line
        b.nodes.append(Node(kind, first.start, end, first.line, end_line, children, name=name))
        for c in children:
            b.nodes[c].parent = idx
        return idx

    top: list[int] = []
    while pos < len(lines):
        before = pos
        top.extend(suite(indents[pos]))
        if pos == before:  # should not happen; guarantees progress
            top.append(statement())
    return top, comments


# ---------------------------------------------------------------------------
# Brace languages: Java, C++, Go

_CONTROL = {"if", "for", "while", "switch", "catch", "synchronized", "return", "sizeof",
            "new", "throw", "else", "do", "try", "case", "delete", "alignof", "decltype",
            "static_assert", "typeid", "select", "go", "defer", "range"}
_FUNC_TRAILERS = {"const", "noexcept", "override", "final", "volatile", "mutable", "throws",
                  "&", "&&", "->", "::", ".", ",", "<", ">", "*", "[", "]", "=", "default",
                  "delete", "0", "try", "requires"}
_TYPE_WORDS = {"class", "struct", "interface", "enum", "union", "record"}


def _go_insert_semicolons(text: str, tokens: list[Token]) -> list[Token]:
    out: list[Token] = []
    for i, tok in enumerate(tokens):
        out.append(tok)
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if tok.kind == "comment":
            continue
        ends_line = nxt is None or "\n" in text[tok.end:nxt.start] or (
            nxt.kind == "comment" and (nxt.text.startswith("//") or "\n" in nxt.text))
        if not ends_line:
            continue
        if (tok.kind in ("ident", "number", "string")
                or tok.text in ("break", "continue", "fallthrough", "return", "++", "--",
                                ")", "]", "}")):
            out.append(Token("op", ";", tok.end, tok.end, tok.line))
    return out


def _is_virtual(tok: Token) -> bool:
    return tok.start == tok.end


def _match_close(toks: list[Token], i: int, end: int) -> int:
    """Index of the bracket closing ``toks[i]``; ``end - 1`` when unbalanced."""
    pairs = {"(": ")", "[": "]", "{": "}"}
    stack = [pairs[toks[i].text]]
    j = i + 1
    while j < end:
        t = toks[j].text
        if toks[j].kind == "op":
            if t in pairs:
                stack.append(pairs[t])
            elif t in (")", "]", "}"):
                # tolerate mismatches by popping to the matching opener
                while stack and stack[-1] != t:
                    stack.pop()
                if stack:
                    stack.pop()
                if not stack:
                    return j
        j += 1
    return -1


class _BraceParser:
    def __init__(self, b: _Builder, language: str, toks: list[Token]):
        self.b = b
        self.lang = language
        self.toks = toks

    # -- helpers ---------------------------------------------------------
    def last_real(self, i: int, j: int) -> Token:
        """Last non-virtual token in toks[i:j+1]."""
        for k in range(j, i - 1, -1):
            if not _is_virtual(self.toks[k]):
                return self.toks[k]
        return self.toks[i]

    def block(self, i: int, end: int, context: str) -> tuple[int, int]:
        """Parse ``{...}`` starting at ``i``; returns (node, index after)."""
        close = _match_close(self.toks, i, end)
        if close < 0:
            self.b.errors += 1
            close_idx = end - 1
            inner = self.items(i + 1, end, context)
            node = self.b.new("Block", self.toks[i], self.last_real(i, close_idx), inner)
            return node, end
        inner = self.items(i + 1, close, context)
        return self.b.new("Block", self.toks[i], self.toks[close], inner), close + 1

    def skip_semis(self, i: int, end: int) -> int:
        while i < end and self.toks[i].text == ";":
            i += 1
        return i

    def items(self, i: int, end: int, context: str) -> list[int]:
        out = []
        while True:
            i = self.skip_semis(i, end)
            if i >= end:
                return out
            self.b.tick()
            node, i = self.statement(i, end, context)
            if node is not None:
                out.append(node)

    # -- statements ------------------------------------------------------
    def scan(self, i: int, end: int, semis: bool = True) -> tuple[int, str, list[tuple[int, int]]]:
        """Advance to a statement terminator.

        Returns (index of terminator, kind of terminator: ';' '{' '}' or 'eof',
        brace groups found inside parentheses).
        """
        toks = self.toks
        depth = 0
        inner: list[tuple[int, int]] = []
        j = i
        while j < end:
            t = toks[j]
            if t.kind == "op":
                x = t.text
                if x in "([":
                    depth += 1
                elif x in ")]":
                    depth = max(0, depth - 1)
                elif x == "{":
                    if depth == 0:
                        return j, "{", inner
                    close = _match_close(toks, j, end)
                    if close < 0:
                        self.b.errors += 1
                        return end, "eof", inner
                    inner.append((j, close))
                    j = close
                elif x == "}":
                    if depth == 0:
                        return j, "}", inner
                elif x == ";" and depth == 0 and semis:
                    return j, ";", inner
            j += 1
        return end, "eof", inner

    def is_code_group(self, a: int, c: int) -> bool:
        """A brace group inside an expression holds code (lambda, anonymous
        class, function literal) rather than an initializer or literal."""
        if a > 0 and self.toks[a - 1].text in (")", "->"):
            return True
        return any(self.toks[k].text == ";" for k in range(a + 1, c))

    def expr_blocks(self, groups: list[tuple[int, int]]) -> list[int]:
        kids = []
        for a, c in groups:
            if self.is_code_group(a, c):
                inner = self.items(a + 1, c, "body")
                kids.append(self.b.new("Block", self.toks[a], self.toks[c], inner))
            else:
                kids.append(self.b.new("Other", self.toks[a], self.toks[c]))
        return kids

    def finish_expression(self, i: int, j: int, end: int, kids: list[int]) -> tuple[int, int]:
        """Continue an expression statement past brace groups up to ';'."""
        toks = self.toks
        while j < end and toks[j].text == "{":
            close = _match_close(toks, j, end)
            if close >= 0 and not self.is_code_group(j, close):
                kids.append(self.b.new("Other", toks[j], toks[close]))
                j = close + 1
            else:
                blk, j = self.block(j, end, "body")
                kids.append(blk)
            k, term, groups = self.scan(j, end)
            kids.extend(self.expr_blocks(groups))
            j = k
            if term != "{":
                break
        last = j if j < end and toks[j].text == ";" else j - 1
        last_tok = self.last_real(i, min(last, end - 1))
        node = self.b.new("Other", toks[i], last_tok, kids)
        return node, (j + 1 if j < end and toks[j].text == ";" else j)

    def simple(self, i: int, j: int, kind: str = "Other", kids=(), **kw) -> int:
        last = self.last_real(i, j)
        return self.b.new(kind, self.toks[i], last, list(kids), **kw)

    def statement(self, i: int, end: int, context: str) -> tuple[int | None, int]:
        toks = self.toks
        t = toks[i]
        if t.kind == "directive":
            kind = "ImportStatement" if t.text.lstrip().lstrip("#").lstrip().startswith(
                ("include", "import")) else "Other"
            declares = None
            if kind == "Other":
                parts = t.text.lstrip().lstrip("#").split()
                if len(parts) >= 2 and parts[0] == "define":
                    declares = parts[1].split("(")[0]
            return self.b.new(kind, t, t, declares=declares), i + 1
        if t.text == "}":
            self.b.errors += 1
            return self.b.new("Other", t, t), i + 1
        if t.text == "{":
            return self.block(i, end, "body" if context == "body" else context)
        # labels: `public:`, `case X:`, `default:`
        if t.text in ("public", "private", "protected") and self.lang == "Cpp" and \
                i + 1 < end and toks[i + 1].text == ":":
            return self.b.new("Other", t, toks[i + 1]), i + 2
        if t.text in ("case", "default") and context == "body":
            j = i + 1
            depth = 0
            while j < end:
                x = toks[j].text
                if x in "([{":
                    depth += 1
                elif x in ")]}":
                    if depth == 0:
                        break
                    depth -= 1
                elif x in (":", "->") and depth == 0:
                    break
                j += 1
            if j < end and toks[j].text == ":":
                return self.b.new("Other", t, toks[j]), j + 1
        if context == "body":
            if t.text == "if":
                return self.if_statement(i, end)
            if t.text in ("for", "while"):
                return self.loop(i, end)
            if t.text == "do":
                return self.do_loop(i, end)
        j, term, groups = self.scan(i, end)
        if term in (";", "}", "eof"):
            return self.simple_statement(i, j, end, term, groups, context)
        # term == "{": header toks[i:j]
        return self.braced(i, j, end, context, groups)

    def simple_statement(self, i, j, end, term, groups, context):
        toks = self.toks
        stop = j if term == ";" else j - 1
        if stop < i:
            return None, j + 1
        first = toks[i].text
        kind = "Other"
        declares = None
        if first == "import" or (self.lang == "Java" and first == "package" and False):
            kind = "ImportStatement"
        elif context != "body":
            declares = self.declared_name(i, stop)
        kids = self.expr_blocks(groups)
        node = self.simple(i, stop if term == ";" else j - 1, kind, kids, declares=declares)
        return node, (j + 1 if term == ";" else j)

    def declared_name(self, i: int, stop: int) -> str | None:
        """Name of a prototype or constant declared at top/class level."""
        toks = self.toks
        words = [toks[k].text for k in range(i, stop + 1)]
        if self.lang == "Go" and words and words[0] == "const" and len(words) > 1:
            return words[1] if toks[i + 1].kind == "ident" else None
        if self.lang == "Cpp" or self.lang == "Java":
            # prototype: ident '(' ... ')' [qualifiers] ';'
            for k in range(i, stop + 1):
                if toks[k].text == "(" and k > i and toks[k - 1].kind == "ident":
                    if "=" in words[:k - i]:
                        break
                    close = _match_close(toks, k, stop + 1)
                    if close > 0 and k - 1 > i:
                        return toks[k - 1].text
                    break
            if ("const" in words or "constexpr" in words or "final" in words) and "=" in words:
                eq = words.index("=")
                if eq > 0 and toks[i + eq - 1].kind == "ident":
                    return toks[i + eq - 1].text
        return None

    def cond_then_body(self, i: int, end: int) -> tuple[list[int], int]:
        """After a control keyword at ``i``: skip the condition, parse the body."""
        toks = self.toks
        j = i + 1
        if self.lang != "Go" and j < end and toks[j].text == "(":
            close = _match_close(toks, j, end)
            j = close + 1 if close > 0 else end
        else:
            k, term, groups = self.scan(j, end, semis=self.lang != "Go")
            kids = self.expr_blocks(groups)
            if term != "{":
                self.b.errors += 1
                return kids, k
            j = k
        if j < end and toks[j].text == "{":
            blk, j = self.block(j, end, "body")
            return [blk], j
        if j >= end:
            return [], j
        node, j = self.statement(j, end, "body")
        return ([node] if node is not None else []), j

    def if_statement(self, i: int, end: int) -> tuple[int, int]:
        toks = self.toks
        kids, j = self.cond_then_body(i, end)
        while True:
            k = j
            # Go inserts ';' after '}' at line end; `else` must follow on the same line
            if k < end and toks[k].text == "else":
                if k + 1 < end and toks[k + 1].text == "if":
                    more, j = self.cond_then_body(k + 1, end)
                    kids.extend(more)
                    continue
                if k + 1 < end and toks[k + 1].text == "{":
                    blk, j = self.block(k + 1, end, "body")
                    kids.append(blk)
                elif k + 1 < end:
                    node, j = self.statement(k + 1, end, "body")
                    if node is not None:
                        kids.append(node)
                break
            break
        last = self.last_real(i, j - 1)
        return self.b.new("IfStatement", toks[i], last, kids), j

    def loop(self, i: int, end: int) -> tuple[int, int]:
        kids, j = self.cond_then_body(i, end)
        return self.b.new("Loop", self.toks[i], self.last_real(i, j - 1), kids), j

    def do_loop(self, i: int, end: int) -> tuple[int, int]:
        toks = self.toks
        j = i + 1
        kids = []
        if j < end and toks[j].text == "{":
            blk, j = self.block(j, end, "body")
            kids.append(blk)
        k, term, _ = self.scan(j, end)
        stop = k if term == ";" else k - 1
        node = self.b.new("Loop", toks[i], self.last_real(i, max(stop, i)), kids)
        return node, (k + 1 if term == ";" else k)

    def function_name(self, i: int, j: int, context: str) -> str | None:
        """Name if toks[i:j] is a function header, else None."""
        toks = self.toks
        if self.lang == "Go":
            if toks[i].text != "func" or context == "body":
                return None
            k = i + 1
            if k < j and toks[k].text == "(":
                close = _match_close(toks, k, j)
                if close < 0:
                    return None
                k = close + 1
            if k < j and toks[k].kind == "ident":
                return toks[k].text
            return None
        if context == "body":
            return None
        # skip annotations
        k = i
        while k < j and toks[k].text == "@" and k + 1 < j:
            k += 2
            while k + 1 < j and toks[k].text == "." and toks[k + 1].kind == "ident":
                k += 2
            if k < j and toks[k].text == "(":
                close = _match_close(toks, k, j)
                k = close + 1 if close > 0 else j
        start = k
        depth = 0
        paren = None
        while k < j:
            x = toks[k].text
            if x == "=" and depth == 0:
                return None
            if x == "(":
                paren = k
                break
            if x in _TYPE_WORDS or x == "namespace":
                return None
            k += 1
        if paren is None or paren == start:
            return None
        name_tok = toks[paren - 1]
        if name_tok.kind == "ident":
            name = name_tok.text
        elif paren - 2 >= start and toks[paren - 2].text == "operator":
            name = "operator" + name_tok.text
        else:
            return None
        if name in _CONTROL:
            return None
        close = _match_close(toks, paren, j)
        if close < 0:
            return None
        # trailers after ')' must look like qualifiers or an initializer list
        rest = toks[close + 1:j]
        if rest and rest[0].text == ":" and self.lang == "Cpp":
            return name
        for t in rest:
            if t.kind in ("ident", "keyword") or t.text in _FUNC_TRAILERS or t.text in "()":
                continue
            return None
        return name

    def braced(self, i: int, j: int, end: int, context: str, groups) -> tuple[int, int]:
        toks = self.toks
        header = [t.text for t in toks[i:j]]
        name = self.function_name(i, j, context)
        if name is not None:
            kids = self.expr_blocks(groups)
            blk, k = self.block(j, end, "body")
            kids.append(blk)
            return self.b.new("Function", toks[i], toks[k - 1], kids, name=name), k
        type_kw = next((w for w in header if w in _TYPE_WORDS), None)
        if context != "body" and "=" not in header and (
                type_kw is not None or (self.lang == "Go" and header and header[0] == "type")):
            if self.lang == "Go":
                cname = header[1] if len(header) > 1 else None
            else:
                pos = header.index(type_kw)
                cname = None
                for w, t in zip(header[pos + 1:], toks[i + pos + 1:j]):
                    if t.kind == "ident":
                        cname = w
                    if w in (":", "extends", "implements", "("):
                        break
            ctx = "class" if self.lang != "Go" else "body"
            blk, k = self.block(j, end, ctx)
            node_end = k
            # C++: `struct S {...} s;`  Java record/enum bodies end at '}'
            if self.lang == "Cpp":
                k2, term, _ = self.scan(k, end)
                if term == ";" and k2 - k < 8:
                    node_end = k2 + 1
            last = self.last_real(i, node_end - 1)
            return self.b.new("Class", toks[i], last, [blk], name=cname), node_end
        first = header[0] if header else ""
        if context != "body" and "=" not in header and (
                first in ("namespace", "extern", "static") or self.lang == "Go"
                and first in ("import", "const", "var")):
            ctx = "top" if first in ("namespace", "extern") else "body"
            kids = self.expr_blocks(groups)
            blk, k = self.block(j, end, ctx)
            kids.append(blk)
            return self.b.new("Other", toks[i], toks[k - 1], kids), k
        if first in ("switch", "try", "catch", "finally", "synchronized", "select", "else",
                     "static", "unsafe", "checked", "lock") or (
                context == "body" and "=" not in header
                and not {"return", "new", "func", "go", "defer"} & set(header)
                and not any(t.kind == "op" and t.text not in ("(", ")", ",", ".", ":",
                                                               "::", "<", ">", "*", "&")
                            for t in toks[i:j])):
            kids = self.expr_blocks(groups)
            blk, k = self.block(j, end, "body")
            kids.append(blk)
            # try/catch/finally chains
            while k < end and toks[k].text in ("catch", "finally"):
                k2, term, g2 = self.scan(k, end)
                kids.extend(self.expr_blocks(g2))
                if term != "{":
                    break
                blk, k = self.block(k2, end, "body")
                kids.append(blk)
            return self.b.new("Other", toks[i], toks[k - 1], kids), k
        kids = self.expr_blocks(groups)
        return self.finish_expression(i, j, end, kids)


# ---------------------------------------------------------------------------
# public API


def parse(file, timeout: float | None = DEFAULT_PARSE_TIMEOUT, file_id: str | None = None
          ) -> SyntaxTree:
    """Parse a source file (anything with ``content`` and ``language``)."""
    language = file.language
    if language not in LANGUAGES:
        raise UnsupportedLanguage(language)
    text = file.content
    deadline = time.monotonic() + timeout if timeout else None
    tokens = tokenize(text, language)
    b = _Builder(text, tokens, deadline)
    root = b.nodes.append(Node("Other", 0, len(text), 0, max(text.count("\n"), 0))) or 0
    if language == "Python":
        top, comments = _parse_python(b)
    else:
        toks = tokens
        if language == "Go":
            toks = _go_insert_semicolons(text, tokens)
        code = [t for t in toks if t.kind != "comment"]
        comments = [t for t in toks if t.kind == "comment"]
        top = _BraceParser(b, language, code).items(0, len(code), "top")
    b.nodes[root].children = list(top)
    for c in top:
        b.nodes[c].parent = root
    if comments:
        _attach_comments(b, root, comments)
    fid = file_id or getattr(file, "file_id", None) or getattr(file, "relative_path", "")
    return SyntaxTree(fid, language, text, b.nodes, root, b.errors, tokens)


def parse_text(text: str, language: str, timeout: float | None = DEFAULT_PARSE_TIMEOUT
               ) -> SyntaxTree:
    return parse(_Text(text, language), timeout=timeout, file_id="<text>")


@dataclass
class _Text:
    content: str
    language: str


def check_nesting(tree: SyntaxTree) -> bool:
    """Children lie within parents and siblings do not overlap."""
    for n in tree.nodes:
        prev_end = n.start
        for c in n.children:
            ch = tree.nodes[c]
            if ch.start < n.start or ch.end > n.end or ch.start < prev_end:
                return False
            prev_end = ch.end
    root = tree.nodes[tree.root]
    return root.start == 0 and root.end == len(tree.text)


# ---------------------------------------------------------------------------
# symbol index


@dataclass
class Definition:
    name: str
    kind: str  # function | type | constant
    file: str
    signature_span: tuple[int, int]
    body_span: tuple[int, int] | None
    doc_span: tuple[int, int] | None
    line: int
    container: str | None = None

    def to_json(self) -> dict:
        return {"name": self.name, "kind": self.kind, "file": self.file,
                "signature_span": list(self.signature_span),
                "body_span": list(self.body_span) if self.body_span else None,
                "doc_span": list(self.doc_span) if self.doc_span else None,
                "line": self.line, "container": self.container}


@dataclass
class ImportEdge:
    importer: str
    imported: str
    names: list[str]
    alias: str | None
    line: int

    def to_json(self) -> dict:
        return {"importer": self.importer, "imported": self.imported, "names": self.names,
                "alias": self.alias, "line": self.line}


@dataclass
class Reference:
    name: str
    file: str
    call_site_span: tuple[int, int]
    line: int
    qualifier: str | None = None
    resolved_def: int | None = None  # index into SymbolIndex.definitions

    def to_json(self) -> dict:
        return {"name": self.name, "file": self.file, "call_site_span": list(self.call_site_span),
                "line": self.line, "qualifier": self.qualifier, "resolved_def": self.resolved_def}


@dataclass
class SymbolIndex:
    definitions: list[Definition] = field(default_factory=list)
    imports: list[ImportEdge] = field(default_factory=list)
    references: list[Reference] = field(default_factory=list)

    def imported_files(self, path: str) -> list[str]:
        seen, out = set(), []
        for e in self.imports:
            if e.importer == path and e.imported not in seen:
                seen.add(e.imported)
                out.append(e.imported)
        return out

    def references_in(self, path: str) -> list[Reference]:
        return [r for r in self.references if r.file == path]

    def to_jsonl_records(self) -> list[dict]:
        out = []
        for i, d in enumerate(self.definitions):
            out.append({"type": "definition", "id": i, **d.to_json()})
        for e in self.imports:
            out.append({"type": "import", **e.to_json()})
        for r in self.references:
            out.append({"type": "reference", **r.to_json()})
        return out


def _doc_before(tree: SyntaxTree, idx: int) -> tuple[int, int] | None:
    node = tree.nodes[idx]
    if node.parent < 0:
        return None
    sibs = tree.nodes[node.parent].children
    pos = sibs.index(idx)
    if pos > 0:
        prev = tree.nodes[sibs[pos - 1]]
        if prev.kind == "Comment" and prev.end_line >= node.start_line - 1:
            return (prev.start, prev.end)
    return None


def _python_docstring(tree: SyntaxTree, body: int) -> tuple[int, int] | None:
    kids = [c for c in tree.nodes[body].children if tree.nodes[c].kind != "Comment"]
    if not kids:
        return None
    first = tree.nodes[kids[0]]
    toks = [t for t in tree.tokens if first.start <= t.start < first.end and t.kind != "comment"]
    if len(toks) == 1 and toks[0].kind == "string":
        return (first.start, first.end)
    return None


def collect_definitions(tree: SyntaxTree, path: str) -> list[Definition]:
    out = []
    for i in tree.walk():
        n = tree.nodes[i]
        container = None
        p = n.parent
        while p >= 0:
            if tree.nodes[p].kind == "Class":
                container = tree.nodes[p].name
                break
            if tree.nodes[p].kind == "Function":
                container = tree.nodes[p].name
                break
            p = tree.nodes[p].parent
        if n.kind in ("Function", "Class") and n.name:
            body = tree.body_of(i)
            bspan = (tree.nodes[body].start, tree.nodes[body].end) if body is not None else None
            sig_end = bspan[0] if bspan else n.end
            doc = _doc_before(tree, i)
            if doc is None and n.kind == "Function" and tree.language == "Python" and body is not None:
                doc = _python_docstring(tree, body)
            out.append(Definition(n.name, "function" if n.kind == "Function" else "type", path,
                                  (n.start, sig_end), bspan, doc, n.start_line, container))
        elif n.kind == "Other" and n.declares:
            is_const = (tree.language == "Python" or tree.text[n.start:n.end].lstrip("# \t")
                        .startswith(("define", "const")) or "=" in tree.text[n.start:n.end])
            kind = "constant" if is_const else "function"
            out.append(Definition(n.declares, kind, path, (n.start, n.end), None,
                                  _doc_before(tree, i), n.start_line, container))
    return out


def _definition_name_tokens(tree: SyntaxTree) -> set[int]:
    """Start offsets of tokens that name a definition (excluded from call sites)."""
    starts = set()
    for n in tree.nodes:
        name = n.name or n.declares
        if not name or n.kind not in ("Function", "Class", "Other"):
            continue
        limit = n.end
        for t in tree.tokens:
            if t.start < n.start:
                continue
            if t.start >= limit:
                break
            if t.text == name or (name.startswith("operator") and t.text == "operator"):
                starts.add(t.start)
                break
    return starts


def collect_call_sites(tree: SyntaxTree, path: str) -> list[Reference]:
    toks = [t for t in tree.tokens if t.kind != "comment"]
    skip = _definition_name_tokens(tree)
    out = []
    for k, t in enumerate(toks[:-1]):
        if t.kind != "ident" or toks[k + 1].text != "(" or t.start in skip:
            continue
        if tree.language == "Go" and k > 0 and toks[k - 1].text == "func":
            continue
        qual = None
        if k >= 2 and toks[k - 1].text in (".", "->", "::") and toks[k - 2].kind in ("ident", "keyword"):
            qual = toks[k - 2].text
        elif k >= 1 and toks[k - 1].text in (".", "->", "::"):
            qual = "<expr>"
        out.append(Reference(t.text, path, (t.start, t.end), t.line, qual))
    return out


# -- import resolution ------------------------------------------------------


def _py_module_names(path: str) -> list[str]:
    stem = path[:-3] if path.endswith(".py") else path
    parts = stem.split("/")
    if parts[-1] == "__init__":
        parts = parts[:-1]
    return [".".join(parts[k:]) for k in range(len(parts)) if parts[k:]]


class _Resolver:
    def __init__(self, files: dict[str, SyntaxTree]):
        self.files = files
        self.py_modules: dict[str, list[str]] = {}
        for path in sorted(files):
            if files[path].language == "Python":
                for name in _py_module_names(path):
                    self.py_modules.setdefault(name, []).append(path)

    def py_module(self, dotted: str, importer: str) -> str | None:
        cands = self.py_modules.get(dotted)
        if not cands:
            return None
        if len(cands) == 1:
            return cands[0]
        top = importer.split("/")[0]
        # prefer files sharing the importer's top directory, then the shortest path
        return sorted(cands, key=lambda p: (p.split("/")[0] != top, len(p), p))[0]

    def python(self, tree: SyntaxTree, path: str, node: Node) -> list[ImportEdge]:
        toks = [t for t in tree.tokens if node.start <= t.start < node.end and t.kind != "comment"]
        words = [t.text for t in toks]
        edges = []
        if words[0] == "import":
            for part in _split_commas(words[1:]):
                if not part:
                    continue
                alias = part[part.index("as") + 1] if "as" in part else None
                dotted = "".join(part[:part.index("as")] if "as" in part else part)
                target = self.py_module(dotted, path)
                if target and target != path:
                    # call sites record only the immediate qualifier: `a.b.c.f()` -> `c`
                    edges.append(ImportEdge(path, target, [], alias or dotted.rsplit(".", 1)[-1],
                                            node.start_line))
            return edges
        # from X import a, b as c
        imp = words.index("import")
        mod_words = words[1:imp]
        level = 0
        while mod_words and mod_words[0] in (".", "..."):
            level += len(mod_words[0])
            mod_words = mod_words[1:]
        mod = "".join(mod_words)
        if level:
            base = posixpath.dirname(path)
            for _ in range(level - 1):
                base = posixpath.dirname(base)
            prefix = base.replace("/", ".")
            mod = ".".join(x for x in (prefix, mod) if x)
        names = [w for w in words[imp + 1:] if w not in ("(", ")")]
        entries = []
        for part in _split_commas(names):
            if part:
                entries.append((part[0], part[part.index("as") + 1] if "as" in part else None))
        module_target = self._py_lookup(mod, path, level)
        plain = []
        for name, alias in entries:
            sub = self._py_lookup(".".join(x for x in (mod, name) if x), path, level)
            if sub and sub != path:
                edges.append(ImportEdge(path, sub, [], alias or name, node.start_line))
            else:
                plain.append(alias and f"{name} as {alias}" or name)
        if module_target and module_target != path and plain:
            edges.insert(0, ImportEdge(path, module_target, plain, None, node.start_line))
        return edges

    def _py_lookup(self, dotted: str, importer: str, level: int) -> str | None:
        if not dotted:
            return None
        if level:
            for cand in (dotted.replace(".", "/") + ".py", dotted.replace(".", "/") + "/__init__.py"):
                if cand in self.files:
                    return cand
            return None
        return self.py_module(dotted, importer)

    def java(self, tree: SyntaxTree, path: str, node: Node) -> list[ImportEdge]:
        toks = [t.text for t in tree.tokens if node.start <= t.start < node.end and t.kind != "comment"]
        words = [w for w in toks[1:] if w != ";"]
        static = bool(words) and words[0] == "static"
        if static:
            words = words[1:]
        dotted = "".join(words)
        parts = dotted.split(".")
        edges = []
        if parts[-1] == "*":
            suffix = "/".join(parts[:-1]) + "/"
            for p in sorted(self.files):
                if p.endswith(".java") and ("/" + p).rsplit("/", 1)[0].endswith("/" + suffix.rstrip("/")) \
                        and p != path:
                    edges.append(ImportEdge(path, p, [], None, node.start_line))
            return edges
        names = []
        if static:
            names = [parts[-1]]
            parts = parts[:-1]
        target = self._suffix_file("/".join(parts) + ".java")
        if target and target != path:
            edges.append(ImportEdge(path, target, names, parts[-1], node.start_line))
        return edges

    def _suffix_file(self, suffix: str, preferred_dir: str | None = None) -> str | None:
        if preferred_dir is not None:
            cand = posixpath.normpath(posixpath.join(preferred_dir, suffix))
            if cand in self.files:
                return cand
        matches = sorted(p for p in self.files if p == suffix or p.endswith("/" + suffix))
        if not matches:
            return None
        return min(matches, key=lambda p: (len(p), p))

    def cpp(self, tree: SyntaxTree, path: str, node: Node) -> list[ImportEdge]:
        text = tree.text[node.start:node.end]
        for open_, close in (('"', '"'), ("<", ">")):
            a = text.find(open_)
            if a >= 0:
                b = text.find(close, a + 1)
                if b > a:
                    inc = text[a + 1:b]
                    target = self._suffix_file(inc, posixpath.dirname(path) if open_ == '"' else None)
                    if target and target != path:
                        return [ImportEdge(path, target, [], None, node.start_line)]
                    return []
        return []

    def go(self, tree: SyntaxTree, path: str, node: Node) -> list[ImportEdge]:
        toks = [t for t in tree.tokens if node.start <= t.start < node.end and t.kind != "comment"]
        edges = []
        alias = None
        dirs = sorted({posixpath.dirname(p) for p in self.files if p.endswith(".go")})
        for t in toks[1:]:
            if t.kind == "ident" or t.text in ("_", "."):
                alias = t.text
                continue
            if t.kind != "string":
                continue
            ipath = t.text.strip('"`')
            best = None
            for d in dirs:
                if d and (ipath == d or ipath.endswith("/" + d)):
                    if best is None or len(d) > len(best):
                        best = d
            if best is not None:
                name = alias or ipath.rsplit("/", 1)[-1]
                for p in sorted(self.files):
                    if posixpath.dirname(p) == best and p.endswith(".go") and p != path:
                        edges.append(ImportEdge(path, p, [], name, node.start_line))
            alias = None
        return edges


def _split_commas(words: list[str]) -> list[list[str]]:
    out, cur = [], []
    for w in words:
        if w == ",":
            out.append(cur)
            cur = []
        else:
            cur.append(w)
    out.append(cur)
    return out


def build_symbol_index(trees: dict[str, SyntaxTree]) -> SymbolIndex:
    """Index definitions, in-repo import edges and call sites of one repository.

    ``trees`` maps repo-relative paths to parsed trees. A call resolves only
    when exactly one visible definition carries its name.
    """
    index = SymbolIndex()
    resolver = _Resolver(trees)
    defs_by_file: dict[str, list[int]] = {}
    for path in sorted(trees):
        for d in collect_definitions(trees[path], path):
            defs_by_file.setdefault(path, []).append(len(index.definitions))
            index.definitions.append(d)

    for path in sorted(trees):
        tree = trees[path]
        for i in tree.walk():
            n = tree.nodes[i]
            if n.kind != "ImportStatement":
                continue
            if tree.language == "Python":
                index.imports.extend(resolver.python(tree, path, n))
            elif tree.language == "Java":
                index.imports.extend(resolver.java(tree, path, n))
            elif tree.language == "Cpp":
                index.imports.extend(resolver.cpp(tree, path, n))
            else:
                index.imports.extend(resolver.go(tree, path, n))

    defs = index.definitions
    for path in sorted(trees):
        tree = trees[path]
        edges = [e for e in index.imports if e.importer == path]
        alias_files: dict[str, list[str]] = {}
        name_visible: set[int] = set()
        imported_all: list[str] = []
        for e in edges:
            imported_all.append(e.imported)
            if e.alias:
                alias_files.setdefault(e.alias, []).append(e.imported)
            target_defs = defs_by_file.get(e.imported, [])
            if e.names:
                wanted = {n.split(" as ")[0] for n in e.names}
                star = "*" in wanted
                containers = set()
                for di in target_defs:
                    if star or defs[di].name in wanted:
                        if star and defs[di].container is not None:
                            continue
                        name_visible.add(di)
                        if defs[di].kind == "type":
                            containers.add(defs[di].name)
                for di in target_defs:
                    if defs[di].container in containers:
                        name_visible.add(di)
            elif tree.language in ("Cpp", "Java"):
                name_visible.update(target_defs)
        if tree.language == "Go":
            here = posixpath.dirname(path)
            for other, ids in defs_by_file.items():
                if other != path and other.endswith(".go") and posixpath.dirname(other) == here:
                    name_visible.update(d for d in ids if defs[d].container is None)
        own = set(defs_by_file.get(path, []))
        imported_defs = [d for f in imported_all for d in defs_by_file.get(f, [])]

        for ref in collect_call_sites(tree, path):
            cands: list[int]
            q = ref.qualifier
            if q is not None and q in alias_files:
                cands = [d for f in alias_files[q] for d in defs_by_file.get(f, [])
                         if defs[d].name == ref.name]
            elif q in ("self", "this", "cls"):
                cands = [d for d in own if defs[d].name == ref.name]
            elif q is not None:
                pool = own | set(imported_defs) | name_visible
                cands = [d for d in pool if defs[d].name == ref.name and defs[d].container is not None]
                if not cands:
                    cands = [d for d in pool if defs[d].name == ref.name and d in name_visible
                             and defs[d].kind == "function"]
            else:
                pool = own | name_visible
                cands = [d for d in pool if defs[d].name == ref.name]
            cands = sorted(set(cands))
            if len(cands) == 1:
                ref.resolved_def = cands[0]
            index.references.append(ref)
    return index


def cross_file_call_lines(path: str, index: SymbolIndex) -> list[int]:
    """0-based lines in ``path`` holding a call resolved to another file."""
    lines = set()
    for ref in index.references:
        if ref.file == path and ref.resolved_def is not None:
            if index.definitions[ref.resolved_def].file != path:
                lines.add(ref.line)
    return sorted(lines)


def cross_file_callees(path: str, line: int, index: SymbolIndex) -> list[str]:
    out = []
    for ref in index.references:
        if ref.file == path and ref.line == line and ref.resolved_def is not None:
            if index.definitions[ref.resolved_def].file != path:
                out.append(ref.name)
    return out


def parse_repo(files, timeout: float | None = DEFAULT_PARSE_TIMEOUT
               ) -> tuple[dict[str, SyntaxTree], list[str]]:
    """Parse every file; returns (trees by relative path, paths that timed out)."""
    trees, failed = {}, []
    for f in files:
        try:
            trees[f.relative_path] = parse(f, timeout=timeout)
        except ParseTimeout:
            failed.append(f.relative_path)
    return trees, failed
