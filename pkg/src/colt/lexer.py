"""Regex-driven lexical tokenizer for Python, Java, C++ and Go.

Tokens are identifiers, keywords, literals, operators and punctuation, one
token each. Comments are kept as ``comment`` tokens so callers can filter
them; C++ preprocessor lines come out as a single ``directive`` token.
"""

from __future__ import annotations

import re
from typing import NamedTuple

LANGUAGES = ("Python", "Java", "Cpp", "Go")

EXTENSIONS = {
    ".py": "Python",
    ".java": "Java",
    ".go": "Go",
    ".c": "Cpp",
    ".cc": "Cpp",
    ".cpp": "Cpp",
    ".cxx": "Cpp",
    ".h": "Cpp",
    ".hh": "Cpp",
    ".hpp": "Cpp",
    ".hxx": "Cpp",
}

KEYWORDS = {
    "Python": frozenset(
        "False None True and as assert async await break class continue def del elif else "
        "except finally for from global if import in is lambda nonlocal not or pass raise "
        "return try while with yield match case".split()
    ),
    "Java": frozenset(
        "abstract assert boolean break byte case catch char class const continue default do "
        "double else enum extends final finally float for goto if implements import instanceof "
        "int interface long native new package private protected public return short static "
        "strictfp super switch synchronized this throw throws transient try void volatile while "
        "var record yield true false null".split()
    ),
    "Cpp": frozenset(
        "alignas alignof and asm auto bool break case catch char char16_t char32_t class const "
        "constexpr const_cast continue decltype default delete do double dynamic_cast else enum "
        "explicit export extern false float for friend goto if inline int long mutable namespace "
        "new noexcept not nullptr operator or private protected public register reinterpret_cast "
        "return short signed sizeof static static_assert static_cast struct switch template this "
        "throw true try typedef typeid typename union unsigned using virtual void volatile "
        "wchar_t while override final".split()
    ),
    "Go": frozenset(
        "break case chan const continue default defer else fallthrough for func go goto if "
        "import interface map package range return select struct switch type var nil true "
        "false".split()
    ),
}


class Token(NamedTuple):
    kind: str  # ident | keyword | number | string | comment | op | directive
    text: str
    start: int  # character offset, inclusive
    end: int  # character offset, exclusive
    line: int  # 0-based line of ``start``


_PY_OPS = [
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "==", "!=", "<=", ">=",
    "<<", ">>", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=",
]
_C_OPS = [
    ">>>=", "<<=", ">>=", ">>>", "...", "->*", "&^=", "->", "::", ":=", "<-", "&&", "||",
    "++", "--", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "<<", ">>", "&^", ".*",
]


def _ops(ops):
    return "|".join(re.escape(o) for o in sorted(ops, key=len, reverse=True))


_PY_STRING = (
    r"(?:[rRbBuUfF]{1,2})?(?:"
    r"'''(?:\\[\s\S]|[^\\])*?(?:'''|\Z)"
    r'|"""(?:\\[\s\S]|[^\\])*?(?:"""|\Z)'
    r"|'(?:\\.|[^'\\\n])*'?"
    r'|"(?:\\.|[^"\\\n])*"?'
    r")"
)
_NUMBER = (
    r"(?:0[xX][0-9a-fA-F_']+[uUlL]*"
    r"|0[bB][01_']+[uUlL]*"
    r"|0[oO][0-7_]+"
    r"|(?:\d[\d_']*\.?[\d_']*|\.\d[\d_']*)(?:[eEpP][+-]?\d+)?[a-zA-Z]*)"
)
_IDENT = r"[^\W\d]\w*"

_PATTERNS = {
    "Python": re.compile(
        rf"(?P<ws>[ \t\f\r\n]+|\\\r?\n)"
        rf"|(?P<comment>#[^\n]*)"
        rf"|(?P<string>{_PY_STRING})"
        rf"|(?P<number>{_NUMBER})"
        rf"|(?P<ident>{_IDENT})"
        rf"|(?P<op>{_ops(_PY_OPS)}|\S)"
    ),
    "Java": re.compile(
        rf"(?P<ws>\s+)"
        rf"|(?P<comment>//[^\n]*|/\*[\s\S]*?(?:\*/|\Z))"
        rf'|(?P<string>"""[\s\S]*?(?:"""|\Z)|"(?:\\.|[^"\\\n])*"?|\'(?:\\.|[^\'\\\n])*\'?)'
        rf"|(?P<number>{_NUMBER})"
        rf"|(?P<ident>[^\W\d][\w$]*|\$[\w$]*)"
        rf"|(?P<op>{_ops(_C_OPS)}|\S)"
    ),
    "Cpp": re.compile(
        rf"(?P<ws>\s+)"
        rf"|(?P<comment>//[^\n]*|/\*[\s\S]*?(?:\*/|\Z))"
        rf"|(?P<directive>(?<![^\n])[ \t]*\#(?:\\\r?\n|[^\n])*)"
        rf'|(?P<string>(?:u8|[uUL])?R"\((?:[\s\S]*?)(?:\)"|\Z)'
        rf'|(?:u8|[uUL])?"(?:\\.|[^"\\\n])*"?|(?:u8|[uUL])?\'(?:\\.|[^\'\\\n])*\'?)'
        rf"|(?P<number>{_NUMBER})"
        rf"|(?P<ident>{_IDENT})"
        rf"|(?P<op>{_ops(_C_OPS)}|\S)"
    ),
    "Go": re.compile(
        rf"(?P<ws>\s+)"
        rf"|(?P<comment>//[^\n]*|/\*[\s\S]*?(?:\*/|\Z))"
        rf'|(?P<string>`[^`]*`?|"(?:\\.|[^"\\\n])*"?|\'(?:\\.|[^\'\\\n])*\'?)'
        rf"|(?P<number>{_NUMBER})"
        rf"|(?P<ident>{_IDENT})"
        rf"|(?P<op>{_ops(_C_OPS)}|\S)"
    ),
}

# Context-free tokenizer used where text may be an arbitrary fragment
# (prompt sizing, metric tokenization when the language is unknown).
_FLAT = re.compile(r"\w+|[^\w\s]")


class UnsupportedLanguage(ValueError):
    pass


def tokenize(text: str, language: str) -> list[Token]:
    """Tokenize ``text``; whitespace is dropped, comments are kept."""
    try:
        pattern = _PATTERNS[language]
    except KeyError:
        raise UnsupportedLanguage(language) from None
    keywords = KEYWORDS[language]
    out = []
    line = 0
    pos = 0
    n = len(text)
    match = pattern.match
    while pos < n:
        m = match(text, pos)
        kind = m.lastgroup
        end = m.end()
        if kind != "ws":
            tok = m.group()
            if kind == "ident" and tok in keywords:
                kind = "keyword"
            out.append(Token(kind, tok, pos, end, line))
        line += text.count("\n", pos, end)
        pos = end
    return out


def code_tokens(text: str, language: str) -> list[Token]:
    return [t for t in tokenize(text, language) if t.kind != "comment"]


def count_tokens(text: str, language: str | None = None) -> int:
    """Number of non-comment tokens; ``language=None`` uses the flat tokenizer."""
    if language is None:
        return len(_FLAT.findall(text))
    return len(code_tokens(text, language))


def flat_tokens(text: str) -> list[str]:
    return _FLAT.findall(text)


def token_texts(text: str, language: str | None = None) -> list[str]:
    if language is None:
        return flat_tokens(text)
    return [t.text for t in code_tokens(text, language)]


def language_for_path(path: str) -> str | None:
    dot = path.rfind(".")
    if dot < 0:
        return None
    return EXTENSIONS.get(path[dot:].lower())
