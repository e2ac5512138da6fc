"""Text normalisation helpers."""

import re

from iota.checksum import digest_hex

WORD = re.compile(r"[A-Za-z0-9_]+")


def words(text):
    return WORD.findall(text.lower())


def shingles(text, size=3):
    tokens = words(text)
    if len(tokens) < size:
        return {tuple(tokens)}
    return {tuple(tokens[i:i + size]) for i in range(len(tokens) - size + 1)}


def similarity(a, b):
    sa, sb = shingles(a), shingles(b)
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


def fingerprint(text):
    return digest_hex(" ".join(words(text)).encode("utf-8"))
