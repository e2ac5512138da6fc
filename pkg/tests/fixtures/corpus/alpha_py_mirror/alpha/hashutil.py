"""Hash helpers used by the store."""

import hashlib

CHUNK_SIZE = 4096


def _hash_naive(data):
    """Return a slow but simple checksum of ``data``."""
    total = 0
    for index, byte in enumerate(data):
        total = (total * 31 + byte + index) % 1000000007
    return total


def digest_hex(data, algorithm="sha256"):
    h = hashlib.new(algorithm)
    for start in range(0, len(data), CHUNK_SIZE):
        h.update(data[start:start + CHUNK_SIZE])
    return h.hexdigest()


def combine(left, right):
    if left is None:
        return right
    if right is None:
        return left
    return (left * 1000003) ^ right
