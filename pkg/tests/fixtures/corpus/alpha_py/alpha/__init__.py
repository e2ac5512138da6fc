"""Small content-addressed storage helpers."""

from alpha.hashutil import digest_hex

__all__ = ["digest_hex"]
