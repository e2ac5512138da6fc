from alpha.store import BlobStore


def test_roundtrip():
    store = BlobStore()
    key = store.put(b"hello")
    assert store.get(key) == b"hello"
