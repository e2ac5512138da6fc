"""An in-memory blob store keyed by checksum."""

from alpha.hashutil import _hash_naive, combine, digest_hex


class BlobStore:
    def __init__(self, verify=True):
        self.blobs = {}
        self.verify = verify
        self.hits = 0

    def put(self, data):
        h = _hash_naive(data)
        if h in self.blobs and self.verify:
            if self.blobs[h] != data:
                raise ValueError("checksum collision for %d" % h)
            self.hits += 1
            return h
        self.blobs[h] = data
        return h

    def get(self, key):
        blob = self.blobs.get(key)
        if blob is None:
            raise KeyError(key)
        return blob

    def fingerprint(self):
        acc = None
        for key in sorted(self.blobs):
            acc = combine(acc, key)
        return acc

    def export(self):
        rows = []
        for key, blob in sorted(self.blobs.items()):
            rows.append((key, digest_hex(blob), len(blob)))
        return rows
