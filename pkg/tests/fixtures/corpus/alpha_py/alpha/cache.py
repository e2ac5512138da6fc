from alpha.store import BlobStore


class LruCache:
    """Bounded cache in front of a BlobStore."""

    def __init__(self, store=None, capacity=128):
        self.store = store or BlobStore()
        self.capacity = capacity
        self.order = []

    def fetch(self, key):
        if key in self.order:
            self.order.remove(key)
        self.order.append(key)
        while len(self.order) > self.capacity:
            evicted = self.order.pop(0)
            self.store.blobs.pop(evicted, None)
        return self.store.get(key)

    def warm(self, items):
        keys = []
        for item in items:
            keys.append(self.store.put(item))
        return keys
