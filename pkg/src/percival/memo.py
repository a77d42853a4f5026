"""Verdict memoization: a thread-safe LRU plus single-flight coalescing.

The cache key is the 128-bit hash of the *encoded* bytes, so repeated frames
skip the forward pass without being decoded for comparison. MemoGate layers
in-flight coalescing on top: while one thread classifies a hash, concurrent
duplicates wait on its future instead of classifying again. All state
transitions happen under one lock, so between "miss" and "cached" there is
never a window where a duplicate could start a second flight.
"""

import threading
from collections import OrderedDict
from concurrent.futures import Future


class VerdictCache:
    """LRU keyed by content hash. capacity 0 stores nothing."""

    def __init__(self, capacity):
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.capacity = capacity
        self._items = OrderedDict()
        self._lock = threading.RLock()

    def lookup(self, key):
        with self._lock:
            if key not in self._items:
                return None
            self._items.move_to_end(key)
            return self._items[key]

    def insert(self, key, value):
        with self._lock:
            if self.capacity <= 0:
                return
            self._items[key] = value
            self._items.move_to_end(key)
            while len(self._items) > self.capacity:
                self._items.popitem(last=False)

    def clear(self):
        with self._lock:
            self._items.clear()

    def __len__(self):
        with self._lock:
            return len(self._items)


class MemoGate:
    """Single-flight front of a VerdictCache.

    begin(key) returns one of:
      ("hit", verdict)  -- cached, use it
      ("wait", future)  -- someone is classifying this key; wait or subscribe
      ("own", future)   -- caller must classify and call complete()/fail()
    """

    def __init__(self, cache):
        self.cache = cache
        self._pending = {}
        self._lock = threading.Lock()

    def begin(self, key):
        with self._lock:
            verdict = self.cache.lookup(key)
            if verdict is not None:
                return ("hit", verdict)
            fut = self._pending.get(key)
            if fut is not None:
                return ("wait", fut)
            fut = Future()
            self._pending[key] = fut
            return ("own", fut)

    def complete(self, key, verdict):
        with self._lock:
            self.cache.insert(key, verdict)
            fut = self._pending.pop(key)
        fut.set_result(verdict)

    def fail(self, key, exc):
        with self._lock:
            fut = self._pending.pop(key)
        fut.set_exception(exc)
