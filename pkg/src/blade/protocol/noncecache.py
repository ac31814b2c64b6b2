"""Replay defense: per-sender nonce bookkeeping within a TTL window."""

from __future__ import annotations

import threading


class NonceCache:
    """Remembers (sender, nonce) pairs for ``ttl`` seconds.

    check_and_add is atomic: exactly one of two concurrent calls with the
    same pair wins.  Expired entries are purged lazily.
    """

    def __init__(self, ttl: float = 600.0):
        self.ttl = float(ttl)
        self._seen: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()
        self._last_purge = 0.0

    def check_and_add(self, sender: str, nonce: str, now: float) -> bool:
        """True if the nonce was unseen (and is now recorded)."""
        key = (sender, nonce)
        with self._lock:
            if now - self._last_purge > self.ttl:
                cutoff = now - self.ttl
                self._seen = {k: t for k, t in self._seen.items() if t > cutoff}
                self._last_purge = now
            first_seen = self._seen.get(key)
            if first_seen is not None and now - first_seen <= self.ttl:
                return False
            self._seen[key] = now
            return True

    def __len__(self) -> int:
        with self._lock:
            return len(self._seen)
