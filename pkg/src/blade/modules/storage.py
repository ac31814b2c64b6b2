"""Per-module key-value storage with hard namespace isolation.

Each module sees only its own namespace; there is no cross-namespace API at
all, so isolation holds by construction.  Values are bytes.  A per-namespace
quota (sum of key and value sizes) guards the host.
"""

from __future__ import annotations

import base64
import json
import threading
from pathlib import Path
from typing import Optional

from blade.errors import BladeError, NotFound


class QuotaExceeded(BladeError):
    pass


class ModuleStorage:
    """One namespace.  Operations are atomic per key."""

    def __init__(
        self,
        namespace: str,
        quota_bytes: int,
        persist_path: Optional[Path] = None,
    ):
        self.namespace = namespace
        self.quota_bytes = quota_bytes
        self._data: dict[str, bytes] = {}
        self._size = 0
        self._lock = threading.RLock()
        self._persist_path = persist_path
        if persist_path and persist_path.exists():
            raw = json.loads(persist_path.read_text())
            self._data = {k: base64.b64decode(v) for k, v in raw.items()}
            self._size = sum(len(k) + len(v) for k, v in self._data.items())

    def _persist(self) -> None:
        if self._persist_path is None:
            return
        self._persist_path.parent.mkdir(parents=True, exist_ok=True)
        self._persist_path.write_text(
            json.dumps(
                {k: base64.b64encode(v).decode() for k, v in self._data.items()}
            )
        )

    def put(self, key: str, value: bytes) -> None:
        if not isinstance(value, (bytes, bytearray)):
            raise TypeError("storage values are bytes")
        value = bytes(value)
        with self._lock:
            old = self._data.get(key)
            delta = len(key) + len(value) - (len(key) + len(old) if old is not None else 0)
            if self._size + delta > self.quota_bytes:
                raise QuotaExceeded(
                    f"namespace {self.namespace} would exceed {self.quota_bytes} bytes"
                )
            self._data[key] = value
            self._size += delta
            self._persist()

    def get(self, key: str) -> bytes:
        with self._lock:
            if key not in self._data:
                raise NotFound(f"no key {key!r}")
            return self._data[key]

    def get_or_none(self, key: str) -> Optional[bytes]:
        with self._lock:
            return self._data.get(key)

    def delete(self, key: str) -> None:
        with self._lock:
            if key not in self._data:
                raise NotFound(f"no key {key!r}")
            value = self._data.pop(key)
            self._size -= len(key) + len(value)
            self._persist()

    def list_keys(self, prefix: str = "") -> list[str]:
        with self._lock:
            return sorted(k for k in self._data if k.startswith(prefix))

    def clear(self) -> None:
        with self._lock:
            self._data.clear()
            self._size = 0
            self._persist()

    # JSON convenience wrappers; module state is mostly small JSON documents.

    def put_json(self, key: str, value) -> None:
        self.put(key, json.dumps(value, sort_keys=True).encode())

    def get_json(self, key: str, default=None):
        raw = self.get_or_none(key)
        if raw is None:
            return default
        return json.loads(raw)


class NodeStorage:
    """Factory for per-module namespaces."""

    def __init__(self, data_dir: str | Path | None, quota_bytes: int):
        self._data_dir = Path(data_dir) if data_dir else None
        self._quota = quota_bytes
        self._namespaces: dict[str, ModuleStorage] = {}
        self._lock = threading.Lock()

    def namespace(self, module_id: str) -> ModuleStorage:
        with self._lock:
            store = self._namespaces.get(module_id)
            if store is None:
                persist = (
                    self._data_dir / "modules" / module_id / "kv.json"
                    if self._data_dir
                    else None
                )
                store = ModuleStorage(module_id, self._quota, persist)
                self._namespaces[module_id] = store
            return store

    def purge(self, module_id: str) -> None:
        with self._lock:
            store = self._namespaces.pop(module_id, None)
        if store is not None:
            store.clear()
