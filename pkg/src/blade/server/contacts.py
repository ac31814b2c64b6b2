"""Connection-request bookkeeping: the node's contact list."""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from blade.crypto import Address
from blade.errors import BladeError

STATUSES = ("pending_in", "pending_out", "accepted", "declined")


class NoPendingRequest(BladeError):
    """There is no pending connection request to respond to."""


@dataclass
class ContactEntry:
    address: str  # address text
    name: str  # username cached from the registry at request time
    status: str  # pending_in | pending_out | accepted | declined
    request_message: Optional[str] = None
    updated_at: float = 0.0
    retry_pending: bool = False  # outbound request not yet delivered

    def to_dict(self) -> dict:
        return asdict(self)


class ContactStore:
    def __init__(self, store_path: str | Path | None = None):
        self._entries: dict[str, ContactEntry] = {}
        self._lock = threading.RLock()
        self._store_path = Path(store_path) if store_path else None
        if self._store_path and self._store_path.exists():
            raw = json.loads(self._store_path.read_text())
            self._entries = {k: ContactEntry(**v) for k, v in raw.items()}

    def _persist(self) -> None:
        if self._store_path is None:
            return
        self._store_path.parent.mkdir(parents=True, exist_ok=True)
        self._store_path.write_text(
            json.dumps({k: v.to_dict() for k, v in self._entries.items()}, indent=2)
        )

    def get(self, address: Address | str) -> Optional[ContactEntry]:
        text = address.text if isinstance(address, Address) else address
        with self._lock:
            entry = self._entries.get(text)
            return ContactEntry(**entry.to_dict()) if entry else None

    def put(self, entry: ContactEntry) -> None:
        with self._lock:
            self._entries[entry.address] = entry
            self._persist()

    def list(self, status: Optional[str] = None) -> list[ContactEntry]:
        with self._lock:
            entries = sorted(self._entries.values(), key=lambda e: e.address)
            if status is not None:
                entries = [e for e in entries if e.status == status]
            return [ContactEntry(**e.to_dict()) for e in entries]

    def is_accepted(self, address: Address | str) -> bool:
        entry = self.get(address)
        return entry is not None and entry.status == "accepted"

    def set_status(self, address: Address | str, status: str) -> ContactEntry:
        if status not in STATUSES:
            raise BladeError(f"unknown contact status {status!r}")
        text = address.text if isinstance(address, Address) else address
        with self._lock:
            entry = self._entries.get(text)
            if entry is None:
                raise NoPendingRequest(f"no contact entry for {text}")
            entry.status = status
            self._persist()
            return ContactEntry(**entry.to_dict())
