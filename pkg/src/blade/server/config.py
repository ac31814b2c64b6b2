"""Node configuration: network identity, paths, and the admin credential.

Config files are JSON with the same field names as the dataclass.  The admin
password is stored as salted PBKDF2; set_admin_password computes the hash.
"""

from __future__ import annotations

import hashlib
import json
import secrets
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from blade.protocol import PROTOCOL_VERSION

_PBKDF2_ITERATIONS = 50_000


@dataclass
class NodeConfig:
    public_url: str = "http://127.0.0.1:0"
    listen_host: str = "127.0.0.1"
    listen_port: int = 0  # 0 = ephemeral
    data_dir: Optional[str] = None  # None = fully in-memory
    keystore_path: Optional[str] = None
    journal_path: Optional[str] = None  # registry journal (standalone mode)
    protocol_version: str = PROTOCOL_VERSION
    admin_user: str = "admin"
    admin_password_salt: str = ""
    admin_password_hash: str = ""
    profile: dict = field(default_factory=dict)
    # module_id text -> extra api_id texts that module may dispatch on
    module_grants: dict = field(default_factory=dict)
    storage_quota_bytes: int = 256 * 1024 * 1024

    def set_admin_password(self, password: str) -> None:
        salt = secrets.token_bytes(16)
        digest = hashlib.pbkdf2_hmac(
            "sha256", password.encode(), salt, _PBKDF2_ITERATIONS
        )
        self.admin_password_salt = salt.hex()
        self.admin_password_hash = digest.hex()

    def check_admin_password(self, password: str) -> bool:
        if not self.admin_password_hash:
            return False
        digest = hashlib.pbkdf2_hmac(
            "sha256",
            password.encode(),
            bytes.fromhex(self.admin_password_salt),
            _PBKDF2_ITERATIONS,
        )
        return secrets.compare_digest(digest.hex(), self.admin_password_hash)

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2))

    @classmethod
    def from_file(cls, path: str | Path) -> "NodeConfig":
        raw = json.loads(Path(path).read_text())
        known = {f: raw[f] for f in cls.__dataclass_fields__ if f in raw}
        return cls(**known)
