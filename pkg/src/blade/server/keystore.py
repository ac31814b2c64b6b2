"""On-disk key material for a standalone node.

Plain JSON holding the identity and delegate private keys in hex.  The
threat model here matches the architecture: the delegate key lives with the
server and is rotatable; the identity key ideally lives in an external
wallet, but standalone operation keeps both locally.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from blade.crypto import KeyPair, generate_keypair


def load_or_create(path: str | Path) -> tuple[KeyPair, KeyPair]:
    """Returns (identity_key, delegate_key), creating the file on first run."""
    path = Path(path)
    if path.exists():
        raw = json.loads(path.read_text())
        identity = generate_keypair(bytes.fromhex(raw["identity_private_key"]))
        delegate = generate_keypair(bytes.fromhex(raw["delegate_private_key"]))
        return identity, delegate
    identity = generate_keypair()
    delegate = generate_keypair()
    save(path, identity, delegate)
    return identity, delegate


def save(path: str | Path, identity: KeyPair, delegate: KeyPair) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(
        {
            "identity_private_key": identity.private_key.hex(),
            "delegate_private_key": delegate.private_key.hex(),
        },
        indent=2,
    )
    path.write_text(payload)
    os.chmod(path, 0o600)
