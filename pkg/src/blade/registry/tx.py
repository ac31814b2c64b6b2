"""Registry transaction envelope: canonical digest and signing.

The digest covers the operation name, the sorted parameter map, and a random
nonce:  keccak256(op || 0x00 || name=value <0x1f> name=value ... || 0x00 ||
nonce-bytes).  Parameter values are canonicalized to text; collections are
sorted and comma-joined.  Authorization is purely by signature recovery:
whoever signed the digest is the transaction's signer.
"""

from __future__ import annotations

from dataclasses import dataclass

from blade.crypto import (
    Address,
    Nonce,
    Signature,
    keccak256,
    recover_address,
    sign_digest,
)


def _canonical_value(value) -> str:
    if isinstance(value, Address):
        return value.text
    if isinstance(value, bytes):
        return "0x" + value.hex()
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, (list, tuple, set, frozenset)):
        return ",".join(sorted(_canonical_value(v) for v in value))
    if value is None:
        return ""
    raise TypeError(f"cannot canonicalize tx parameter of type {type(value).__name__}")


def tx_digest(op: str, params: dict, nonce: Nonce) -> bytes:
    joined = b"\x1f".join(
        f"{name}={_canonical_value(params[name])}".encode()
        for name in sorted(params)
    )
    return keccak256(op.encode() + b"\x00" + joined + b"\x00" + nonce.bytes)


@dataclass(frozen=True)
class RegistryTx:
    op: str
    params: dict
    nonce: Nonce
    signature: Signature

    def digest(self) -> bytes:
        return tx_digest(self.op, self.params, self.nonce)

    def signer(self) -> Address:
        """Address recovered from the signature; raises Unrecoverable."""
        return recover_address(self.digest(), self.signature)


def make_tx(op: str, params: dict, private_key: bytes) -> RegistryTx:
    """Build and sign a transaction with a fresh nonce."""
    nonce = Nonce.generate()
    signature = sign_digest(private_key, tx_digest(op, params, nonce))
    return RegistryTx(op=op, params=params, nonce=nonce, signature=signature)
