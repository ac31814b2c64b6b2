"""Compact JWTs signed with the sender's delegate key (alg ES256K).

The JOSE signature is the raw 64-byte r || s pair over SHA-256 of the signing
input.  Verification works from an *address* rather than a public key: the
key is recovered from the signature (trying both recovery ids) and accepted
iff its address matches the expected delegate.  Low-s is enforced, so each
(digest, r, s) pair recovers to at most two candidate keys.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json

from blade.crypto import Address, Signature, recover_address, sign_digest
from blade.crypto.identity import Unrecoverable
from blade.crypto.secp256k1 import HALF_N
from blade.errors import BladeError


class BadToken(BladeError):
    """Payload token is malformed or not signed by the expected key."""


_HEADER = {"alg": "ES256K", "typ": "JWT"}


def _b64url(raw: bytes) -> str:
    return base64.urlsafe_b64encode(raw).rstrip(b"=").decode("ascii")


def _unb64url(text: str) -> bytes:
    padding = -len(text) % 4
    try:
        return base64.urlsafe_b64decode(text + "=" * padding)
    except (binascii.Error, ValueError) as exc:
        raise BadToken(f"bad base64url segment: {exc}") from exc


def _json_segment(obj) -> str:
    return _b64url(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode())


def encode_token(claims: dict, delegate_private_key: bytes) -> str:
    """Compact-serialize and sign the claims set."""
    signing_input = f"{_json_segment(_HEADER)}.{_json_segment(claims)}"
    digest = hashlib.sha256(signing_input.encode("ascii")).digest()
    sig = sign_digest(delegate_private_key, digest)
    jose_sig = sig.r.to_bytes(32, "big") + sig.s.to_bytes(32, "big")
    return f"{signing_input}.{_b64url(jose_sig)}"


def decode_token(token: str, expected_signer: Address) -> dict:
    """Parse and verify a compact token; returns the claims.

    Raises BadToken on any structural problem or when the signature does not
    recover to ``expected_signer``.
    """
    if not isinstance(token, str):
        raise BadToken("token must be a string")
    parts = token.split(".")
    if len(parts) != 3:
        raise BadToken(f"expected 3 token segments, got {len(parts)}")
    header_b64, claims_b64, sig_b64 = parts
    try:
        header = json.loads(_unb64url(header_b64))
        claims = json.loads(_unb64url(claims_b64))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BadToken(f"undecodable token segment: {exc}") from exc
    if not isinstance(header, dict) or header.get("alg") != "ES256K":
        raise BadToken(f"unsupported token header {header!r}")
    if not isinstance(claims, dict):
        raise BadToken("claims segment is not an object")

    raw_sig = _unb64url(sig_b64)
    if len(raw_sig) != 64:
        raise BadToken(f"signature must be 64 bytes, got {len(raw_sig)}")
    r = int.from_bytes(raw_sig[:32], "big")
    s = int.from_bytes(raw_sig[32:], "big")
    if s > HALF_N:
        raise BadToken("token signature is not low-s normalized")

    digest = hashlib.sha256(f"{header_b64}.{claims_b64}".encode("ascii")).digest()
    for v in (0, 1):
        try:
            if recover_address(digest, Signature(r=r, s=s, v=v)) == expected_signer:
                return claims
        except (Unrecoverable, ValueError):
            continue
    raise BadToken("token signature does not recover to the expected delegate")
