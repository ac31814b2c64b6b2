"""Identities: key pairs, 20-byte addresses, signatures, and nonces.

An address is the last 20 bytes of keccak256 over the raw 64-byte public key
(x || y, no prefix byte).  Day-to-day message signing uses a rotatable
delegate key pair; the long-lived identity key pair only creates the identity
and rotates delegates.  Both are plain secp256k1 pairs, so everything here
applies to either role.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

from blade.crypto import secp256k1
from blade.crypto.keccak import keccak256
from blade.errors import BladeError


class EntropyUnavailable(BladeError):
    """The OS entropy source failed while generating a key or nonce."""


class InvalidScalar(BladeError):
    """A private-key scalar is zero or out of the curve-order range."""


class InvalidPoint(BladeError):
    """Public-key bytes do not describe a point on the curve."""


class Unrecoverable(BladeError):
    """No public key can be recovered from the (digest, signature) pair."""


@dataclass(frozen=True, order=True)
class Address:
    """20-byte identifier for users, organizations, modules, and APIs."""

    bytes: bytes

    def __post_init__(self):
        if len(self.bytes) != 20:
            raise ValueError(f"address must be 20 bytes, got {len(self.bytes)}")

    @property
    def text(self) -> str:
        return "0x" + self.bytes.hex()

    @classmethod
    def parse(cls, text: str) -> "Address":
        """Parse `0x` + 40 hex chars.  Mixed (checksum) casing is accepted
        and ignored; output text form is always lowercase."""
        if not isinstance(text, str) or not text.startswith("0x") or len(text) != 42:
            raise ValueError(f"not an address: {text!r}")
        try:
            raw = bytes.fromhex(text[2:])
        except ValueError:
            raise ValueError(f"not an address: {text!r}") from None
        return cls(raw)

    def __str__(self) -> str:
        return self.text


ZERO_ADDRESS = Address(b"\x00" * 20)


@dataclass(frozen=True)
class Signature:
    """Recoverable ECDSA signature, low-s normalized, v in {0, 1}."""

    r: int
    s: int
    v: int

    @property
    def text(self) -> str:
        return "0x" + self.to_bytes().hex()

    def to_bytes(self) -> bytes:
        return (
            self.r.to_bytes(32, "big")
            + self.s.to_bytes(32, "big")
            + bytes([self.v])
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Signature":
        if len(raw) != 65:
            raise ValueError(f"signature must be 65 bytes, got {len(raw)}")
        return cls(
            r=int.from_bytes(raw[:32], "big"),
            s=int.from_bytes(raw[32:64], "big"),
            v=raw[64],
        )

    @classmethod
    def parse(cls, text: str) -> "Signature":
        # strict: signatures only ever travel in our own lowercase text form
        if (
            not isinstance(text, str)
            or not text.startswith("0x")
            or len(text) != 132
            or text != text.lower()
        ):
            raise ValueError(f"not a signature: {text!r}")
        return cls.from_bytes(bytes.fromhex(text[2:]))

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class Nonce:
    """16 random bytes; text form is 32 lowercase hex chars (no 0x)."""

    bytes: bytes

    def __post_init__(self):
        if len(self.bytes) != 16:
            raise ValueError(f"nonce must be 16 bytes, got {len(self.bytes)}")

    @property
    def text(self) -> str:
        return self.bytes.hex()

    @classmethod
    def parse(cls, text: str) -> "Nonce":
        if not isinstance(text, str) or len(text) != 32 or text != text.lower():
            raise ValueError(f"not a nonce: {text!r}")
        return cls(bytes.fromhex(text))

    @classmethod
    def generate(cls) -> "Nonce":
        try:
            return cls(secrets.token_bytes(16))
        except NotImplementedError as exc:  # no OS entropy source
            raise EntropyUnavailable(str(exc)) from exc

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class KeyPair:
    """secp256k1 key pair; public key stored raw as 64 bytes (x || y)."""

    private_key: bytes
    public_key: bytes

    @property
    def address(self) -> Address:
        return derive_address(self.public_key)

    @property
    def private_scalar(self) -> int:
        return int.from_bytes(self.private_key, "big")

    def public_key_sec(self) -> bytes:
        """65-byte interchange form with the 0x04 uncompressed prefix."""
        return b"\x04" + self.public_key


def generate_keypair(entropy: bytes | None = None) -> KeyPair:
    """Create a key pair, deterministically when a 32-byte seed is given.

    The seed is reduced mod the curve order; a zero scalar after reduction is
    rejected rather than silently remapped.
    """
    if entropy is not None:
        if len(entropy) != 32:
            raise InvalidScalar(f"seed must be 32 bytes, got {len(entropy)}")
        scalar = int.from_bytes(entropy, "big") % secp256k1.N
    else:
        try:
            scalar = int.from_bytes(secrets.token_bytes(32), "big") % secp256k1.N
        except NotImplementedError as exc:
            raise EntropyUnavailable(str(exc)) from exc
        while scalar == 0:  # pragma: no cover - probability ~2^-256
            scalar = int.from_bytes(secrets.token_bytes(32), "big") % secp256k1.N
    if scalar == 0:
        raise InvalidScalar("seed reduces to the zero scalar")
    x, y = secp256k1.public_key(scalar)
    return KeyPair(
        private_key=scalar.to_bytes(32, "big"),
        public_key=x.to_bytes(32, "big") + y.to_bytes(32, "big"),
    )


def _normalize_public_key(public_key: bytes) -> bytes:
    """Accepts 64-byte raw, 65-byte 0x04-prefixed, or 33-byte compressed keys
    and returns the raw 64-byte x || y form."""
    if isinstance(public_key, KeyPair):
        public_key = public_key.public_key
    if not isinstance(public_key, (bytes, bytearray)):
        raise InvalidPoint(f"unsupported public key type {type(public_key).__name__}")
    raw = bytes(public_key)
    if len(raw) == 65 and raw[0] == 0x04:
        raw = raw[1:]
    elif len(raw) == 33 and raw[0] in (0x02, 0x03):
        point = secp256k1.lift_x(int.from_bytes(raw[1:], "big"), odd=raw[0] == 0x03)
        if point is None:
            raise InvalidPoint("compressed key has no curve point at that x")
        raw = point[0].to_bytes(32, "big") + point[1].to_bytes(32, "big")
    if len(raw) != 64:
        raise InvalidPoint(f"public key must be 33, 64, or 65 bytes, got {len(raw)}")
    x = int.from_bytes(raw[:32], "big")
    y = int.from_bytes(raw[32:], "big")
    if not secp256k1.is_on_curve((x, y)):
        raise InvalidPoint("point is not on the curve")
    return raw


def derive_address(public_key: bytes) -> Address:
    """Last 20 bytes of keccak256 over the normalized 64-byte public key."""
    raw = _normalize_public_key(public_key)
    return Address(keccak256(raw)[-20:])


def sign_digest(private_key: bytes, digest: bytes) -> Signature:
    """Sign a 32-byte digest with deterministic nonces; low-s guaranteed."""
    if len(digest) != 32:
        raise ValueError(f"digest must be exactly 32 bytes, got {len(digest)}")
    scalar = int.from_bytes(private_key, "big")
    if not (1 <= scalar < secp256k1.N):
        raise InvalidScalar("private key out of range")
    r, s, v = secp256k1.sign(scalar, digest)
    return Signature(r=r, s=s, v=v)


def recover_address(digest: bytes, signature: Signature) -> Address:
    """Recover the unique signer address; raises Unrecoverable otherwise."""
    if len(digest) != 32:
        raise ValueError(f"digest must be exactly 32 bytes, got {len(digest)}")
    point = secp256k1.recover(digest, signature.r, signature.s, signature.v)
    if point is None:
        raise Unrecoverable("signature does not recover to a public key")
    raw = point[0].to_bytes(32, "big") + point[1].to_bytes(32, "big")
    return Address(keccak256(raw)[-20:])


def verify_signature(digest: bytes, signature: Signature, signer: Address) -> bool:
    """True iff the signature over the digest recovers to ``signer``."""
    try:
        return recover_address(digest, signature) == signer
    except (Unrecoverable, ValueError):
        return False
