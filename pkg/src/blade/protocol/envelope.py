"""Signed server-to-server messages.

Every request and response carries five headers:

    BladeSourceID        sender identity address
    BladeTargetID        recipient identity address
    BladeProtocolVersion protocol version, e.g. "1.0"
    BladeNonce           16 random bytes, hex
    BladeSignature       recoverable ECDSA signature by the sender's delegate

The outer signature covers keccak256 of

    METHOD \n PATH \n source \n target \n version \n nonce \n body-bytes

with the header values in text form.  The body is a compact JWT whose `data`
claim carries the module payload; responses additionally carry a `req` claim
(hex of the request's canonical digest, binding response to request) and a
`status` claim so the transport status code is covered by the signature.

Verification is resolver-driven: the signer must be the *current* registry
delegate of the claimed source, so rotating a delegate invalidates old keys
with no protocol-level changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Protocol

from blade.clock import Clock
from blade.crypto import (
    Address,
    Nonce,
    Signature,
    keccak256,
    recover_address,
)
from blade.crypto.identity import Unrecoverable
from blade.crypto import sign_digest
from blade.errors import BladeError, NotFound
from blade.protocol.noncecache import NonceCache
from blade.protocol.token import BadToken, decode_token, encode_token
from blade.registry.records import IdentityRecord

PROTOCOL_VERSION = "1.0"
MAX_CLOCK_SKEW = 300.0  # seconds; accepted |now - iat|
NONCE_TTL = 600.0

HEADER_SOURCE = "BladeSourceID"
HEADER_TARGET = "BladeTargetID"
HEADER_VERSION = "BladeProtocolVersion"
HEADER_NONCE = "BladeNonce"
HEADER_SIGNATURE = "BladeSignature"

BLADE_HEADERS = (
    HEADER_SOURCE,
    HEADER_TARGET,
    HEADER_VERSION,
    HEADER_NONCE,
    HEADER_SIGNATURE,
)

_BODYLESS_METHODS = ("GET", "HEAD")


class MissingHeader(BladeError):
    pass


class WrongTarget(BladeError):
    pass


class UnsupportedProtocolVersion(BladeError):
    pass


class UnknownSender(BladeError):
    pass


class BadSignature(BladeError):
    pass


class StaleTimestamp(BladeError):
    pass


class ReplayedNonce(BladeError):
    pass


class RequestMismatch(BladeError):
    """Response is bound to a different request or responder."""


# HTTP status used when reporting a verification or routing error to a peer.
ERROR_STATUS = {
    "WrongTarget": 404,
    "UnknownSender": 404,
    "NotFound": 404,
    "UnknownApi": 404,
    "UnknownSid": 404,
    "NoPendingRequest": 404,
    "UnknownModule": 404,
    "BadSignature": 401,
    "BadToken": 401,
    "ReplayedNonce": 401,
    "StaleTimestamp": 401,
    "Unauthenticated": 401,
    "Unauthorized": 401,
    "Denied": 403,
    "AlreadySubscribed": 409,
    "UnsupportedProtocolVersion": 400,
}


def status_for_error(code: str) -> int:
    return ERROR_STATUS.get(code, 400)


class Resolver(Protocol):
    """Anything that can resolve an address to its identity record."""

    def resolve_address(self, address: Address) -> IdentityRecord: ...


@dataclass(frozen=True)
class MessageHeaders:
    source: Address
    target: Address
    version: str
    nonce: Nonce
    signature: Signature

    def to_wire(self) -> dict[str, str]:
        return {
            HEADER_SOURCE: self.source.text,
            HEADER_TARGET: self.target.text,
            HEADER_VERSION: self.version,
            HEADER_NONCE: self.nonce.text,
            HEADER_SIGNATURE: self.signature.text,
        }

    @classmethod
    def from_wire(cls, headers: dict[str, str]) -> "MessageHeaders":
        # we always send the exact Table-I names, but HTTP intermediaries may
        # re-case header names, so lookups are case-insensitive
        lowered = {k.lower(): v for k, v in headers.items()}
        values = {}
        for name in BLADE_HEADERS:
            if name.lower() not in lowered:
                raise MissingHeader(f"missing header {name}")
            values[name] = lowered[name.lower()]
        try:
            return cls(
                source=Address.parse(values[HEADER_SOURCE]),
                target=Address.parse(values[HEADER_TARGET]),
                version=values[HEADER_VERSION],
                nonce=Nonce.parse(values[HEADER_NONCE]),
                signature=Signature.parse(values[HEADER_SIGNATURE]),
            )
        except ValueError as exc:
            raise MissingHeader(f"malformed header value: {exc}") from exc


@dataclass(frozen=True)
class RequestEnvelope:
    """A Blade message: HTTP verb, path, five headers, compact-JWT body.

    ``wire_values`` holds the four digested header values exactly as they
    arrived.  The signature covers the raw request bytes, so the verifier
    digests what was received, not a re-normalization of it; any byte-level
    mutation (including hex re-casing) therefore breaks the signature.
    """

    method: str
    path: str
    headers: MessageHeaders
    body: str  # compact JWT; "" only for GET/HEAD requests without payload
    wire_values: Optional[tuple[str, str, str, str]] = None  # src, tgt, ver, nonce

    @classmethod
    def from_wire(
        cls, method: str, path: str, headers: dict[str, str], body: bytes
    ) -> "RequestEnvelope":
        # no normalization anywhere: the method token and header values enter
        # the digest exactly as received
        parsed = MessageHeaders.from_wire(headers)
        lowered = {k.lower(): v for k, v in headers.items()}
        try:
            body_text = body.decode("ascii")
        except UnicodeDecodeError as exc:
            raise BadToken(f"body is not ascii: {exc}") from exc
        return cls(
            method=method,
            path=path,
            headers=parsed,
            body=body_text,
            wire_values=(
                lowered[HEADER_SOURCE.lower()],
                lowered[HEADER_TARGET.lower()],
                lowered[HEADER_VERSION.lower()],
                lowered[HEADER_NONCE.lower()],
            ),
        )

    def body_bytes(self) -> bytes:
        return self.body.encode("ascii")

    def canonical_digest(self) -> bytes:
        source, target, version, nonce = self.wire_values or (
            self.headers.source.text,
            self.headers.target.text,
            self.headers.version,
            self.headers.nonce.text,
        )
        return canonical_digest(
            self.method, self.path, source, target, version, nonce,
            self.body_bytes(),
        )


@dataclass(frozen=True)
class VerifiedMessage:
    """Only ever constructed by verify_request / verify_response."""

    sender: IdentityRecord
    data: Any
    method: str
    path: str
    digest: bytes = field(repr=False)
    status: Optional[int] = None  # responses only


def canonical_digest(
    method: str,
    path: str,
    source: str,
    target: str,
    version: str,
    nonce: str,
    body: bytes,
) -> bytes:
    head = "\n".join((method, path, source, target, version, nonce))
    return keccak256(head.encode("utf-8") + b"\n" + body)


def canonical_signing_input(
    method: str, path: str, headers: dict[str, str], body: bytes
) -> bytes:
    """Digest over a wire-form header map (signature header excluded)."""
    for name in BLADE_HEADERS[:4]:
        if name not in headers:
            raise MissingHeader(f"missing header {name}")
    return canonical_digest(
        method,
        path,
        headers[HEADER_SOURCE],
        headers[HEADER_TARGET],
        headers[HEADER_VERSION],
        headers[HEADER_NONCE],
        body,
    )


def _major(version: str) -> int:
    try:
        return int(str(version).split(".", 1)[0])
    except (ValueError, AttributeError):
        raise UnsupportedProtocolVersion(f"unparseable version {version!r}") from None


def build_request(
    source: Address,
    target: Address,
    method: str,
    path: str,
    data: Any,
    delegate_private_key: bytes,
    clock: Clock,
    version: str = PROTOCOL_VERSION,
) -> RequestEnvelope:
    """Assemble and sign an outbound request.

    The caller is responsible for using the key currently registered as the
    source's delegate; verification happens on the receiving side.
    """
    nonce = Nonce.generate()
    if data is None and method.upper() in _BODYLESS_METHODS:
        body = ""
    else:
        claims = {
            "iss": source.text,
            "aud": target.text,
            "iat": int(clock.now()),
            "data": data,
        }
        body = encode_token(claims, delegate_private_key)
    digest = canonical_digest(
        method.upper(), path, source.text, target.text, version, nonce.text,
        body.encode("ascii"),
    )
    signature = sign_digest(delegate_private_key, digest)
    return RequestEnvelope(
        method=method.upper(),
        path=path,
        headers=MessageHeaders(
            source=source,
            target=target,
            version=version,
            nonce=nonce,
            signature=signature,
        ),
        body=body,
    )


def verify_request(
    envelope: RequestEnvelope,
    resolver: Resolver,
    nonce_cache: NonceCache,
    local_address: Address,
    clock: Clock,
    version: str = PROTOCOL_VERSION,
) -> VerifiedMessage:
    """Full inbound verification pipeline.

    Succeeds iff the message is addressed to us, version-compatible, from a
    registered sender, signed (outer header and inner token) by that sender's
    current delegate, fresh, and not a replay.  The nonce is recorded only
    after every other check has passed.
    """
    headers = envelope.headers
    if headers.target != local_address:
        raise WrongTarget(f"message addressed to {headers.target.text}")
    if _major(headers.version) != _major(version):
        raise UnsupportedProtocolVersion(
            f"cannot serve protocol version {headers.version}"
        )
    try:
        sender = resolver.resolve_address(headers.source)
    except NotFound:
        raise UnknownSender(f"{headers.source.text} is not registered") from None

    digest = envelope.canonical_digest()
    try:
        recovered = recover_address(digest, headers.signature)
    except (Unrecoverable, ValueError):
        raise BadSignature("header signature does not recover") from None
    if recovered != sender.delegate:
        raise BadSignature("header signature is not by the sender's current delegate")

    data = None
    if envelope.body:
        claims = decode_token(envelope.body, sender.delegate)
        if claims.get("iss") != headers.source.text:
            raise BadToken("token iss does not match BladeSourceID")
        if claims.get("aud") != headers.target.text:
            raise BadToken("token aud does not match BladeTargetID")
        if "data" not in claims:
            raise BadToken("token carries no data claim")
        iat = claims.get("iat")
        if not isinstance(iat, (int, float)):
            raise BadToken("token iat missing or not a number")
        if abs(clock.now() - iat) > MAX_CLOCK_SKEW:
            raise StaleTimestamp(f"token iat {iat} outside the freshness window")
        data = claims["data"]
    elif envelope.method not in _BODYLESS_METHODS:
        raise BadToken(f"{envelope.method} request requires a payload token")

    if not nonce_cache.check_and_add(
        headers.source.text, headers.nonce.text, clock.now()
    ):
        raise ReplayedNonce(f"nonce {headers.nonce.text} already seen")

    return VerifiedMessage(
        sender=sender,
        data=data,
        method=envelope.method,
        path=envelope.path,
        digest=digest,
    )


def build_response(
    request_digest: bytes,
    request_path: str,
    status: int,
    data: Any,
    source: Address,
    target: Address,
    delegate_private_key: bytes,
    clock: Clock,
    version: str = PROTOCOL_VERSION,
) -> RequestEnvelope:
    """Sign a response bound to the request it answers.

    The `req` claim carries the request's canonical digest; replaying the
    response against any other request fails verification.  ``target`` is the
    zero address when answering anonymous discovery requests.
    """
    nonce = Nonce.generate()
    claims = {
        "iss": source.text,
        "aud": target.text,
        "iat": int(clock.now()),
        "data": data,
        "req": request_digest.hex(),
        "status": int(status),
    }
    body = encode_token(claims, delegate_private_key)
    digest = canonical_digest(
        "RESPONSE", request_path, source.text, target.text, version, nonce.text,
        body.encode("ascii"),
    )
    signature = sign_digest(delegate_private_key, digest)
    return RequestEnvelope(
        method="RESPONSE",
        path=request_path,
        headers=MessageHeaders(
            source=source,
            target=target,
            version=version,
            nonce=nonce,
            signature=signature,
        ),
        body=body,
    )


def verify_response(
    envelope: RequestEnvelope,
    resolver: Resolver,
    request_digest: bytes,
    requester_address: Address,
    clock: Clock,
    version: str = PROTOCOL_VERSION,
    expected_source: Optional[Address] = None,
) -> VerifiedMessage:
    """Verify a response envelope and its binding to our request."""
    headers = envelope.headers
    if headers.target != requester_address:
        raise WrongTarget(f"response addressed to {headers.target.text}")
    if _major(headers.version) != _major(version):
        raise UnsupportedProtocolVersion(
            f"cannot accept protocol version {headers.version}"
        )
    try:
        sender = resolver.resolve_address(headers.source)
    except NotFound:
        raise UnknownSender(f"{headers.source.text} is not registered") from None

    digest = envelope.canonical_digest()
    try:
        recovered = recover_address(digest, headers.signature)
    except (Unrecoverable, ValueError):
        raise BadSignature("header signature does not recover") from None
    if recovered != sender.delegate:
        raise BadSignature("header signature is not by the sender's current delegate")

    if not envelope.body:
        raise BadToken("responses always carry a payload token")
    claims = decode_token(envelope.body, sender.delegate)
    if claims.get("iss") != headers.source.text:
        raise BadToken("token iss does not match BladeSourceID")
    if claims.get("aud") != headers.target.text:
        raise BadToken("token aud does not match BladeTargetID")
    if claims.get("req") != request_digest.hex():
        raise RequestMismatch("response is bound to a different request")
    if expected_source is not None and headers.source != expected_source:
        raise RequestMismatch(
            f"response from {headers.source.text}, expected {expected_source.text}"
        )
    iat = claims.get("iat")
    if not isinstance(iat, (int, float)):
        raise BadToken("token iat missing or not a number")
    if abs(clock.now() - iat) > MAX_CLOCK_SKEW:
        raise StaleTimestamp(f"token iat {iat} outside the freshness window")
    status = claims.get("status")
    if not isinstance(status, int):
        raise BadToken("token status missing or not an integer")

    return VerifiedMessage(
        sender=sender,
        data=claims.get("data"),
        method="RESPONSE",
        path=envelope.path,
        digest=digest,
        status=status,
    )
