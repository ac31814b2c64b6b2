"""Signed server-to-server message construction and verification."""

from blade.protocol.envelope import (
    BLADE_HEADERS,
    BadSignature,
    HEADER_NONCE,
    HEADER_SIGNATURE,
    HEADER_SOURCE,
    HEADER_TARGET,
    HEADER_VERSION,
    MAX_CLOCK_SKEW,
    MessageHeaders,
    MissingHeader,
    NONCE_TTL,
    PROTOCOL_VERSION,
    ReplayedNonce,
    RequestEnvelope,
    RequestMismatch,
    Resolver,
    StaleTimestamp,
    UnknownSender,
    UnsupportedProtocolVersion,
    VerifiedMessage,
    WrongTarget,
    build_request,
    build_response,
    canonical_digest,
    canonical_signing_input,
    status_for_error,
    verify_request,
    verify_response,
)
from blade.protocol.noncecache import NonceCache
from blade.protocol.token import BadToken, decode_token, encode_token

__all__ = [
    "BLADE_HEADERS",
    "BadSignature",
    "BadToken",
    "HEADER_NONCE",
    "HEADER_SIGNATURE",
    "HEADER_SOURCE",
    "HEADER_TARGET",
    "HEADER_VERSION",
    "MAX_CLOCK_SKEW",
    "MessageHeaders",
    "MissingHeader",
    "NONCE_TTL",
    "NonceCache",
    "PROTOCOL_VERSION",
    "ReplayedNonce",
    "RequestEnvelope",
    "RequestMismatch",
    "Resolver",
    "StaleTimestamp",
    "UnknownSender",
    "UnsupportedProtocolVersion",
    "VerifiedMessage",
    "WrongTarget",
    "build_request",
    "build_response",
    "canonical_digest",
    "canonical_signing_input",
    "decode_token",
    "encode_token",
    "status_for_error",
    "verify_request",
    "verify_response",
]
