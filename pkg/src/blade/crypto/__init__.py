"""Key generation, address derivation, signing, and recovery."""

from blade.crypto.identity import (
    Address,
    EntropyUnavailable,
    InvalidPoint,
    InvalidScalar,
    KeyPair,
    Nonce,
    Signature,
    Unrecoverable,
    ZERO_ADDRESS,
    derive_address,
    generate_keypair,
    recover_address,
    sign_digest,
    verify_signature,
)
from blade.crypto.keccak import keccak256

__all__ = [
    "Address",
    "EntropyUnavailable",
    "InvalidPoint",
    "InvalidScalar",
    "KeyPair",
    "Nonce",
    "Signature",
    "Unrecoverable",
    "ZERO_ADDRESS",
    "derive_address",
    "generate_keypair",
    "keccak256",
    "recover_address",
    "sign_digest",
    "verify_signature",
]
