import secrets

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blade.crypto import (
    Address,
    InvalidPoint,
    InvalidScalar,
    KeyPair,
    Nonce,
    Signature,
    Unrecoverable,
    derive_address,
    generate_keypair,
    keccak256,
    recover_address,
    sign_digest,
    verify_signature,
)
from blade.crypto import secp256k1 as ec

# Addresses for the low private keys, confirmed against OpenSSL key
# derivation plus the independent keccak reference (see test_secp256k1 /
# test_keccak for the cross-checks these rest on).
WELL_KNOWN_ADDRESSES = {
    1: "0x7e5f4552091a69125d5dfcb7b8c2659029395bdf",
    2: "0x2b5ad5c4795c026514f8317c7a215e218dccd6cf",
    3: "0x6813eb9362372eef6200f3b1dbc3f819671cba69",
}


@pytest.mark.parametrize("scalar,expected", sorted(WELL_KNOWN_ADDRESSES.items()))
def test_seeded_keypair_matches_reference_addresses(scalar, expected):
    keypair = generate_keypair(scalar.to_bytes(32, "big"))
    assert keypair.address.text == expected


def test_address_independently_recomputed():
    from cryptography.hazmat.primitives.asymmetric import ec as openssl_ec

    from oracles.keccak_oracle import keccak256_reference

    seed = bytes([0x01]) * 32
    keypair = generate_keypair(seed)
    scalar = int.from_bytes(seed, "big")
    nums = (
        openssl_ec.derive_private_key(scalar, openssl_ec.SECP256K1())
        .public_key()
        .public_numbers()
    )
    raw = nums.x.to_bytes(32, "big") + nums.y.to_bytes(32, "big")
    assert keypair.public_key == raw
    assert keypair.address.bytes == keccak256_reference(raw)[-20:]


def test_zero_seed_rejected():
    with pytest.raises(InvalidScalar):
        generate_keypair(bytes(32))
    with pytest.raises(InvalidScalar):
        generate_keypair(ec.N.to_bytes(32, "big"))  # reduces to zero


def test_seed_reduced_mod_order():
    wrapped = generate_keypair((ec.N + 5).to_bytes(32, "big"))
    direct = generate_keypair((5).to_bytes(32, "big"))
    assert wrapped == direct


def test_unseeded_keypairs_distinct():
    assert generate_keypair().private_key != generate_keypair().private_key


def test_seed_length_enforced():
    with pytest.raises(InvalidScalar):
        generate_keypair(b"\x01" * 16)


def test_compressed_and_uncompressed_normalize_to_same_address():
    keypair = generate_keypair(secrets.token_bytes(32))
    x = keypair.public_key[:32]
    y_int = int.from_bytes(keypair.public_key[32:], "big")
    compressed = bytes([0x02 | (y_int & 1)]) + x
    assert derive_address(compressed) == keypair.address
    assert derive_address(keypair.public_key_sec()) == keypair.address
    assert derive_address(keypair.public_key) == keypair.address


def test_off_curve_point_rejected():
    with pytest.raises(InvalidPoint):
        derive_address(b"\x11" * 64)
    with pytest.raises(InvalidPoint):
        derive_address(b"\x02" + b"\x00" * 31 + b"\x05")  # x=5 not on curve
    with pytest.raises(InvalidPoint):
        derive_address(b"\x01" * 10)


def test_sign_recover_roundtrip():
    keypair = generate_keypair()
    digest = keccak256(b"roundtrip")
    signature = sign_digest(keypair.private_key, digest)
    assert recover_address(digest, signature) == keypair.address
    assert verify_signature(digest, signature, keypair.address)


def test_sign_rejects_wrong_digest_length():
    keypair = generate_keypair()
    with pytest.raises(ValueError):
        sign_digest(keypair.private_key, b"\x00" * 31)


def test_signature_deterministic_for_same_inputs():
    keypair = generate_keypair(bytes([7]) * 32)
    digest = keccak256(b"same input")
    assert sign_digest(keypair.private_key, digest) == sign_digest(
        keypair.private_key, digest
    )


def test_high_s_rejected_on_recover():
    keypair = generate_keypair()
    digest = keccak256(b"low-s only")
    sig = sign_digest(keypair.private_key, digest)
    high = Signature(r=sig.r, s=ec.N - sig.s, v=sig.v ^ 1)
    with pytest.raises(Unrecoverable):
        recover_address(digest, high)


def test_bit_flip_fuzz_never_accepts():
    """1000 random single-bit flips in r: never the signer's address."""
    rng = secrets.SystemRandom()
    keypair = generate_keypair(bytes([3]) * 32)
    digest = keccak256(b"flip target")
    sig = sign_digest(keypair.private_key, digest)
    false_accepts = 0
    for _ in range(1000):
        bit = rng.randrange(256)
        mutated = Signature(r=sig.r ^ (1 << bit), s=sig.s, v=sig.v)
        try:
            if recover_address(digest, mutated) == keypair.address:
                false_accepts += 1
        except Unrecoverable:
            pass
    assert false_accepts == 0


def test_signature_never_transfers_between_digests():
    keypair = generate_keypair()
    d1 = keccak256(b"digest one")
    d2 = keccak256(b"digest two")
    sig = sign_digest(keypair.private_key, d1)
    assert not verify_signature(d2, sig, keypair.address)


def test_address_text_roundtrip():
    keypair = generate_keypair()
    addr = keypair.address
    assert Address.parse(addr.text) == addr
    assert addr.text.startswith("0x") and len(addr.text) == 42
    assert addr.text == addr.text.lower()
    # checksum-style casing accepted on input, ignored
    mixed = "0x" + addr.text[2:].upper()
    assert Address.parse(mixed) == addr


def test_address_parse_rejects_garbage():
    with pytest.raises(ValueError):
        Address.parse("0x1234")
    with pytest.raises(ValueError):
        Address.parse("7e5f4552091a69125d5dfcb7b8c2659029395bdf")
    with pytest.raises(ValueError):
        Address.parse("0x" + "zz" * 20)


def test_signature_text_roundtrip():
    keypair = generate_keypair()
    sig = sign_digest(keypair.private_key, keccak256(b"text form"))
    assert Signature.parse(sig.text) == sig
    assert len(sig.text) == 132
    assert sig.text.endswith(f"{sig.v:02x}")


def test_nonce_generation_and_text():
    seen = {Nonce.generate().text for _ in range(50)}
    assert len(seen) == 50
    nonce = Nonce.generate()
    assert Nonce.parse(nonce.text) == nonce
    assert len(nonce.text) == 32


@settings(max_examples=25, deadline=None)
@given(st.binary(min_size=32, max_size=32), st.binary(min_size=1, max_size=64))
def test_roundtrip_property(seed, message):
    scalar = int.from_bytes(seed, "big") % ec.N
    if scalar == 0:
        return
    keypair = generate_keypair(scalar.to_bytes(32, "big"))
    digest = keccak256(message)
    sig = sign_digest(keypair.private_key, digest)
    assert recover_address(digest, sig) == keypair.address
