"""Identities from key pairs: addresses, signing, recovery, rotation roles.

Every participant (user, organization, module, api) is named by a 20-byte
address: the tail of keccak256 over their public key.  Day-to-day signing
uses a separate, rotatable delegate key; the identity key stays cold.
"""

from blade.crypto import (
    generate_keypair,
    derive_address,
    keccak256,
    recover_address,
    sign_digest,
    verify_signature,
)

# deterministic keys for a reproducible demo; omit the seed in real use
identity = generate_keypair(seed := bytes(31) + b"\x01")
delegate = generate_keypair(bytes(31) + b"\x02")

print("identity address:", identity.address)
print("delegate address:", delegate.address)
assert identity.address.text == "0x7e5f4552091a69125d5dfcb7b8c2659029395bdf"

# the address is a pure function of the public key, whatever its encoding
assert derive_address(identity.public_key) == identity.address
assert derive_address(identity.public_key_sec()) == identity.address

# sign a message digest with the delegate key; anyone can recover the signer
digest = keccak256(b"a message worth signing")
signature = sign_digest(delegate.private_key, digest)
print("signature:", signature.text[:34], "...")

recovered = recover_address(digest, signature)
print("recovered signer:", recovered)
assert recovered == delegate.address

# verification is recovery plus comparison; a different digest never verifies
assert verify_signature(digest, signature, delegate.address)
assert not verify_signature(keccak256(b"another message"), signature, delegate.address)

# deterministic nonces: signing the same digest twice gives the same bytes
assert sign_digest(delegate.private_key, digest) == signature
print("ok: round trip, determinism, and cross-digest rejection all hold")
