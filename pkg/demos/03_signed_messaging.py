"""The server-to-server envelope: five headers, a signed token, verification.

A message carries BladeSourceID, BladeTargetID, BladeProtocolVersion,
BladeNonce, and BladeSignature; the body is a compact JWT whose `data` claim
holds the payload.  The receiver resolves the sender in the registry and
accepts only signatures by the sender's *current* delegate, so key rotation
instantly invalidates stolen keys.
"""

import dataclasses

from blade.clock import VirtualClock
from blade.crypto import generate_keypair
from blade.protocol import (
    BadSignature,
    NonceCache,
    ReplayedNonce,
    build_request,
    verify_request,
)
from blade.registry import Registry, make_tx

registry = Registry()
clock = VirtualClock()

alice_identity, alice_delegate = generate_keypair(), generate_keypair()
bob_identity, bob_delegate = generate_keypair(), generate_keypair()
for name, identity, delegate in [
    ("alice", alice_identity, alice_delegate),
    ("bob", bob_identity, bob_delegate),
]:
    registry.apply_tx(
        make_tx(
            "create_identity",
            {"name": name, "url": f"http://{name}.example", "delegate": delegate.address},
            identity.private_key,
        )
    )

# --- alice builds a signed request for bob
envelope = build_request(
    source=alice_identity.address,
    target=bob_identity.address,
    method="POST",
    path="/base/connection",
    data={"message": "hello bob"},
    delegate_private_key=alice_delegate.private_key,
    clock=clock,
)
print("wire headers:")
for name, value in envelope.headers.to_wire().items():
    print(f"  {name}: {value[:46]}{'...' if len(value) > 46 else ''}")

# --- bob verifies: registry resolution + signature recovery + freshness
cache = NonceCache()
message = verify_request(envelope, registry, cache, bob_identity.address, clock)
print("verified sender:", message.sender.name, "| data:", message.data)

# --- replaying the identical envelope is rejected
try:
    verify_request(envelope, registry, cache, bob_identity.address, clock)
except ReplayedNonce:
    print("replay rejected: nonce already seen")

# --- any tampering breaks the outer signature
tampered = dataclasses.replace(envelope, path="/base/connection/../../etc")
try:
    verify_request(tampered, registry, NonceCache(), bob_identity.address, clock)
except BadSignature:
    print("tamper rejected: signature no longer covers the request")

# --- rotating alice's delegate invalidates everything the old key signed
new_delegate = generate_keypair()
registry.apply_tx(
    make_tx(
        "set_delegate",
        {"new_delegate": new_delegate.address},
        alice_identity.private_key,
    )
)
stale = build_request(
    source=alice_identity.address,
    target=bob_identity.address,
    method="POST",
    path="/base/connection",
    data={"message": "signed with the revoked key"},
    delegate_private_key=alice_delegate.private_key,
    clock=clock,
)
try:
    verify_request(stale, registry, NonceCache(), bob_identity.address, clock)
except BadSignature:
    print("revoked delegate rejected: verification is resolver-driven")
