"""The registry state machine: names, delegates, organizations, gas.

Every mutation is a signed transaction; authorization is whoever the
signature recovers to.  Metered operations charge fixed gas costs; reads are
free.  The whole state is a fold over an append-only event log.
"""

from blade.crypto import generate_keypair
from blade.registry import Registry, make_tx

registry = Registry()

alice_identity = generate_keypair()
alice_delegate = generate_keypair()

# --- create an identity: name + url + delegate, signed by the identity key
record = registry.apply_tx(
    make_tx(
        "create_identity",
        {
            "name": "alice",
            "url": "http://alice.example:8440",
            "delegate": alice_delegate.address,
        },
        alice_identity.private_key,
    )
)
print(f"registered {record.name!r} at {record.url}")
print(f"gas so far: {registry.gas.total:,}")  # 144,406

# --- resolution is free, by name or by address
assert registry.resolve_name("alice").address == alice_identity.address
assert registry.resolve_address(alice_identity.address).name == "alice"
assert registry.gas.total == 144_406

# --- the node moved: the (rotatable) delegate key may update the URL
registry.apply_tx(
    make_tx("set_url", {"url": "http://alice.example:9000"}, alice_delegate.private_key)
)
print(f"after set_url: {registry.gas.total:,}")  # +33,101

# --- delegate compromised: rotate it with the identity key
new_delegate = generate_keypair()
registry.apply_tx(
    make_tx(
        "set_delegate",
        {"new_delegate": new_delegate.address},
        alice_identity.private_key,
    )
)
rec = registry.resolve_name("alice")
print(f"after set_delegate: {registry.gas.total:,}")  # +55,481
print("revoked delegates:", [a.text[:10] for a in rec.revoked_delegates])
assert registry.gas.total == 232_988

# --- organizations group publishers in the marketplace
charlie = generate_keypair()
org_id = generate_keypair().address
registry.apply_tx(make_tx("create_organization", {"org_id": org_id}, charlie.private_key))
member = generate_keypair().address
registry.apply_tx(
    make_tx("add_org_member", {"org_id": org_id, "member": member}, charlie.private_key)
)
print(f"with an org and a member: {registry.gas.total:,}")

# --- the event log replays into the exact same state, ledger included
replayed = Registry.from_events(registry.events(0))
assert replayed.snapshot() == registry.snapshot()
print("ok: fold(events) reproduces the live state bit for bit")
print("\nledger entries:")
for op, cost in registry.gas.entries:
    print(f"  {op:24s} {cost:>10,}")
