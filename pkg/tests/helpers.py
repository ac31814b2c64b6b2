"""Shared test fixtures: deterministic keys and registry shortcuts."""

import hashlib

from blade.crypto import KeyPair, generate_keypair, keccak256
from blade.modules.contacts_module import ENTRYPOINT as CONTACT_ENTRYPOINT
from blade.modules.packaging import ModuleManifest, build_package
from blade.registry import Registry, make_tx


def seeded_keypair(label: str) -> KeyPair:
    return generate_keypair(hashlib.sha256(label.encode()).digest())


def publish_contact_module(sim, publisher, label="contactdb", version="1.0.0"):
    """Create an org, register the contacts api and module, host the package.

    Returns (module_id, api_id) as Address objects."""
    org = seeded_keypair(f"{label}/org").address
    api = seeded_keypair(f"{label}/api").address
    module = seeded_keypair(f"{label}/module").address
    key = publisher.node.identity_key.private_key
    sim.registry.apply_tx(make_tx("create_organization", {"org_id": org}, key))
    sim.registry.apply_tx(
        make_tx(
            "register_api",
            {
                "api_id": api,
                "org_id": org,
                "name": "contacts",
                "version": version,
                "spec_uri": "http://specs.simnet/contacts",
            },
            key,
        )
    )
    manifest = ModuleManifest(
        module_id=module,
        name="contact-db",
        version=version,
        api_ids=(api,),
        entrypoint=CONTACT_ENTRYPOINT,
    )
    archive = build_package(manifest)
    package_uri = f"http://packages.simnet/{label}-{version}.bpk"
    sim.hub.host_package(package_uri, archive)
    sim.registry.apply_tx(
        make_tx(
            "register_module",
            {
                "module_id": module,
                "org_id": org,
                "name": "contact-db",
                "version": version,
                "package_uri": package_uri,
                "package_hash": keccak256(archive),
                "api_ids": [api],
            },
            key,
        )
    )
    return module, api


def register_identity(
    registry: Registry,
    label: str,
    name: str | None = None,
    url: str | None = None,
) -> tuple[KeyPair, KeyPair]:
    """Create an identity from a label; returns (identity_key, delegate_key)."""
    identity = seeded_keypair(f"{label}/identity")
    delegate = seeded_keypair(f"{label}/delegate")
    registry.apply_tx(
        make_tx(
            "create_identity",
            {
                "name": name or label,
                "url": url or f"http://{label}.example",
                "delegate": delegate.address,
            },
            identity.private_key,
        )
    )
    return identity, delegate
