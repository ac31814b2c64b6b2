"""Two live nodes over real HTTP for the frontend integration tests.

Brings up alice and bob sharing one registry, registers both, makes bob send
alice a connection request (so alice's inbox has one pending entry), puts
the contact module on the marketplace, and hosts a corrupted copy of the
package as a local file.  Prints one JSON line with the connection details,
then the READY marker, then blocks until stdin closes.
"""

import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from blade.crypto import keccak256  # noqa: E402
from blade.modules.contacts_module import ENTRYPOINT  # noqa: E402
from blade.modules.packaging import ModuleManifest, build_package  # noqa: E402
from blade.registry import make_tx  # noqa: E402
from blade.simnet import SimNetwork  # noqa: E402


def main() -> None:
    sim = SimNetwork(seed=2025, transport="http")
    alice = sim.spawn("alice", admin_password="frontend-test")
    bob = sim.spawn("bob", admin_password="frontend-test")
    alice.node.register("alice")
    bob.node.register("bob")

    # bob knocks: alice's inbox now has a pending request
    bob.node.send_connection_request("alice", "it's bob, from the integration test")
    sim.settle()

    # marketplace: org + api + module, package on disk (plus a corrupted copy)
    publisher_key = bob.node.identity_key.private_key
    from blade.crypto import generate_keypair

    org = generate_keypair().address
    api = generate_keypair().address
    module = generate_keypair().address
    sim.registry.apply_tx(make_tx("create_organization", {"org_id": org}, publisher_key))
    sim.registry.apply_tx(
        make_tx(
            "register_api",
            {
                "api_id": api,
                "org_id": org,
                "name": "contacts",
                "version": "1.0.0",
                "spec_uri": "http://specs.example/contacts",
            },
            publisher_key,
        )
    )
    manifest = ModuleManifest(
        module_id=module,
        name="contact-db",
        version="1.0.0",
        api_ids=(api,),
        entrypoint=ENTRYPOINT,
    )
    archive = build_package(manifest)
    tmp = Path(tempfile.mkdtemp(prefix="blade-frontend-"))
    package_path = tmp / "contact-db.bpk"
    package_path.write_bytes(archive)
    corrupted = bytearray(archive)
    corrupted[len(corrupted) // 2] ^= 0x5A
    corrupted_path = tmp / "contact-db-corrupted.bpk"
    corrupted_path.write_bytes(bytes(corrupted))
    sim.registry.apply_tx(
        make_tx(
            "register_module",
            {
                "module_id": module,
                "org_id": org,
                "name": "contact-db",
                "version": "1.0.0",
                "package_uri": "http://packages.example/contact-db.bpk",
                "package_hash": keccak256(archive),
                "api_ids": [api],
            },
            publisher_key,
        )
    )

    print(
        json.dumps(
            {
                "alice": {"url": alice.node.config.public_url, "password": "frontend-test"},
                "bob": {"url": bob.node.config.public_url, "password": "frontend-test"},
                "bobAddress": bob.address.text,
                "aliceAddress": alice.address.text,
                "moduleId": module.text,
                "apiId": api.text,
                "packageSource": str(package_path),
                "corruptedSource": str(corrupted_path),
            }
        )
    )
    print("READY", flush=True)
    sys.stdin.read()  # stay alive until the test closes stdin
    sim.close()


if __name__ == "__main__":
    main()
