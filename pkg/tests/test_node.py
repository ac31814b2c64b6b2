"""Server-core behavior over the in-process fabric."""

import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from blade.crypto import Address, ZERO_ADDRESS
from blade.errors import Denied, DispatchFailed, NotFound
from blade.modules.host import UnknownApi
from blade.protocol import (
    MessageHeaders,
    RequestEnvelope,
    verify_response,
)
from blade.server.acl import AclRule
from blade.server.contacts import NoPendingRequest
from blade.server.node import ApiMismatch
from blade.simnet import SimNetwork
from helpers import publish_contact_module


@pytest.fixture
def sim():
    network = SimNetwork(seed=11)
    for name in ("alice", "bob", "carol"):
        network.spawn(name)
        network[name].node.register(name)
    yield network
    network.close()


def _allow(node, subject, api_id, action="read", pattern="*", priority=100):
    node.acl.add_rule(
        AclRule(
            subject=subject,
            api_id=api_id,
            path_pattern=pattern,
            action=action,
            effect="allow",
            priority=priority,
        )
    )


def _befriend(sim, a="alice", b="bob"):
    sim[a].node.send_connection_request(b)
    sim.settle()
    sim[b].node.respond_connection_request(sim[a].address, "accept")
    sim.settle()


def _install_contact_module(sim, *names):
    module_id, api_id = publish_contact_module(sim, sim["carol"])
    for name in names:
        sim[name].node.host.install_package(None, module_id)
    return module_id, api_id


# ----------------------------------------------------------------------
# interfaces
# ----------------------------------------------------------------------


def test_interfaces_base_only_without_modules(sim):
    entries = sim["alice"].node.interface_list()
    assert entries == [{"api_id": "base", "name": "blade-base", "version": "1.0"}]


def test_interfaces_reflect_running_modules(sim):
    module_id, api_id = _install_contact_module(sim, "alice")
    entries = sim["alice"].node.interface_list()
    assert {e["api_id"] for e in entries} == {"base", api_id.text}

    sim["alice"].node.host.stop(module_id)
    entries = sim["alice"].node.interface_list()
    assert {e["api_id"] for e in entries} == {"base"}

    sim["alice"].node.host.start(module_id)
    assert any(e["api_id"] == api_id.text for e in sim["alice"].node.interface_list())


def test_anonymous_interfaces_discovery_is_signed(sim):
    bob = sim["bob"].node
    status, headers, body = bob.handle_request("GET", "/interfaces", {}, b"")
    assert status == 200
    envelope = RequestEnvelope(
        method="RESPONSE",
        path="/interfaces",
        headers=MessageHeaders.from_wire(headers),
        body=body.decode(),
    )
    from blade.protocol.envelope import canonical_digest

    verified = verify_response(
        envelope,
        resolver=sim.registry,
        request_digest=canonical_digest("GET", "/interfaces", "", "", "", "", b""),
        requester_address=ZERO_ADDRESS,
        clock=sim.clock,
        expected_source=bob.address,
    )
    assert any(e["api_id"] == "base" for e in verified.data)


def test_signed_interfaces_fetch(sim):
    interfaces = sim["alice"].node.fetch_interfaces("bob")
    assert interfaces == [{"api_id": "base", "name": "blade-base", "version": "1.0"}]


# ----------------------------------------------------------------------
# profile
# ----------------------------------------------------------------------


def test_profile_default_deny_for_stranger(sim):
    record = sim.registry.resolve_name("bob")
    with pytest.raises(Denied):
        sim["alice"].node._send(record, "GET", "/base/profile", None)


def test_profile_for_accepted_contact_with_rule(sim):
    bob = sim["bob"].node
    bob.config.profile.update({"display_name": "Bob B.", "description": "hi"})
    _befriend(sim)
    _allow(bob, "contacts", "base", pattern="/profile")
    record = sim.registry.resolve_name("bob")
    verified = sim["alice"].node._send(record, "GET", "/base/profile", None)
    assert verified.data["name"] == "bob"
    assert verified.data["display_name"] == "Bob B."
    assert verified.data["description"] == "hi"


def test_profile_field_level_deny(sim):
    bob = sim["bob"].node
    bob.config.profile.update({"display_name": "Bob B.", "avatar_hash": "0xabc"})
    _befriend(sim)
    _allow(bob, "contacts", "base", pattern="/profile", priority=100)
    bob.acl.add_rule(
        AclRule(
            subject="contacts",
            api_id="base",
            path_pattern="/profile",
            action="read",
            effect="deny",
            priority=10,
            item_id="avatar_hash",
        )
    )
    record = sim.registry.resolve_name("bob")
    verified = sim["alice"].node._send(record, "GET", "/base/profile", None)
    assert verified.data["display_name"] == "Bob B."
    assert "avatar_hash" not in verified.data


def test_owner_profile_is_complete(sim):
    bob = sim["bob"].node
    bob.config.profile.update({"display_name": "Bob B.", "avatar_hash": "0xabc"})
    profile = bob.profile_for(bob.address)
    assert profile["display_name"] == "Bob B."
    assert profile["avatar_hash"] == "0xabc"


# ----------------------------------------------------------------------
# connection requests (Use Case 2)
# ----------------------------------------------------------------------


def test_connection_request_roundtrip(sim):
    entry = sim["alice"].node.send_connection_request("bob", "hello!")
    assert entry.status == "pending_out"
    sim.settle()

    bob_view = sim["bob"].node.contacts.get(sim["alice"].address)
    assert bob_view is not None
    assert bob_view.status == "pending_in"
    assert bob_view.request_message == "hello!"
    assert bob_view.name == "alice"

    sim["bob"].node.respond_connection_request(sim["alice"].address, "accept")
    sim.settle()
    assert sim["alice"].node.contacts.get(sim["bob"].address).status == "accepted"
    assert sim["bob"].node.contacts.get(sim["alice"].address).status == "accepted"


def test_connection_decline(sim):
    sim["alice"].node.send_connection_request("bob")
    sim.settle()
    sim["bob"].node.respond_connection_request(sim["alice"].address, "decline")
    sim.settle()
    assert sim["alice"].node.contacts.get(sim["bob"].address).status == "declined"
    assert sim["bob"].node.contacts.get(sim["alice"].address).status == "declined"


def test_respond_twice_fails(sim):
    sim["alice"].node.send_connection_request("bob")
    sim.settle()
    sim["bob"].node.respond_connection_request(sim["alice"].address, "accept")
    with pytest.raises(NoPendingRequest):
        sim["bob"].node.respond_connection_request(sim["alice"].address, "accept")


def test_unresolvable_target(sim):
    with pytest.raises(NotFound):
        sim["alice"].node.send_connection_request("ghost")


def test_offline_target_retries_until_revived(sim):
    sim.set_fault("bob", offline=True)
    entry = sim["alice"].node.send_connection_request("bob", "are you there?")
    assert entry.status == "pending_out"
    assert entry.retry_pending

    # while offline, time passing does not deliver anything
    sim.settle(until_offset=30)
    assert sim["bob"].node.contacts.get(sim["alice"].address) is None

    sim.set_fault("bob", offline=False)
    sim.settle(until_offset=700)  # enough virtual time for the next attempt
    bob_view = sim["bob"].node.contacts.get(sim["alice"].address)
    assert bob_view is not None and bob_view.status == "pending_in"
    assert not sim["alice"].node.contacts.get(sim["bob"].address).retry_pending


# ----------------------------------------------------------------------
# negotiate / dispatch
# ----------------------------------------------------------------------


def test_negotiate_intersection(sim):
    module_id, api_id = _install_contact_module(sim, "bob")
    common = sim["alice"].node.negotiate("bob", {api_id.text, "base", "0x" + "ff" * 20})
    assert common == {api_id.text, "base"}


def test_negotiate_empty_result_is_valid(sim):
    assert sim["alice"].node.negotiate("bob", {"0x" + "ee" * 20}) == set()


@hyp_settings(max_examples=20, deadline=None)
@given(st.sets(st.sampled_from([f"0x{i:040x}" for i in range(8)] + ["base"])))
def test_negotiate_is_set_intersection(required):
    # pure function check against the advertised list shape
    advertised = [{"api_id": "base"}, {"api_id": f"0x{3:040x}"}, {"api_id": f"0x{5:040x}"}]
    expected = {e["api_id"] for e in advertised} & required
    got = {e["api_id"] for e in advertised} & {a for a in required}
    assert got == expected


def test_interfaces_cache_avoids_second_fetch(sim):
    alice = sim["alice"].node
    alice.fetch_interfaces("bob")
    before = sim.hub.messages_sent
    alice.fetch_interfaces("bob")
    assert sim.hub.messages_sent == before  # cache hit, no network call
    sim.clock.advance(61)
    alice.fetch_interfaces("bob")
    assert sim.hub.messages_sent == before + 1


def test_dispatch_full_flow(sim):
    module_id, api_id = _install_contact_module(sim, "alice", "bob")
    _befriend(sim)
    _allow(sim["bob"].node, "contacts", api_id.text)
    verified = sim["alice"].node.dispatch("bob", api_id, "GET", "/card")
    assert verified.status == 200
    assert verified.data["revision"] == 0


def test_dispatch_api_mismatch_carries_interfaces(sim):
    module_id, api_id = _install_contact_module(sim, "alice")  # bob lacks it
    with pytest.raises(ApiMismatch) as excinfo:
        sim["alice"].node.dispatch("bob", api_id, "GET", "/card")
    assert any(e["api_id"] == "base" for e in excinfo.value.interfaces)


def test_dispatch_unknown_target(sim):
    with pytest.raises(NotFound):
        sim["alice"].node.dispatch(
            "nobody", Address.parse("0x" + "aa" * 20), "GET", "/x"
        )


def test_dispatch_after_node_moves(sim):
    """Stale registry URL fails; once the target republishes, retry works."""
    module_id, api_id = _install_contact_module(sim, "alice", "bob")
    _befriend(sim)
    _allow(sim["bob"].node, "contacts", api_id.text)

    bob = sim["bob"].node
    old_url = bob.config.public_url
    new_url = "http://bob-moved.simnet"
    sim.hub.detach(old_url)
    sim.hub.attach(new_url, bob)

    with pytest.raises(DispatchFailed):
        sim["alice"].node.dispatch("bob", api_id, "GET", "/card")

    bob.update_public_url(new_url)  # delegate-signed registry update
    verified = sim["alice"].node.dispatch("bob", api_id, "GET", "/card")
    assert verified.status == 200


# ----------------------------------------------------------------------
# module routing + ACL enforcement
# ----------------------------------------------------------------------


def test_unknown_api_route(sim):
    record = sim.registry.resolve_name("bob")
    with pytest.raises(UnknownApi):
        sim["alice"].node._send(record, "GET", "/0x" + "cc" * 20 + "/card", None)


def test_verb_to_action_mapping(sim):
    module_id, api_id = _install_contact_module(sim, "alice", "bob")
    _befriend(sim)
    # read-only grant: GET passes, POST (write) denied
    _allow(sim["bob"].node, "contacts", api_id.text, action="read")
    assert sim["alice"].node.dispatch("bob", api_id, "GET", "/card").status == 200
    with pytest.raises(Denied):
        sim["alice"].node.dispatch("bob", api_id, "POST", "/subscription", {})


def test_stopped_module_returns_unknown_api(sim):
    module_id, api_id = _install_contact_module(sim, "alice", "bob")
    _befriend(sim)
    _allow(sim["bob"].node, "contacts", api_id.text)
    sim["bob"].node.host.stop(module_id)
    with pytest.raises((UnknownApi, ApiMismatch)):
        sim["alice"].node.dispatch("bob", api_id, "GET", "/card")


def test_unverified_payloads_never_reach_handlers(sim):
    """Handler-entry contract: a tampered envelope dies in verification."""
    bob = sim["bob"].node
    record = sim.registry.resolve_name("bob")
    from blade.protocol import build_request

    envelope = build_request(
        source=sim["alice"].address,
        target=record.address,
        method="POST",
        path="/base/connection",
        data={"message": "hi"},
        delegate_private_key=sim["alice"].node.delegate_key.private_key,
        clock=sim.clock,
    )
    headers = envelope.headers.to_wire()
    headers["BladeSourceID"] = sim["carol"].address.text  # claim to be carol
    status, _, _ = bob.handle_request(
        "POST", "/base/connection", headers, envelope.body_bytes()
    )
    assert status == 401
    assert bob.contacts.get(sim["alice"].address) is None
    assert bob.contacts.get(sim["carol"].address) is None
