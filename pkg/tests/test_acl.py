import pytest

from blade.errors import NotFound
from blade.server.acl import AclEngine, AclRule, InvalidRule
from helpers import seeded_keypair

OWNER = seeded_keypair("owner").address
FRIEND = seeded_keypair("friend").address
STRANGER = seeded_keypair("stranger").address
API = seeded_keypair("api").address.text


def contacts(subject):
    return subject == FRIEND.text


@pytest.fixture
def engine():
    return AclEngine(owner=OWNER)


def test_default_deny(engine):
    assert not engine.evaluate(STRANGER, API, "/card", "read")
    assert not engine.evaluate(FRIEND, "base", "/profile", "read", is_contact=contacts)


def test_owner_always_allowed(engine):
    assert engine.evaluate(OWNER, API, "/anything", "write")


def test_contacts_group_rule(engine):
    engine.add_rule(
        AclRule(
            subject="contacts",
            api_id=API,
            path_pattern="/card",
            action="read",
            effect="allow",
        )
    )
    assert engine.evaluate(FRIEND, API, "/card", "read", is_contact=contacts)
    assert not engine.evaluate(STRANGER, API, "/card", "read", is_contact=contacts)
    # same rule does not grant writes
    assert not engine.evaluate(FRIEND, API, "/card", "write", is_contact=contacts)


def test_pending_contact_is_not_a_contact(engine):
    engine.add_rule(
        AclRule(
            subject="contacts",
            api_id=API,
            path_pattern="/card",
            action="read",
            effect="allow",
        )
    )
    # the is_contact callback only returns True for accepted entries
    assert not engine.evaluate(STRANGER, API, "/card", "read", is_contact=contacts)


def test_first_match_wins_by_priority(engine):
    engine.add_rule(
        AclRule(
            subject=STRANGER.text,
            api_id=API,
            path_pattern="*",
            action="read",
            effect="deny",
            priority=200,
        )
    )
    engine.add_rule(
        AclRule(
            subject="*",
            api_id=API,
            path_pattern="*",
            action="read",
            effect="allow",
            priority=100,
        )
    )
    # the allow rule has lower priority number -> evaluated first -> wins
    assert engine.evaluate(STRANGER, API, "/card", "read")

    engine.replace_rules([])
    engine.add_rule(
        AclRule(
            subject=STRANGER.text,
            api_id=API,
            path_pattern="*",
            action="read",
            effect="deny",
            priority=50,
        )
    )
    engine.add_rule(
        AclRule(
            subject="*",
            api_id=API,
            path_pattern="*",
            action="read",
            effect="allow",
            priority=100,
        )
    )
    assert not engine.evaluate(STRANGER, API, "/card", "read")


def test_path_glob_matching(engine):
    engine.add_rule(
        AclRule(
            subject="*",
            api_id=API,
            path_pattern="/photos/*",
            action="read",
            effect="allow",
        )
    )
    assert engine.evaluate(STRANGER, API, "/photos/cat.jpg", "read")
    assert not engine.evaluate(STRANGER, API, "/card", "read")


def test_item_id_scoping(engine):
    engine.add_rule(
        AclRule(
            subject="*",
            api_id="base",
            path_pattern="/profile",
            action="read",
            effect="deny",
            priority=10,
            item_id="avatar_hash",
        )
    )
    engine.add_rule(
        AclRule(
            subject="*",
            api_id="base",
            path_pattern="/profile",
            action="read",
            effect="allow",
            priority=20,
        )
    )
    assert engine.evaluate(STRANGER, "base", "/profile", "read")  # item None
    assert engine.evaluate(STRANGER, "base", "/profile", "read", item_id="display_name")
    assert not engine.evaluate(STRANGER, "base", "/profile", "read", item_id="avatar_hash")


def test_wildcard_api(engine):
    engine.add_rule(
        AclRule(
            subject=FRIEND.text,
            api_id="*",
            path_pattern="*",
            action="read",
            effect="allow",
        )
    )
    assert engine.evaluate(FRIEND, API, "/x", "read")
    assert engine.evaluate(FRIEND, "base", "/profile", "read")


def test_rule_crud(engine):
    rule = engine.add_rule(
        AclRule(subject="*", api_id="*", path_pattern="*", action="read", effect="allow")
    )
    assert any(r.rule_id == rule.rule_id for r in engine.list_rules())
    updated = engine.update_rule(rule.rule_id, effect="deny", priority=5)
    assert updated.effect == "deny" and updated.priority == 5
    engine.remove_rule(rule.rule_id)
    with pytest.raises(NotFound):
        engine.remove_rule(rule.rule_id)


def test_rule_validation():
    with pytest.raises(InvalidRule):
        AclRule(subject="*", api_id="*", path_pattern="*", action="execute", effect="allow")
    with pytest.raises(InvalidRule):
        AclRule(subject="*", api_id="*", path_pattern="*", action="read", effect="maybe")
    with pytest.raises(ValueError):
        AclRule(subject="bogus", api_id="*", path_pattern="*", action="read", effect="allow")


def test_rules_persist(tmp_path):
    path = tmp_path / "acl.json"
    engine = AclEngine(owner=OWNER, store_path=path)
    engine.add_rule(
        AclRule(subject="*", api_id=API, path_pattern="/card", action="read", effect="allow")
    )
    reloaded = AclEngine(owner=OWNER, store_path=path)
    assert reloaded.evaluate(STRANGER, API, "/card", "read")
