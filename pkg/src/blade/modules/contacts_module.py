"""Reference module: a decentralized contact database.

Peers subscribe to a user's contact card and get updates pushed to their own
nodes; a per-subscriber, per-field rule table controls which fields each
subscriber ever sees (filtering happens at the source).  Mirrors are ordered
by a monotone revision counter, so replayed or out-of-order pushes are
harmless.

S2S surface (module-relative paths):
    POST   /subscription              subscribe (sender = subscriber)
    DELETE /subscription/<sid>        unsubscribe
    GET    /card                      read the filtered card
    PUT    /subscription/<contactID>  inbound push of contactID's card

C2S surface:
    GET/PUT /card         own card read / field update
    GET/PUT /field-acl    per-subscriber field disclosure rows
    GET     /subscriptions
    GET     /mirrors
    POST    /subscribe    {"target": address-or-name}
    POST    /unsubscribe  {"target": address}
"""

from __future__ import annotations

import secrets
from typing import Any, Optional

from blade.crypto import Address
from blade.errors import BladeError, DispatchFailed, NotFound
from blade.modules.api import AdminRequest, HostApi, ServiceModule, register_entrypoint
from blade.protocol import VerifiedMessage

ENTRYPOINT = "contact-db"
MODULE_NAME = "contact-db"
API_NAME = "contacts"

CARD_FIELDS = (
    "display_name",
    "email",
    "phone",
    "postal_address",
    "org",
    "note",
    "avatar_hash",
)


class InvalidField(BladeError):
    pass


class AlreadySubscribed(BladeError):
    pass


class UnknownSid(BladeError):
    pass


class NotSubscribed(BladeError):
    """Inbound push from a peer we never subscribed to."""


class SenderMismatch(BladeError):
    """Peers may only push their own card."""


class StaleRevision(BladeError):
    """Pushed revision is lower than the stored mirror revision."""


def _filter_fields(fields: dict, subject: str, rows: list, is_contact) -> dict:
    """Per-field evaluation of the disclosure rows: first match wins,
    default deny."""
    allowed = {}
    for name, value in fields.items():
        for row_subject, row_field, effect in rows:
            if row_field != "*" and row_field != name:
                continue
            if row_subject == "contacts":
                if not is_contact(subject):
                    continue
            elif row_subject != "*" and row_subject != subject:
                continue
            if effect == "allow":
                allowed[name] = value
            break  # first matching row decides
    return allowed


class ContactDatabaseModule(ServiceModule):
    def __init__(self):
        self._host: Optional[HostApi] = None

    # ------------------------------------------------------------------
    # Lifecycle
    # ------------------------------------------------------------------

    def init(self, host: HostApi) -> None:
        self._host = host
        if host.storage.get_or_none("card") is None:
            host.storage.put_json(
                "card", {"fields": {}, "revision": 0, "updated_at": host.clock.now()}
            )
        if host.storage.get_or_none("fieldacl") is None:
            host.storage.put_json("fieldacl", [])

    def shutdown(self) -> None:
        self._host = None

    @property
    def host(self) -> HostApi:
        assert self._host is not None, "module not initialized"
        return self._host

    # ------------------------------------------------------------------
    # Card and field rules
    # ------------------------------------------------------------------

    def _card(self) -> dict:
        return self.host.storage.get_json("card")

    def _field_rows(self) -> list:
        return self.host.storage.get_json("fieldacl", [])

    def _is_contact(self, subject: str) -> bool:
        return any(
            c["address"] == subject and c["status"] == "accepted"
            for c in self.host.contacts()
        )

    def filtered_card(self, subject: str) -> dict:
        card = self._card()
        return {
            "fields": _filter_fields(
                card["fields"], subject, self._field_rows(), self._is_contact
            ),
            "revision": card["revision"],
            "updated_at": card["updated_at"],
        }

    def update_own_card(self, delta: dict) -> dict:
        """Apply a field delta; bumps the revision and fans out pushes.

        A value of None removes the field.  An empty delta is a no-op: no
        revision bump, no pushes."""
        for name in delta:
            if name not in CARD_FIELDS:
                raise InvalidField(f"unknown card field {name!r}")
        if not delta:
            return self._card()
        card = self._card()
        for name, value in delta.items():
            if value is None:
                card["fields"].pop(name, None)
            else:
                card["fields"][name] = value
        card["revision"] += 1
        card["updated_at"] = self.host.clock.now()
        self.host.storage.put_json("card", card)
        self._push_to_all_subscribers()
        return card

    def set_field_rows(self, rows: list) -> list:
        cleaned = []
        for row in rows:
            if isinstance(row, dict):
                row = [row.get("subject"), row.get("field"), row.get("effect")]
            if len(row) != 3 or row[2] not in ("allow", "deny"):
                raise InvalidField(f"bad disclosure row {row!r}")
            if row[1] != "*" and row[1] not in CARD_FIELDS:
                raise InvalidField(f"unknown card field {row[1]!r}")
            cleaned.append([row[0], row[1], row[2]])
        self.host.storage.put_json("fieldacl", cleaned)
        return cleaned

    # ------------------------------------------------------------------
    # Subscriptions (we are the owner)
    # ------------------------------------------------------------------

    def _subscriptions(self) -> list[dict]:
        return [
            self.host.storage.get_json(key)
            for key in self.host.storage.list_keys("sub/")
        ]

    def _subscribe(self, subscriber: str) -> dict:
        if self.host.storage.get_or_none(f"sub/{subscriber}") is not None:
            raise AlreadySubscribed(f"{subscriber} already has a subscription")
        sid = "s-" + secrets.token_hex(12)
        record = {
            "sid": sid,
            "subscriber": subscriber,
            "created_at": self.host.clock.now(),
            "last_pushed_revision": 0,
        }
        self.host.storage.put_json(f"sub/{subscriber}", record)
        self.host.storage.put_json(f"sid/{sid}", {"subscriber": subscriber})
        # initial card push follows once this request has been answered
        self.host.defer(lambda: self._push_to_subscriber(subscriber))
        return {"sid": sid}

    def _unsubscribe_sid(self, sender: str, sid: str) -> dict:
        owner = self.host.storage.get_json(f"sid/{sid}")
        # sids are opaque and per-subscriber: someone else's sid is unknown
        if owner is None or owner["subscriber"] != sender:
            raise UnknownSid(f"no subscription {sid}")
        self.host.storage.delete(f"sid/{sid}")
        self.host.storage.delete(f"sub/{sender}")
        return {"removed": sid}

    def _push_to_subscriber(self, subscriber: str) -> bool:
        """Push the filtered card to one subscriber.

        A misbehaving subscriber must never break the owner's update, so
        every push failure is absorbed here: unreachable or
        temporarily-incompatible peers go to the retry queue, a peer that
        says it is not subscribed gets dropped, anything else is logged."""
        record = self.host.storage.get_json(f"sub/{subscriber}")
        if record is None:
            return True  # unsubscribed in the meantime; nothing to do
        own = self.host.identity()["address"]
        payload = self.filtered_card(subscriber)
        try:
            self.host.dispatch(
                Address.parse(subscriber),
                self.host.api_ids[0],
                "PUT",
                f"/subscription/{own}",
                payload,
            )
        except StaleRevision:
            pass  # subscriber already has something newer
        except NotSubscribed:
            # the peer canceled without telling us: drop our side
            sid = record.get("sid")
            if sid and self.host.storage.get_or_none(f"sid/{sid}") is not None:
                self.host.storage.delete(f"sid/{sid}")
            self.host.storage.delete(f"sub/{subscriber}")
            return True
        except BladeError as exc:
            if not isinstance(exc, DispatchFailed):
                self.host.log.warning("push to %s failed: %s", subscriber, exc)
            self.host.enqueue_retry(lambda: self._push_to_subscriber(subscriber))
            return False
        record = self.host.storage.get_json(f"sub/{subscriber}")
        if record is not None:
            record["last_pushed_revision"] = max(
                record["last_pushed_revision"], payload["revision"]
            )
            self.host.storage.put_json(f"sub/{subscriber}", record)
        return True

    def _push_to_all_subscribers(self) -> None:
        for record in self._subscriptions():
            self._push_to_subscriber(record["subscriber"])

    # ------------------------------------------------------------------
    # Mirrors (we are the subscriber)
    # ------------------------------------------------------------------

    def subscribe_to(self, target_text: str) -> dict:
        target = Address.parse(target_text)
        if self.host.storage.get_or_none(f"outbound/{target.text}") is not None:
            raise AlreadySubscribed(f"already subscribed to {target.text}")
        # record intent and consent first so the owner's immediate push
        # passes the node ACL and the subscription check
        rule_id = self.host.acl_allow(
            target, f"/subscription/{target.text}", "write"
        )
        self.host.storage.put_json(
            f"outbound/{target.text}",
            {"sid": None, "created_at": self.host.clock.now(), "acl_rule": rule_id},
        )
        try:
            reply = self.host.dispatch(
                target, self.host.api_ids[0], "POST", "/subscription", {}
            )
        except BladeError:
            self.host.storage.delete(f"outbound/{target.text}")
            self.host.acl_revoke(rule_id)
            raise
        self.host.storage.put_json(
            f"outbound/{target.text}",
            {
                "sid": reply["sid"],
                "created_at": self.host.clock.now(),
                "acl_rule": rule_id,
            },
        )
        return reply

    def unsubscribe(self, target_text: str) -> dict:
        target = Address.parse(target_text)
        record = self.host.storage.get_json(f"outbound/{target.text}")
        if record is None:
            raise NotSubscribed(f"not subscribed to {target.text}")
        if record.get("sid"):
            self.host.dispatch(
                target,
                self.host.api_ids[0],
                "DELETE",
                f"/subscription/{record['sid']}",
                None,
            )
        if record.get("acl_rule"):
            self.host.acl_revoke(record["acl_rule"])
        self.host.storage.delete(f"outbound/{target.text}")
        if self.host.storage.get_or_none(f"mirror/{target.text}") is not None:
            self.host.storage.delete(f"mirror/{target.text}")
        return {"unsubscribed": target.text}

    def _receive_push(self, sender: str, contact_id: str, data: Any) -> dict:
        if sender != contact_id:
            raise SenderMismatch(
                f"{sender} may not push the card of {contact_id}"
            )
        if self.host.storage.get_or_none(f"outbound/{sender}") is None:
            raise NotSubscribed(f"no subscription to {sender}")
        if not isinstance(data, dict) or "revision" not in data:
            raise InvalidField("push payload must carry a revision")
        stored = self.host.storage.get_json(f"mirror/{sender}")
        if stored is not None:
            if data["revision"] < stored["revision"]:
                raise StaleRevision(
                    f"push revision {data['revision']} < mirror {stored['revision']}"
                )
            if data["revision"] == stored["revision"]:
                return {"stored": False, "revision": stored["revision"]}
        self.host.storage.put_json(
            f"mirror/{sender}",
            {
                "fields": data.get("fields", {}),
                "revision": data["revision"],
                "updated_at": data.get("updated_at"),
            },
        )
        return {"stored": True, "revision": data["revision"]}

    def list_mirrors(self) -> list[dict]:
        mirrors = []
        for key in self.host.storage.list_keys("mirror/"):
            mirror = self.host.storage.get_json(key)
            mirror["address"] = key.split("/", 1)[1]
            mirrors.append(mirror)
        return mirrors

    # ------------------------------------------------------------------
    # Request surfaces
    # ------------------------------------------------------------------

    def handle_s2s(self, message: VerifiedMessage) -> Any:
        sender = message.sender.address.text
        method, path = message.method, message.path
        if method == "POST" and path == "/subscription":
            return self._subscribe(sender)
        if method == "DELETE" and path.startswith("/subscription/"):
            return self._unsubscribe_sid(sender, path.split("/", 2)[2])
        if method == "GET" and path == "/card":
            return self.filtered_card(sender)
        if method == "PUT" and path.startswith("/subscription/"):
            return self._receive_push(sender, path.split("/", 2)[2], message.data)
        raise NotFound(f"no route {method} {path}")

    def handle_c2s(self, request: AdminRequest) -> Any:
        method, path = request.method, request.path
        if method == "GET" and path == "/card":
            return self._card()
        if method == "PUT" and path == "/card":
            return self.update_own_card(request.data or {})
        if method == "GET" and path == "/field-acl":
            return self._field_rows()
        if method == "PUT" and path == "/field-acl":
            return self.set_field_rows(request.data or [])
        if method == "GET" and path == "/subscriptions":
            return self._subscriptions()
        if method == "GET" and path == "/mirrors":
            return self.list_mirrors()
        if method == "POST" and path == "/subscribe":
            return self.subscribe_to((request.data or {}).get("target", ""))
        if method == "POST" and path == "/unsubscribe":
            return self.unsubscribe((request.data or {}).get("target", ""))
        raise NotFound(f"no route {method} {path}")


register_entrypoint(ENTRYPOINT, ContactDatabaseModule)
