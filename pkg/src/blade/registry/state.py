"""The registry state machine: identities, organizations, marketplace.

Modeled after a globally consistent contract: every mutation is a signed
transaction, authorization is by signature recovery, every accepted mutation
appends exactly one event, and the live state is a pure fold over the event
log (validation happens before commit; mutation happens only inside the fold
function, so replaying the journal reproduces the state by construction).

Persistence is a line-delimited JSON journal, one event per line with fields
``seq``, ``kind``, ``subject``, ``payload``; an existing journal is replayed
on startup.
"""

from __future__ import annotations

import json
import threading
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterable, Optional

from blade.crypto import Address, Unrecoverable
from blade.errors import BladeError, NotFound, Unauthorized
from blade.registry.gas import GasLedger
from blade.registry.records import (
    ApiRecord,
    EVENT_OP,
    IdentityRecord,
    ModuleRecord,
    OrganizationRecord,
    RegistryEvent,
    parse_version,
    validate_name,
    validate_url,
)
from blade.registry.tx import RegistryTx


class NameTaken(BladeError):
    """The requested username is already registered (first come, first served)."""


class AddressTaken(BladeError):
    """The signer address already owns an identity."""


class UnknownIdentity(BladeError):
    """No identity is registered for the given address."""


class DelegateReuse(BladeError):
    """A revoked delegate address can never become the active delegate again."""


class OrgExists(BladeError):
    pass


class UnknownOrg(BladeError):
    pass


class CannotRemoveOwner(BladeError):
    pass


class ApiExists(BladeError):
    pass


class UnknownApi(BladeError):
    pass


class ModuleExists(BladeError):
    pass


class UnknownModule(BladeError):
    pass


class VersionNotMonotone(BladeError):
    """Module updates must strictly increase the version."""


def _param(params: dict, key: str):
    if key not in params:
        raise BladeError(f"missing tx parameter {key!r}")
    return params[key]


def _addr_param(params: dict, key: str) -> Address:
    value = _param(params, key)
    if isinstance(value, Address):
        return value
    try:
        return Address.parse(value)
    except (ValueError, TypeError):
        raise BladeError(f"tx parameter {key!r} is not an address") from None


def _addr_list_param(params: dict, key: str) -> list[Address]:
    value = _param(params, key)
    if isinstance(value, (str, bytes)):
        raise BladeError(f"tx parameter {key!r} must be a collection of addresses")
    return [a if isinstance(a, Address) else Address.parse(a) for a in value]


def _hash_param(params: dict, key: str) -> bytes:
    value = _param(params, key)
    if isinstance(value, str) and value.startswith("0x"):
        value = bytes.fromhex(value[2:])
    if not isinstance(value, bytes) or len(value) != 32:
        raise BladeError(f"tx parameter {key!r} must be a 32-byte hash")
    return value


class Registry:
    """Reference registry backend.

    Mutations are serialized through a single writer lock (the lock order
    defines event sequence numbers); reads return defensive copies.
    """

    def __init__(self, journal_path: str | Path | None = None):
        self._lock = threading.RLock()
        self._identities: dict[str, IdentityRecord] = {}
        self._names: dict[str, str] = {}  # name -> address text
        self._delegates: dict[str, set[str]] = {}  # delegate -> identity addrs
        self._orgs: dict[str, OrganizationRecord] = {}
        self._modules: dict[str, ModuleRecord] = {}
        self._apis: dict[str, ApiRecord] = {}
        self._api_names: dict[tuple[str, str], str] = {}  # (name, ver) -> api_id
        self._events: list[RegistryEvent] = []
        self.gas = GasLedger()
        self._subscribers: list[Callable[[RegistryEvent], None]] = []
        self._journal_path = Path(journal_path) if journal_path else None
        self._journal_file = None
        if self._journal_path is not None:
            self._open_journal()

    # ------------------------------------------------------------------
    # Journal
    # ------------------------------------------------------------------

    def _open_journal(self) -> None:
        path = self._journal_path
        assert path is not None
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.exists():
            with path.open("r", encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    self._fold(RegistryEvent.from_dict(json.loads(line)))
        self._journal_file = path.open("a", encoding="utf-8")

    @staticmethod
    def journal_line(event: RegistryEvent) -> str:
        return json.dumps(event.to_dict(), sort_keys=True, separators=(",", ":"))

    def close(self) -> None:
        with self._lock:
            if self._journal_file is not None:
                self._journal_file.close()
                self._journal_file = None

    # ------------------------------------------------------------------
    # Transaction entry point
    # ------------------------------------------------------------------

    _HANDLERS: dict[str, str] = {
        "create_identity": "_tx_create_identity",
        "set_url": "_tx_set_url",
        "set_delegate": "_tx_set_delegate",
        "create_organization": "_tx_create_organization",
        "add_org_member": "_tx_add_org_member",
        "remove_org_member": "_tx_remove_org_member",
        "change_org_owner": "_tx_change_org_owner",
        "register_api": "_tx_register_api",
        "register_module": "_tx_register_module",
        "update_module": "_tx_update_module",
    }

    def apply_tx(self, tx: RegistryTx):
        """Validate, charge gas, append exactly one event, return the record.

        Failed transactions charge no gas and leave no trace in the log.
        """
        handler_name = self._HANDLERS.get(tx.op)
        if handler_name is None:
            raise BladeError(f"unknown registry operation {tx.op!r}")
        with self._lock:
            try:
                signer = tx.signer()
            except Unrecoverable:
                raise Unauthorized("transaction signature does not recover") from None
            kind, subject, payload, result_key = getattr(self, handler_name)(
                signer, tx.params
            )
            event = RegistryEvent(
                seq=len(self._events), kind=kind, subject=subject, payload=payload
            )
            self._fold(event)  # charges gas too: the ledger is derived state
            if self._journal_file is not None:
                self._journal_file.write(self.journal_line(event) + "\n")
                self._journal_file.flush()
            result = self._lookup_result(result_key)
        for callback in list(self._subscribers):
            callback(event)
        return result

    def subscribe(self, callback: Callable[[RegistryEvent], None]) -> None:
        """Register a callback invoked (in seq order) after each commit."""
        self._subscribers.append(callback)

    def _lookup_result(self, key: tuple[str, str]):
        table, addr_text = key
        record = getattr(self, table)[addr_text]
        return self._copy(record)

    @staticmethod
    def _copy(record):
        if isinstance(record, IdentityRecord):
            return replace(record, revoked_delegates=list(record.revoked_delegates))
        if isinstance(record, OrganizationRecord):
            return replace(record, members=set(record.members))
        if isinstance(record, ModuleRecord):
            return replace(record, api_ids=set(record.api_ids))
        return replace(record)

    # ------------------------------------------------------------------
    # Validation handlers (no state mutation here)
    # ------------------------------------------------------------------

    def _tx_create_identity(self, signer: Address, params: dict):
        name = validate_name(_param(params, "name"))
        url = validate_url(_param(params, "url"))
        delegate = _addr_param(params, "delegate")
        if signer.text in self._identities:
            raise AddressTaken(f"{signer.text} already owns an identity")
        if name in self._names:
            raise NameTaken(f"username {name!r} is already registered")
        payload = {
            "address": signer.text,
            "name": name,
            "url": url,
            "delegate": delegate.text,
        }
        return "IdentityCreated", signer, payload, ("_identities", signer.text)

    def _resolve_signer_identity(self, signer: Address) -> IdentityRecord:
        """Identity controlled by this signer: its own key or its current
        delegate.  Ambiguous delegates (shared by several identities) do not
        authorize anything."""
        record = self._identities.get(signer.text)
        if record is not None:
            return record
        owners = self._delegates.get(signer.text, set())
        if len(owners) == 1:
            return self._identities[next(iter(owners))]
        raise Unauthorized(f"{signer.text} controls no identity")

    def _tx_set_url(self, signer: Address, params: dict):
        record = self._resolve_signer_identity(signer)
        url = validate_url(_param(params, "url"))
        payload = {"address": record.address.text, "url": url}
        return "UrlChanged", record.address, payload, ("_identities", record.address.text)

    def _tx_set_delegate(self, signer: Address, params: dict):
        record = self._identities.get(signer.text)
        if record is None:
            # The rotatable delegate key explicitly cannot rotate itself.
            if signer.text in self._delegates and self._delegates[signer.text]:
                raise Unauthorized("delegate keys cannot rotate delegates")
            raise UnknownIdentity(f"no identity registered for {signer.text}")
        new_delegate = _addr_param(params, "new_delegate")
        if new_delegate == record.delegate or new_delegate in record.revoked_delegates:
            raise DelegateReuse(f"{new_delegate.text} was already used as a delegate")
        payload = {
            "address": record.address.text,
            "delegate": new_delegate.text,
            "revoked": record.delegate.text,
        }
        return "DelegateChanged", record.address, payload, ("_identities", record.address.text)

    def _tx_create_organization(self, signer: Address, params: dict):
        org_id = _addr_param(params, "org_id")
        if org_id.text in self._orgs:
            raise OrgExists(f"organization {org_id.text} exists")
        payload = {"org_id": org_id.text, "owner": signer.text}
        return "OrgCreated", org_id, payload, ("_orgs", org_id.text)

    def _owned_org(self, signer: Address, org_id: Address) -> OrganizationRecord:
        org = self._orgs.get(org_id.text)
        if org is None:
            raise UnknownOrg(f"organization {org_id.text} not found")
        if org.owner != signer:
            raise Unauthorized(f"{signer.text} does not own {org_id.text}")
        return org

    def _tx_add_org_member(self, signer: Address, params: dict):
        org_id = _addr_param(params, "org_id")
        member = _addr_param(params, "member")
        self._owned_org(signer, org_id)
        payload = {"org_id": org_id.text, "member": member.text}
        return "OrgMemberAdded", org_id, payload, ("_orgs", org_id.text)

    def _tx_remove_org_member(self, signer: Address, params: dict):
        org_id = _addr_param(params, "org_id")
        member = _addr_param(params, "member")
        org = self._owned_org(signer, org_id)
        if member == org.owner:
            raise CannotRemoveOwner("the owner cannot be removed from members")
        payload = {"org_id": org_id.text, "member": member.text}
        return "OrgMemberRemoved", org_id, payload, ("_orgs", org_id.text)

    def _tx_change_org_owner(self, signer: Address, params: dict):
        org_id = _addr_param(params, "org_id")
        new_owner = _addr_param(params, "new_owner")
        org = self._owned_org(signer, org_id)
        payload = {
            "org_id": org_id.text,
            "owner": new_owner.text,
            "previous_owner": org.owner.text,
        }
        return "OrgOwnerChanged", org_id, payload, ("_orgs", org_id.text)

    def _member_org(self, signer: Address, org_id: Address) -> OrganizationRecord:
        org = self._orgs.get(org_id.text)
        if org is None:
            raise UnknownOrg(f"organization {org_id.text} not found")
        if signer not in org.members:
            raise Unauthorized(f"{signer.text} is not a member of {org_id.text}")
        return org

    def _tx_register_api(self, signer: Address, params: dict):
        api_id = _addr_param(params, "api_id")
        org_id = _addr_param(params, "org_id")
        name = _param(params, "name")
        version = _param(params, "version")
        spec_uri = validate_url(_param(params, "spec_uri"))
        parse_version(version)
        self._member_org(signer, org_id)
        if api_id.text in self._apis:
            raise ApiExists(f"api {api_id.text} exists")
        if (name, version) in self._api_names:
            raise ApiExists(f"api {name!r} {version} is already registered")
        payload = {
            "api_id": api_id.text,
            "org_id": org_id.text,
            "name": name,
            "version": version,
            "spec_uri": spec_uri,
        }
        return "ApiRegistered", api_id, payload, ("_apis", api_id.text)

    def _check_api_ids(self, api_ids: Iterable[Address]) -> list[str]:
        texts = []
        for api_id in api_ids:
            if api_id.text not in self._apis:
                raise UnknownApi(f"api {api_id.text} not found")
            texts.append(api_id.text)
        return sorted(texts)

    def _tx_register_module(self, signer: Address, params: dict):
        module_id = _addr_param(params, "module_id")
        org_id = _addr_param(params, "org_id")
        name = _param(params, "name")
        version = _param(params, "version")
        package_uri = validate_url(_param(params, "package_uri"))
        package_hash = _hash_param(params, "package_hash")
        api_ids = self._check_api_ids(_addr_list_param(params, "api_ids"))
        parse_version(version)
        self._member_org(signer, org_id)
        if module_id.text in self._modules:
            raise ModuleExists(f"module {module_id.text} exists")
        payload = {
            "module_id": module_id.text,
            "org_id": org_id.text,
            "name": name,
            "version": version,
            "package_uri": package_uri,
            "package_hash": "0x" + package_hash.hex(),
            "api_ids": api_ids,
        }
        return "ModuleRegistered", module_id, payload, ("_modules", module_id.text)

    def _tx_update_module(self, signer: Address, params: dict):
        module_id = _addr_param(params, "module_id")
        module = self._modules.get(module_id.text)
        if module is None:
            raise UnknownModule(f"module {module_id.text} not found")
        self._member_org(signer, module.org_id)
        version = _param(params, "version")
        if parse_version(version) <= parse_version(module.version):
            raise VersionNotMonotone(
                f"version {version} does not increase on {module.version}"
            )
        package_uri = validate_url(_param(params, "package_uri"))
        package_hash = _hash_param(params, "package_hash")
        api_ids = self._check_api_ids(_addr_list_param(params, "api_ids"))
        payload = {
            "module_id": module_id.text,
            "version": version,
            "package_uri": package_uri,
            "package_hash": "0x" + package_hash.hex(),
            "api_ids": api_ids,
        }
        return "ModuleUpdated", module_id, payload, ("_modules", module_id.text)

    # ------------------------------------------------------------------
    # The fold: the only place state is mutated
    # ------------------------------------------------------------------

    def _fold(self, event: RegistryEvent) -> None:
        expected = len(self._events)
        if event.seq != expected:
            raise BladeError(
                f"journal gap: expected seq {expected}, got {event.seq}"
            )
        payload = event.payload
        kind = event.kind
        if kind == "IdentityCreated":
            record = IdentityRecord(
                address=Address.parse(payload["address"]),
                name=payload["name"],
                url=payload["url"],
                delegate=Address.parse(payload["delegate"]),
                created_at=event.seq,
            )
            self._identities[record.address.text] = record
            self._names[record.name] = record.address.text
            self._delegates.setdefault(record.delegate.text, set()).add(
                record.address.text
            )
        elif kind == "UrlChanged":
            self._identities[payload["address"]].url = payload["url"]
        elif kind == "DelegateChanged":
            record = self._identities[payload["address"]]
            old = record.delegate
            self._delegates.get(old.text, set()).discard(record.address.text)
            record.revoked_delegates.append(old)
            record.delegate = Address.parse(payload["delegate"])
            self._delegates.setdefault(record.delegate.text, set()).add(
                record.address.text
            )
        elif kind == "OrgCreated":
            owner = Address.parse(payload["owner"])
            self._orgs[payload["org_id"]] = OrganizationRecord(
                org_id=Address.parse(payload["org_id"]), owner=owner, members={owner}
            )
        elif kind == "OrgMemberAdded":
            self._orgs[payload["org_id"]].members.add(Address.parse(payload["member"]))
        elif kind == "OrgMemberRemoved":
            self._orgs[payload["org_id"]].members.discard(
                Address.parse(payload["member"])
            )
        elif kind == "OrgOwnerChanged":
            org = self._orgs[payload["org_id"]]
            org.owner = Address.parse(payload["owner"])
            org.members.add(org.owner)
        elif kind == "ApiRegistered":
            record = ApiRecord(
                api_id=Address.parse(payload["api_id"]),
                org_id=Address.parse(payload["org_id"]),
                name=payload["name"],
                version=payload["version"],
                spec_uri=payload["spec_uri"],
            )
            self._apis[record.api_id.text] = record
            self._api_names[(record.name, record.version)] = record.api_id.text
        elif kind == "ModuleRegistered":
            record = ModuleRecord(
                module_id=Address.parse(payload["module_id"]),
                org_id=Address.parse(payload["org_id"]),
                name=payload["name"],
                version=payload["version"],
                package_uri=payload["package_uri"],
                package_hash=bytes.fromhex(payload["package_hash"][2:]),
                api_ids={Address.parse(a) for a in payload["api_ids"]},
            )
            self._modules[record.module_id.text] = record
        elif kind == "ModuleUpdated":
            module = self._modules[payload["module_id"]]
            module.version = payload["version"]
            module.package_uri = payload["package_uri"]
            module.package_hash = bytes.fromhex(payload["package_hash"][2:])
            module.api_ids = {Address.parse(a) for a in payload["api_ids"]}
        else:
            raise BladeError(f"unknown event kind {kind!r}")
        self.gas.charge(EVENT_OP[kind])
        self._events.append(event)

    # ------------------------------------------------------------------
    # Reads (free of charge)
    # ------------------------------------------------------------------

    def resolve_name(self, name: str) -> IdentityRecord:
        with self._lock:
            addr = self._names.get(name)
            if addr is None:
                raise NotFound(f"no identity named {name!r}")
            return self._copy(self._identities[addr])

    def resolve_address(self, address: Address | str) -> IdentityRecord:
        text = address.text if isinstance(address, Address) else address
        with self._lock:
            record = self._identities.get(text)
            if record is None:
                raise NotFound(f"no identity at {text}")
            return self._copy(record)

    def search_names(self, prefix: str, limit: int = 50) -> list[IdentityRecord]:
        with self._lock:
            names = sorted(n for n in self._names if n.startswith(prefix))
            return [
                self._copy(self._identities[self._names[n]]) for n in names[:limit]
            ]

    def list_modules(self, api_id: Optional[Address] = None) -> list[ModuleRecord]:
        with self._lock:
            modules = sorted(self._modules.values(), key=lambda m: m.module_id.text)
            if api_id is not None:
                modules = [m for m in modules if api_id in m.api_ids]
            return [self._copy(m) for m in modules]

    def get_module(self, module_id: Address | str) -> ModuleRecord:
        text = module_id.text if isinstance(module_id, Address) else module_id
        with self._lock:
            record = self._modules.get(text)
            if record is None:
                raise NotFound(f"no module {text}")
            return self._copy(record)

    def get_api(self, api_id: Address | str) -> ApiRecord:
        text = api_id.text if isinstance(api_id, Address) else api_id
        with self._lock:
            record = self._apis.get(text)
            if record is None:
                raise NotFound(f"no api {text}")
            return self._copy(record)

    def list_apis(self) -> list[ApiRecord]:
        with self._lock:
            return [
                self._copy(a)
                for a in sorted(self._apis.values(), key=lambda a: a.api_id.text)
            ]

    def get_org(self, org_id: Address | str) -> OrganizationRecord:
        text = org_id.text if isinstance(org_id, Address) else org_id
        with self._lock:
            record = self._orgs.get(text)
            if record is None:
                raise NotFound(f"no organization {text}")
            return self._copy(record)

    def events(self, from_seq: int = 0) -> list[RegistryEvent]:
        with self._lock:
            return [e for e in self._events if e.seq >= from_seq]

    # ------------------------------------------------------------------
    # Snapshot / replay support
    # ------------------------------------------------------------------

    def snapshot(self) -> dict:
        """Canonical JSON-compatible dump of the full state (tests, admin)."""
        with self._lock:
            return {
                "identities": {
                    k: v.to_dict() for k, v in sorted(self._identities.items())
                },
                "orgs": {k: v.to_dict() for k, v in sorted(self._orgs.items())},
                "modules": {k: v.to_dict() for k, v in sorted(self._modules.items())},
                "apis": {k: v.to_dict() for k, v in sorted(self._apis.items())},
                "gas_total": self.gas.total,
                "gas_entries": list(self.gas.entries),
                "event_count": len(self._events),
            }

    @classmethod
    def from_events(cls, events: Iterable[RegistryEvent]) -> "Registry":
        """Rebuild a registry purely by folding an event stream."""
        registry = cls()
        for event in events:
            registry._fold(event)
        return registry
