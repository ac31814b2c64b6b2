"""Registry record types, events, and field validation."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from blade.crypto import Address
from blade.errors import BladeError


class InvalidName(BladeError):
    """Username violates the registry name grammar."""


class InvalidUrl(BladeError):
    """Value does not parse as an absolute http(s) URL."""


class InvalidVersion(BladeError):
    """Value does not parse as MAJOR.MINOR.PATCH."""


# Usernames: lowercase a-z, digits, hyphen; 3-32 chars; no edge hyphens.
_NAME_RE = re.compile(r"^[a-z0-9][a-z0-9-]{1,30}[a-z0-9]$")
_SEMVER_RE = re.compile(r"^(\d+)\.(\d+)\.(\d+)$")


def validate_name(name: str) -> str:
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise InvalidName(f"invalid username {name!r}")
    return name


def validate_url(url: str) -> str:
    if not isinstance(url, str):
        raise InvalidUrl(f"invalid URL {url!r}")
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https") or not parts.netloc:
        raise InvalidUrl(f"invalid URL {url!r}")
    return url


def parse_version(version: str) -> tuple[int, int, int]:
    match = _SEMVER_RE.match(version) if isinstance(version, str) else None
    if not match:
        raise InvalidVersion(f"invalid version {version!r}")
    return tuple(int(g) for g in match.groups())  # type: ignore[return-value]


@dataclass
class IdentityRecord:
    """One registered identity: address and unique name mapped to a server
    location and the currently valid delegate."""

    address: Address
    name: str
    url: str
    delegate: Address
    created_at: int  # seq of the creating event
    revoked_delegates: list[Address] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "address": self.address.text,
            "name": self.name,
            "url": self.url,
            "delegate": self.delegate.text,
            "created_at": self.created_at,
            "revoked_delegates": [a.text for a in self.revoked_delegates],
        }


@dataclass
class OrganizationRecord:
    org_id: Address
    owner: Address
    members: set[Address] = field(default_factory=set)

    def to_dict(self) -> dict:
        return {
            "org_id": self.org_id.text,
            "owner": self.owner.text,
            "members": sorted(m.text for m in self.members),
        }


@dataclass
class ModuleRecord:
    module_id: Address
    org_id: Address
    name: str
    version: str
    package_uri: str
    package_hash: bytes  # keccak256 of the package bytes
    api_ids: set[Address] = field(default_factory=set)

    def to_dict(self) -> dict:
        return {
            "module_id": self.module_id.text,
            "org_id": self.org_id.text,
            "name": self.name,
            "version": self.version,
            "package_uri": self.package_uri,
            "package_hash": "0x" + self.package_hash.hex(),
            "api_ids": sorted(a.text for a in self.api_ids),
        }


@dataclass
class ApiRecord:
    api_id: Address
    org_id: Address
    name: str
    version: str
    spec_uri: str

    def to_dict(self) -> dict:
        return {
            "api_id": self.api_id.text,
            "org_id": self.org_id.text,
            "name": self.name,
            "version": self.version,
            "spec_uri": self.spec_uri,
        }


EVENT_KINDS = (
    "IdentityCreated",
    "UrlChanged",
    "DelegateChanged",
    "OrgCreated",
    "OrgMemberAdded",
    "OrgMemberRemoved",
    "OrgOwnerChanged",
    "ModuleRegistered",
    "ModuleUpdated",
    "ApiRegistered",
)

# Event kind -> operation that emits it; used to rebuild the gas ledger when
# folding a journal (events themselves carry no cost field).
EVENT_OP = {
    "IdentityCreated": "create_identity",
    "UrlChanged": "set_url",
    "DelegateChanged": "set_delegate",
    "OrgCreated": "create_organization",
    "OrgMemberAdded": "add_org_member",
    "OrgMemberRemoved": "remove_org_member",
    "OrgOwnerChanged": "change_org_owner",
    "ModuleRegistered": "register_module",
    "ModuleUpdated": "update_module",
    "ApiRegistered": "register_api",
}


@dataclass(frozen=True)
class RegistryEvent:
    """Append-only log entry; seq is strictly increasing and gap-free."""

    seq: int
    kind: str
    subject: Address
    payload: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "kind": self.kind,
            "subject": self.subject.text,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RegistryEvent":
        return cls(
            seq=int(raw["seq"]),
            kind=raw["kind"],
            subject=Address.parse(raw["subject"]),
            payload=raw["payload"],
        )
