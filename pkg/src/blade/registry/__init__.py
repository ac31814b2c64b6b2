"""Identity, organization, and marketplace registry with gas accounting."""

from blade.registry.gas import GAS_COSTS, GasLedger, UNMETERED_OPS, cost_of
from blade.registry.records import (
    ApiRecord,
    IdentityRecord,
    InvalidName,
    InvalidUrl,
    InvalidVersion,
    ModuleRecord,
    OrganizationRecord,
    RegistryEvent,
    parse_version,
    validate_name,
    validate_url,
)
from blade.registry.state import (
    AddressTaken,
    ApiExists,
    CannotRemoveOwner,
    DelegateReuse,
    ModuleExists,
    NameTaken,
    OrgExists,
    Registry,
    UnknownApi,
    UnknownIdentity,
    UnknownModule,
    UnknownOrg,
    VersionNotMonotone,
)
from blade.registry.tx import RegistryTx, make_tx, tx_digest

__all__ = [
    "AddressTaken",
    "ApiExists",
    "ApiRecord",
    "CannotRemoveOwner",
    "DelegateReuse",
    "GAS_COSTS",
    "GasLedger",
    "IdentityRecord",
    "InvalidName",
    "InvalidUrl",
    "InvalidVersion",
    "ModuleExists",
    "ModuleRecord",
    "NameTaken",
    "OrgExists",
    "OrganizationRecord",
    "Registry",
    "RegistryEvent",
    "RegistryTx",
    "UNMETERED_OPS",
    "UnknownApi",
    "UnknownIdentity",
    "UnknownModule",
    "UnknownOrg",
    "VersionNotMonotone",
    "cost_of",
    "make_tx",
    "parse_version",
    "tx_digest",
    "validate_name",
    "validate_url",
]
