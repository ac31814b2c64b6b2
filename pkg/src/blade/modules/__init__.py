"""Installable service modules: packaging, lifecycle, and capabilities."""

from blade.modules.api import (
    AdminRequest,
    CapabilityDenied,
    EntrypointUnavailable,
    HostApi,
    ServiceModule,
    register_entrypoint,
    registered_entrypoints,
    resolve_entrypoint,
)
from blade.modules.host import (
    FetchFailed,
    HashMismatch,
    InstalledModule,
    InvalidState,
    ManifestMismatch,
    ModuleHost,
    UnknownApi,
    UnknownModule,
)
from blade.modules.packaging import (
    BadPackage,
    BladePackage,
    ModuleManifest,
    build_package,
    parse_package,
)
from blade.modules.storage import ModuleStorage, NodeStorage, QuotaExceeded

__all__ = [
    "AdminRequest",
    "BadPackage",
    "BladePackage",
    "CapabilityDenied",
    "EntrypointUnavailable",
    "FetchFailed",
    "HashMismatch",
    "HostApi",
    "InstalledModule",
    "InvalidState",
    "ManifestMismatch",
    "ModuleHost",
    "ModuleManifest",
    "ModuleStorage",
    "NodeStorage",
    "QuotaExceeded",
    "ServiceModule",
    "UnknownApi",
    "UnknownModule",
    "build_package",
    "parse_package",
    "register_entrypoint",
    "registered_entrypoints",
    "resolve_entrypoint",
]
