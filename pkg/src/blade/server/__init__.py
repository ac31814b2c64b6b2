"""Node daemon: S2S handling, ACL, contacts, the C2S admin surface."""

from blade.server.acl import AclEngine, AclRule, InvalidRule
from blade.server.admin import AdminApi, Unauthenticated
from blade.server.config import NodeConfig
from blade.server.contacts import ContactEntry, ContactStore, NoPendingRequest
from blade.server.node import ApiMismatch, BladeNode

__all__ = [
    "AclEngine",
    "AclRule",
    "AdminApi",
    "ApiMismatch",
    "BladeNode",
    "ContactEntry",
    "ContactStore",
    "InvalidRule",
    "NoPendingRequest",
    "NodeConfig",
    "Unauthenticated",
]
