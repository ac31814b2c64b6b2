"""The contract between the node and installed service modules.

A module is a host-interface plugin: a component implementing ServiceModule
that the node instantiates via a registered entrypoint name.  Modules get a
capability handle (HostApi) and nothing else: namespaced storage, outbound
dispatch restricted to their own api ids, a read-only contact list, ACL
queries, identity info, and a logger.  Cross-module access does not exist.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from blade.clock import Clock
from blade.crypto import Address
from blade.errors import BladeError
from blade.modules.storage import ModuleStorage
from blade.protocol import VerifiedMessage


class CapabilityDenied(BladeError):
    """Module attempted an operation outside its granted capabilities."""


class EntrypointUnavailable(BladeError):
    """No implementation is registered under the manifest's entrypoint name."""


@dataclass(frozen=True)
class AdminRequest:
    """A C2S passthrough request delivered to a module."""

    method: str
    path: str  # module-relative, e.g. "/card"
    data: Any = None
    query: dict = field(default_factory=dict)


class ServiceModule(ABC):
    """Lifecycle + request surface every module implements."""

    @abstractmethod
    def init(self, host: "HostApi") -> None: ...

    @abstractmethod
    def handle_s2s(self, message: VerifiedMessage) -> Any:
        """Handle a verified peer request; returns the response data."""

    @abstractmethod
    def handle_c2s(self, request: AdminRequest) -> Any:
        """Handle an owner/admin request; returns the response data."""

    def shutdown(self) -> None:  # noqa: B027 - optional hook
        pass


class HostApi:
    """Capabilities handed to one module instance."""

    def __init__(
        self,
        module_id: Address,
        api_ids: tuple[Address, ...],
        granted_api_ids: frozenset[str],
        storage: ModuleStorage,
        clock: Clock,
        identity_info: Callable[[], dict],
        dispatch: Callable[..., Any],
        contacts: Callable[[], list[dict]],
        acl_check: Callable[..., bool],
        acl_allow: Callable[..., str],
        acl_revoke: Callable[[str], None],
        defer: Callable[[Callable[[], None]], None],
        enqueue_retry: Callable[[Callable[[], bool]], None],
    ):
        self.module_id = module_id
        self.api_ids = api_ids
        self.storage = storage
        self.clock = clock
        self.log = logging.getLogger(f"blade.module.{module_id.text[:10]}")
        self._granted = granted_api_ids
        self._identity_info = identity_info
        self._dispatch = dispatch
        self._contacts = contacts
        self._acl_check = acl_check
        self._acl_allow = acl_allow
        self._acl_revoke = acl_revoke
        self._defer = defer
        self._enqueue_retry = enqueue_retry

    # -- identity ------------------------------------------------------

    def identity(self) -> dict:
        """Own node identity: {address, name, registered, url}."""
        return self._identity_info()

    # -- outbound ------------------------------------------------------

    def dispatch(
        self,
        target: Address,
        api_id: Address,
        method: str,
        subpath: str,
        data: Any = None,
    ) -> Any:
        """Send a signed request to a peer's module endpoint.

        Only api ids the module implements (or was explicitly granted in the
        node config) are dispatchable; the node stamps its own identity as
        the source."""
        if api_id not in self.api_ids and api_id.text not in self._granted:
            raise CapabilityDenied(
                f"module {self.module_id.text} may not dispatch on {api_id.text}"
            )
        return self._dispatch(target, api_id, method, subpath, data)

    def defer(self, fn: Callable[[], None]) -> None:
        """Run fn after the current inbound request has been answered."""
        self._defer(fn)

    def enqueue_retry(self, fn: Callable[[], bool]) -> None:
        """Queue fn for retry with backoff until it returns True."""
        self._enqueue_retry(fn)

    # -- node state ----------------------------------------------------

    def contacts(self) -> list[dict]:
        """Read-only copies of the node's contact entries."""
        return self._contacts()

    def acl_check(
        self,
        subject: Address,
        path: str,
        action: str,
        item_id: Optional[str] = None,
    ) -> bool:
        """Evaluate the node ACL for this module's primary api id."""
        return self._acl_check(subject, path, action, item_id)

    def acl_allow(self, subject: Address, path_pattern: str, action: str) -> str:
        """Record consent for one peer on one path of this module's api
        (e.g. accept pushes from a peer after subscribing to it).  Returns
        the rule id for later revocation."""
        return self._acl_allow(subject, path_pattern, action)

    def acl_revoke(self, rule_id: str) -> None:
        self._acl_revoke(rule_id)


# ----------------------------------------------------------------------
# Entrypoint registry: manifest entrypoint name -> module factory
# ----------------------------------------------------------------------

_ENTRYPOINTS: dict[str, Callable[[], ServiceModule]] = {}


def register_entrypoint(name: str, factory: Callable[[], ServiceModule]) -> None:
    _ENTRYPOINTS[name] = factory


def resolve_entrypoint(name: str) -> Callable[[], ServiceModule]:
    factory = _ENTRYPOINTS.get(name)
    if factory is None:
        raise EntrypointUnavailable(
            f"no module implementation registered for entrypoint {name!r}"
        )
    return factory


def registered_entrypoints() -> list[str]:
    return sorted(_ENTRYPOINTS)
