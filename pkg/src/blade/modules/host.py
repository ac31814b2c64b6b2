"""Module lifecycle: install, start, stop, uninstall, and request routing.

Install is marketplace-driven: bytes are fetched from a URL or file, hashed,
and compared against the registry's content hash before anything is parsed
or activated.  The router maps api ids to running module instances; the
node's interface list is derived from it, so the two can never diverge.

Invocations into one module instance are serialized (re-entrant for nested
calls); different modules run concurrently.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

from blade.crypto import Address, keccak256
from blade.errors import BladeError, NotFound
from blade.modules.api import (
    AdminRequest,
    HostApi,
    ServiceModule,
    resolve_entrypoint,
)
from blade.modules.packaging import ModuleManifest, parse_package
from blade.modules.storage import NodeStorage
from blade.protocol import VerifiedMessage
from blade.registry import Registry


class UnknownModule(BladeError):
    """Module id is not installed (or not registered, on install)."""


class UnknownApi(BladeError):
    """No running module serves this api id."""


class HashMismatch(BladeError):
    """Package bytes do not match the marketplace content hash."""


class ManifestMismatch(BladeError):
    """Package manifest disagrees with the registry record."""


class FetchFailed(BladeError):
    """Package bytes could not be retrieved."""


class InvalidState(BladeError):
    """Lifecycle operation not valid in the module's current state."""


STATES = ("installed", "running", "stopped", "failed")


@dataclass
class InstalledModule:
    manifest: ModuleManifest
    state: str
    install_time: float
    package_hash: bytes

    def to_dict(self) -> dict:
        return {
            "manifest": self.manifest.to_dict(),
            "state": self.state,
            "install_time": self.install_time,
            "package_hash": "0x" + self.package_hash.hex(),
        }


class ModuleHost:
    def __init__(
        self,
        registry: Registry,
        storage: NodeStorage,
        fetch: Callable[[str], bytes],
        clock,
        host_api_factory: Callable[[ModuleManifest], HostApi],
    ):
        self._registry = registry
        self._storage = storage
        self._fetch = fetch
        self._clock = clock
        self._host_api_factory = host_api_factory
        self._installed: dict[str, InstalledModule] = {}  # module_id text
        self._instances: dict[str, ServiceModule] = {}
        self._module_locks: dict[str, threading.RLock] = {}
        self._router: dict[str, str] = {}  # api_id text -> module_id text
        self._lock = threading.RLock()

    # ------------------------------------------------------------------
    # Install / lifecycle
    # ------------------------------------------------------------------

    def _fetch_package(self, source: str) -> bytes:
        try:
            if "://" in source:
                return self._fetch(source)
            return Path(source).read_bytes()
        except (OSError, BladeError) as exc:
            raise FetchFailed(f"cannot fetch package from {source}: {exc}") from exc

    def install_package(
        self, source: Optional[str], expected_module_id: Address
    ) -> InstalledModule:
        """Fetch, hash-verify, cross-check, activate.

        ``source`` defaults to the registry's package_uri.  Nothing is
        installed unless every check passes."""
        try:
            record = self._registry.get_module(expected_module_id)
        except NotFound:
            raise UnknownModule(
                f"module {expected_module_id.text} is not in the marketplace"
            ) from None
        archive = self._fetch_package(source or record.package_uri)
        if keccak256(archive) != record.package_hash:
            raise HashMismatch(
                f"package hash {keccak256(archive).hex()} does not match "
                f"registry {record.package_hash.hex()}"
            )
        package = parse_package(archive)
        manifest = package.manifest
        if (
            manifest.module_id != record.module_id
            or manifest.name != record.name
            or manifest.version != record.version
            or set(manifest.api_ids) != set(record.api_ids)
        ):
            raise ManifestMismatch(
                "manifest (module_id, name, version, api_ids) disagrees with registry"
            )
        factory = resolve_entrypoint(manifest.entrypoint)

        with self._lock:
            if manifest.module_id.text in self._installed:
                raise InvalidState(f"module {manifest.module_id.text} already installed")
            instance = factory()
            installed = InstalledModule(
                manifest=manifest,
                state="installed",
                install_time=self._clock.now(),
                package_hash=record.package_hash,
            )
            self._installed[manifest.module_id.text] = installed
            self._instances[manifest.module_id.text] = instance
            self._module_locks[manifest.module_id.text] = threading.RLock()
        try:
            instance.init(self._host_api_factory(manifest))
        except Exception:
            with self._lock:
                self._installed.pop(manifest.module_id.text, None)
                self._instances.pop(manifest.module_id.text, None)
                self._module_locks.pop(manifest.module_id.text, None)
            raise
        self.start(manifest.module_id)
        return self.get(manifest.module_id)

    def _installed_module(self, module_id: Address | str) -> InstalledModule:
        text = module_id.text if isinstance(module_id, Address) else module_id
        module = self._installed.get(text)
        if module is None:
            raise UnknownModule(f"module {text} is not installed")
        return module

    def get(self, module_id: Address | str) -> InstalledModule:
        with self._lock:
            module = self._installed_module(module_id)
            return InstalledModule(
                manifest=module.manifest,
                state=module.state,
                install_time=module.install_time,
                package_hash=module.package_hash,
            )

    def start(self, module_id: Address | str) -> InstalledModule:
        with self._lock:
            module = self._installed_module(module_id)
            if module.state == "running":
                return self.get(module_id)
            if module.state not in ("installed", "stopped"):
                raise InvalidState(f"cannot start from state {module.state}")
            # router update and state change are atomic under the host lock
            for api_id in module.manifest.api_ids:
                self._router[api_id.text] = module.manifest.module_id.text
            module.state = "running"
            return self.get(module_id)

    def stop(self, module_id: Address | str) -> InstalledModule:
        with self._lock:
            module = self._installed_module(module_id)
            if module.state != "running":
                raise InvalidState(f"cannot stop from state {module.state}")
            for api_id in module.manifest.api_ids:
                if self._router.get(api_id.text) == module.manifest.module_id.text:
                    del self._router[api_id.text]
            module.state = "stopped"
            return self.get(module_id)

    def uninstall(self, module_id: Address | str, purge: bool = False) -> None:
        with self._lock:
            module = self._installed_module(module_id)
            if module.state == "running":
                self.stop(module_id)
            text = module.manifest.module_id.text
            instance = self._instances.pop(text)
            self._installed.pop(text)
            self._module_locks.pop(text)
        try:
            instance.shutdown()
        finally:
            if purge:
                self._storage.purge(text)

    # ------------------------------------------------------------------
    # Routing
    # ------------------------------------------------------------------

    def interfaces(self) -> list[dict]:
        """{api_id, name, version} for every api of a running module."""
        with self._lock:
            entries = []
            for api_id_text, module_id_text in self._router.items():
                manifest = self._installed[module_id_text].manifest
                entries.append(
                    {
                        "api_id": api_id_text,
                        "name": manifest.name,
                        "version": manifest.version,
                    }
                )
            return sorted(entries, key=lambda e: e["api_id"])

    def module_for_api(self, api_id: str) -> InstalledModule:
        with self._lock:
            module_id = self._router.get(api_id)
            if module_id is None:
                raise UnknownApi(f"no running module serves {api_id}")
            return self._installed[module_id]

    def _locked_instance(self, api_id: str):
        with self._lock:
            module_id = self._router.get(api_id)
            if module_id is None:
                raise UnknownApi(f"no running module serves {api_id}")
            return self._instances[module_id], self._module_locks[module_id]

    def invoke_s2s(self, api_id: str, message: VerifiedMessage) -> Any:
        instance, lock = self._locked_instance(api_id)
        with lock:
            return instance.handle_s2s(message)

    def invoke_c2s(self, api_id: str, request: AdminRequest) -> Any:
        instance, lock = self._locked_instance(api_id)
        with lock:
            return instance.handle_c2s(request)

    def list_installed(self) -> list[InstalledModule]:
        with self._lock:
            return [self.get(text) for text in sorted(self._installed)]

    # ------------------------------------------------------------------
    # Marketplace search (read-only registry queries)
    # ------------------------------------------------------------------

    def search_marketplace(
        self, query: str = "", api_id: Optional[Address] = None
    ) -> list[dict]:
        """Substring match on module name, optionally filtered by api id."""
        records = self._registry.list_modules(api_id)
        needle = query.lower()
        hits = []
        with self._lock:
            installed = set(self._installed)
        for record in records:
            if needle and needle not in record.name.lower():
                continue
            entry = record.to_dict()
            entry["installed"] = record.module_id.text in installed
            hits.append(entry)
        return hits
