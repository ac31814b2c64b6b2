"""The node daemon: inbound S2S handling, outbound dispatch, contacts.

A node is transport-agnostic: inbound requests arrive as (method, path,
headers, body) tuples and leave the same way, so the exact same code serves
real HTTP and the in-process simulation fabric.

Inbound pipeline: every request is verified before any handler sees it (the
single exception is anonymous GET /interfaces, a discovery bootstrap that
still gets a *signed* response).  Outbound pipeline: resolve the target in
the registry, negotiate a common api, send a signed envelope, verify the
signed response against the request digest.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import threading
from collections import deque
from typing import Any, Optional

from blade.clock import Clock, SystemClock
from blade.crypto import Address, KeyPair, ZERO_ADDRESS, generate_keypair
from blade.errors import BladeError, Denied, DispatchFailed, NotFound, error_for_code
from blade.modules.api import AdminRequest, HostApi
from blade.modules.host import ModuleHost, UnknownApi
from blade.modules.packaging import ModuleManifest
from blade.modules.storage import NodeStorage
from blade.protocol import (
    HEADER_SIGNATURE,
    MessageHeaders,
    NonceCache,
    NONCE_TTL,
    RequestEnvelope,
    VerifiedMessage,
    build_request,
    build_response,
    canonical_digest,
    status_for_error,
    verify_request,
    verify_response,
)
from blade.registry import Registry, make_tx
from blade.server.acl import AclEngine, AclRule
from blade.server.config import NodeConfig
from blade.server.contacts import ContactEntry, ContactStore, NoPendingRequest
from blade.transport import Transport

logger = logging.getLogger(__name__)

BASE_API_ID = "base"
INTERFACES_CACHE_TTL = 60.0
RETRY_BASE_DELAY = 5.0
RETRY_MAX_DELAY = 600.0
RETRY_MAX_ATTEMPTS = 20

_PROFILE_FIELDS = ("display_name", "description", "avatar_hash")


class ApiMismatch(BladeError):
    """Target node does not serve the required api; carries its interface
    list so the caller can search the marketplace for a compatible module."""

    def __init__(self, message: str, interfaces: Optional[list] = None):
        super().__init__(message)
        self.interfaces = interfaces or []

    def to_wire(self) -> dict:
        wire = super().to_wire()
        wire["interfaces"] = self.interfaces
        return wire


class _RetryEntry:
    __slots__ = ("fn", "attempt", "due")

    def __init__(self, fn, due: float):
        self.fn = fn
        self.attempt = 0
        self.due = due


class BladeNode:
    def __init__(
        self,
        config: NodeConfig,
        registry: Registry,
        transport: Transport,
        clock: Optional[Clock] = None,
        identity_key: Optional[KeyPair] = None,
        delegate_key: Optional[KeyPair] = None,
    ):
        self.config = config
        self.registry = registry
        self.transport = transport
        self.clock = clock or SystemClock()
        self.identity_key = identity_key or generate_keypair()
        self.delegate_key = delegate_key or generate_keypair()
        self.nonce_cache = NonceCache(ttl=NONCE_TTL)
        data_dir = config.data_dir
        self.acl = AclEngine(
            owner=self.identity_key.address,
            store_path=f"{data_dir}/acl.json" if data_dir else None,
        )
        self.contacts = ContactStore(
            store_path=f"{data_dir}/contacts.json" if data_dir else None
        )
        self.storage = NodeStorage(data_dir, config.storage_quota_bytes)
        self.host = ModuleHost(
            registry=registry,
            storage=self.storage,
            fetch=transport.fetch,
            clock=self.clock,
            host_api_factory=self._host_api,
        )
        self.sessions: dict[str, float] = {}
        self.stats = {"s2s_in": 0, "s2s_out": 0}
        self._deferred: deque = deque()
        self._retries: list[_RetryEntry] = []
        self._queues_lock = threading.Lock()
        self._interfaces_cache: dict[str, tuple[float, list]] = {}

    # ------------------------------------------------------------------
    # Identity
    # ------------------------------------------------------------------

    @property
    def address(self) -> Address:
        return self.identity_key.address

    @property
    def registered_name(self) -> Optional[str]:
        try:
            return self.registry.resolve_address(self.address).name
        except NotFound:
            return None

    def identity_info(self) -> dict:
        name = self.registered_name
        return {
            "address": self.address.text,
            "name": name,
            "registered": name is not None,
            "url": self.config.public_url,
            "delegate": self.delegate_key.address.text,
        }

    def register(self, name: str):
        """Use Case 1: write identity, name, url, and delegate to the registry."""
        return self.registry.apply_tx(
            make_tx(
                "create_identity",
                {
                    "name": name,
                    "url": self.config.public_url,
                    "delegate": self.delegate_key.address,
                },
                self.identity_key.private_key,
            )
        )

    def update_public_url(self, url: str):
        """Announce a moved node; the rotatable delegate key suffices."""
        record = self.registry.apply_tx(
            make_tx("set_url", {"url": url}, self.delegate_key.private_key)
        )
        self.config.public_url = url
        return record

    def rotate_delegate(self, new_key: Optional[KeyPair] = None) -> KeyPair:
        """Revoke the current delegate; requires the identity key."""
        new_key = new_key or generate_keypair()
        self.registry.apply_tx(
            make_tx(
                "set_delegate",
                {"new_delegate": new_key.address},
                self.identity_key.private_key,
            )
        )
        self.delegate_key = new_key
        return new_key

    # ------------------------------------------------------------------
    # Deferred work and the retry queue
    # ------------------------------------------------------------------

    def defer(self, fn) -> None:
        with self._queues_lock:
            self._deferred.append(fn)

    def enqueue_retry(self, fn) -> None:
        with self._queues_lock:
            self._retries.append(_RetryEntry(fn, self.clock.now() + RETRY_BASE_DELAY))

    def drain_deferred(self, budget: int = 1000) -> int:
        """Run queued post-response tasks; tasks may enqueue more."""
        ran = 0
        while ran < budget:
            with self._queues_lock:
                if not self._deferred:
                    break
                fn = self._deferred.popleft()
            ran += 1
            try:
                fn()
            except BladeError as exc:
                logger.warning("deferred task failed: %s", exc)
        return ran

    def pump_retries(self) -> int:
        """Attempt every due retry once; reschedules failures with backoff."""
        now = self.clock.now()
        with self._queues_lock:
            due = [e for e in self._retries if e.due <= now]
        ran = 0
        for entry in due:
            ran += 1
            try:
                done = entry.fn()
            except BladeError:
                done = False
            with self._queues_lock:
                if entry not in self._retries:
                    continue
                if done:
                    self._retries.remove(entry)
                else:
                    entry.attempt += 1
                    if entry.attempt >= RETRY_MAX_ATTEMPTS:
                        logger.warning("dropping retry after %d attempts", entry.attempt)
                        self._retries.remove(entry)
                    else:
                        delay = min(
                            RETRY_BASE_DELAY * (2 ** entry.attempt), RETRY_MAX_DELAY
                        )
                        entry.due = self.clock.now() + delay
        return ran

    def pending_work(self) -> Optional[float]:
        """None if idle; else the timestamp at which work becomes due
        (now for deferred tasks)."""
        with self._queues_lock:
            if self._deferred:
                return self.clock.now()
            if self._retries:
                return min(e.due for e in self._retries)
        return None

    # ------------------------------------------------------------------
    # Inbound S2S
    # ------------------------------------------------------------------

    def handle_request(
        self, method: str, path: str, headers: dict[str, str], body: bytes
    ) -> tuple[int, dict[str, str], bytes]:
        """Transport-agnostic S2S entry point."""
        self.stats["s2s_in"] += 1

        if (
            method == "GET"
            and path in ("/interfaces", "/base/interfaces")
            and HEADER_SIGNATURE not in headers
        ):
            return self._respond_anonymous(method, path, headers, body)

        try:
            envelope = RequestEnvelope.from_wire(method, path, headers, body)
        except BladeError as exc:
            payload = json.dumps(
                {"code": getattr(exc, "code", "BadRequest"), "message": str(exc)}
            ).encode()
            return 400, {"Content-Type": "application/json"}, payload

        try:
            message = verify_request(
                envelope,
                resolver=self.registry,
                nonce_cache=self.nonce_cache,
                local_address=self.address,
                clock=self.clock,
                version=self.config.protocol_version,
            )
        except BladeError as exc:
            return self._error_response(envelope, exc)

        try:
            data = self._route(message)
            status = 200
        except BladeError as exc:
            return self._error_response(envelope, exc, target=message.sender.address)
        except Exception as exc:  # pragma: no cover - defensive
            logger.exception("handler crashed")
            wrapped = BladeError(f"internal error: {exc}")
            return self._error_response(envelope, wrapped, target=message.sender.address)

        response = build_response(
            request_digest=message.digest,
            request_path=path,
            status=status,
            data=data,
            source=self.address,
            target=message.sender.address,
            delegate_private_key=self.delegate_key.private_key,
            clock=self.clock,
            version=self.config.protocol_version,
        )
        return self._wire_response(status, response)

    def _respond_anonymous(self, method, path, headers, body):
        """Unsigned discovery: answer GET /interfaces with a signed envelope
        addressed to the zero address, verifiable by anyone with the registry.
        The request digest treats the absent Blade headers as empty strings."""
        digest = canonical_digest(method, path, "", "", "", "", body)
        response = build_response(
            request_digest=digest,
            request_path=path,
            status=200,
            data=self.interface_list(),
            source=self.address,
            target=ZERO_ADDRESS,
            delegate_private_key=self.delegate_key.private_key,
            clock=self.clock,
            version=self.config.protocol_version,
        )
        return self._wire_response(200, response)

    def _error_response(
        self,
        envelope: RequestEnvelope,
        error: BladeError,
        target: Optional[Address] = None,
    ):
        status = status_for_error(error.code)
        response = build_response(
            request_digest=envelope.canonical_digest(),
            request_path=envelope.path,
            status=status,
            data=error.to_wire(),
            source=self.address,
            target=target or envelope.headers.source,
            delegate_private_key=self.delegate_key.private_key,
            clock=self.clock,
            version=self.config.protocol_version,
        )
        return self._wire_response(status, response)

    @staticmethod
    def _wire_response(status: int, response: RequestEnvelope):
        headers = response.headers.to_wire()
        headers["Content-Type"] = "application/jwt"
        return status, headers, response.body_bytes()

    # ------------------------------------------------------------------
    # Routing
    # ------------------------------------------------------------------

    def _route(self, message: VerifiedMessage) -> Any:
        method, path = message.method, message.path
        if path in ("/interfaces", "/base/interfaces") and method == "GET":
            return self.interface_list()
        if path == "/base/profile" and method == "GET":
            return self.handle_profile(message)
        if path == "/base/connection" and method == "POST":
            return self.handle_connection_request(message)
        if path == "/base/connection/response" and method == "POST":
            return self.handle_connection_response(message)
        if path.startswith("/0x"):
            api_id, _, rest = path[1:].partition("/")
            return self.route_module_request(api_id, "/" + rest, message)
        raise NotFound(f"no S2S route {method} {path}")

    def interface_list(self) -> list[dict]:
        entries = self.host.interfaces()
        entries.append(
            {
                "api_id": BASE_API_ID,
                "name": "blade-base",
                "version": self.config.protocol_version,
            }
        )
        return sorted(entries, key=lambda e: e["api_id"])

    def handle_profile(self, message: VerifiedMessage) -> dict:
        sender = message.sender.address
        if not self.acl.evaluate(
            sender,
            BASE_API_ID,
            "/profile",
            "read",
            is_contact=self.contacts.is_accepted,
        ):
            raise Denied("profile access denied")
        return self.profile_for(sender)

    def profile_for(self, subject: Address) -> dict:
        profile = {
            "address": self.address.text,
            "name": self.registered_name,
        }
        for field_name in _PROFILE_FIELDS:
            value = self.config.profile.get(field_name)
            if value is None:
                continue
            if subject == self.address or self.acl.evaluate(
                subject,
                BASE_API_ID,
                "/profile",
                "read",
                item_id=field_name,
                is_contact=self.contacts.is_accepted,
            ):
                profile[field_name] = value
        return profile

    def handle_connection_request(self, message: VerifiedMessage) -> dict:
        sender = message.sender
        existing = self.contacts.get(sender.address)
        if existing is not None and existing.status == "accepted":
            return {"status": "accepted"}
        payload = message.data or {}
        self.contacts.put(
            ContactEntry(
                address=sender.address.text,
                name=sender.name,
                status="pending_in",
                request_message=(
                    payload.get("message") if isinstance(payload, dict) else None
                ),
                updated_at=self.clock.now(),
            )
        )
        return {"status": "pending"}

    def handle_connection_response(self, message: VerifiedMessage) -> dict:
        entry = self.contacts.get(message.sender.address)
        if entry is None or entry.status != "pending_out":
            raise NoPendingRequest(
                f"no outstanding request to {message.sender.address.text}"
            )
        decision = (message.data or {}).get("decision")
        if decision not in ("accept", "decline"):
            raise BladeError(f"unknown decision {decision!r}")
        status = "accepted" if decision == "accept" else "declined"
        self.contacts.set_status(message.sender.address, status)
        return {"status": status}

    def route_module_request(
        self, api_id: str, subpath: str, message: VerifiedMessage
    ) -> Any:
        self.host.module_for_api(api_id)  # raises UnknownApi first
        action = "read" if message.method in ("GET", "HEAD") else "write"
        if not self.acl.evaluate(
            message.sender.address,
            api_id,
            subpath,
            action,
            is_contact=self.contacts.is_accepted,
        ):
            raise Denied(f"{action} access to {api_id}{subpath} denied")
        scoped = dataclasses.replace(message, path=subpath)
        return self.host.invoke_s2s(api_id, scoped)

    # ------------------------------------------------------------------
    # Outbound
    # ------------------------------------------------------------------

    def resolve_target(self, target: Address | str):
        """Accepts an address, address text, or a registered username."""
        if isinstance(target, Address):
            return self.registry.resolve_address(target)
        if isinstance(target, str) and target.startswith("0x"):
            return self.registry.resolve_address(Address.parse(target))
        return self.registry.resolve_name(target)

    def _send(
        self, record, method: str, path: str, data: Any
    ) -> VerifiedMessage:
        """Build, send, and verify one request/response exchange."""
        envelope = build_request(
            source=self.address,
            target=record.address,
            method=method,
            path=path,
            data=data,
            delegate_private_key=self.delegate_key.private_key,
            clock=self.clock,
            version=self.config.protocol_version,
        )
        self.stats["s2s_out"] += 1
        wire = envelope.headers.to_wire()
        wire["Content-Type"] = "application/jwt"
        status, resp_headers, resp_body = self.transport.send(
            record.url, envelope.method, envelope.path, wire, envelope.body_bytes()
        )
        try:
            response = RequestEnvelope.from_wire(
                "RESPONSE", path, resp_headers, resp_body
            )
        except BladeError as exc:
            raise DispatchFailed(f"unparseable response from {record.url}: {exc}") from exc
        verified = verify_response(
            response,
            resolver=self.registry,
            request_digest=envelope.canonical_digest(),
            requester_address=self.address,
            clock=self.clock,
            version=self.config.protocol_version,
            expected_source=record.address,
        )
        if verified.status >= 400:
            wire_error = verified.data if isinstance(verified.data, dict) else {}
            error = error_for_code(
                wire_error.get("code", "Error"), wire_error.get("message", "")
            )
            if isinstance(error, ApiMismatch) or wire_error.get("interfaces"):
                error = ApiMismatch(
                    wire_error.get("message", ""), wire_error.get("interfaces")
                )
            raise error
        return verified

    def fetch_interfaces(self, target: Address | str, fresh: bool = False) -> list:
        """Signed GET /interfaces against the target, cached for 60 s."""
        record = self.resolve_target(target)
        cached = self._interfaces_cache.get(record.address.text)
        if not fresh and cached and self.clock.now() - cached[0] <= INTERFACES_CACHE_TTL:
            return cached[1]
        verified = self._send(record, "GET", "/interfaces", None)
        interfaces = verified.data or []
        self._interfaces_cache[record.address.text] = (self.clock.now(), interfaces)
        return interfaces

    def negotiate(self, target: Address | str, required_api_ids: set) -> set:
        """Intersection of the target's advertised api ids with ours."""
        interfaces = self.fetch_interfaces(target)
        advertised = {e["api_id"] for e in interfaces}
        required = {
            a.text if isinstance(a, Address) else a for a in required_api_ids
        }
        return advertised & required

    def dispatch(
        self,
        target: Address | str,
        api_id: Address,
        method: str,
        subpath: str,
        data: Any = None,
        skip_negotiation: bool = False,
    ) -> VerifiedMessage:
        """Full outbound flow: resolve, negotiate, send, verify."""
        record = self.resolve_target(target)
        api_text = api_id.text if isinstance(api_id, Address) else api_id
        if not skip_negotiation:
            common = self.negotiate(record.address, {api_text})
            if api_text not in common:
                # the cached list may predate an install on the peer; check once
                # against a fresh fetch before declaring a mismatch
                interfaces = self.fetch_interfaces(record.address, fresh=True)
                if api_text not in {e["api_id"] for e in interfaces}:
                    raise ApiMismatch(
                        f"{record.name or record.address.text} does not serve {api_text}",
                        interfaces=interfaces,
                    )
        return self._send(record, method, f"/{api_text}{subpath}", data)

    # ------------------------------------------------------------------
    # Contacts (Use Case 2)
    # ------------------------------------------------------------------

    def send_connection_request(
        self, target: Address | str, message: Optional[str] = None
    ) -> ContactEntry:
        record = self.resolve_target(target)
        entry = ContactEntry(
            address=record.address.text,
            name=record.name,
            status="pending_out",
            request_message=message,
            updated_at=self.clock.now(),
        )
        self.contacts.put(entry)
        try:
            self._send(record, "POST", "/base/connection", {"message": message})
        except DispatchFailed:
            entry.retry_pending = True
            self.contacts.put(entry)
            self.enqueue_retry(
                lambda: self._retry_connection_request(record.address, message)
            )
        return self.contacts.get(record.address)

    def _retry_connection_request(self, address: Address, message) -> bool:
        entry = self.contacts.get(address)
        if entry is None or entry.status != "pending_out":
            return True  # withdrawn or answered; nothing to deliver
        try:
            record = self.registry.resolve_address(address)
            self._send(record, "POST", "/base/connection", {"message": message})
        except (DispatchFailed, NotFound):
            return False
        entry.retry_pending = False
        self.contacts.put(entry)
        return True

    def respond_connection_request(
        self, requester: Address | str, decision: str
    ) -> ContactEntry:
        record = self.resolve_target(requester)
        entry = self.contacts.get(record.address)
        if entry is None or entry.status != "pending_in":
            raise NoPendingRequest(f"no pending request from {record.address.text}")
        if decision not in ("accept", "decline"):
            raise BladeError(f"decision must be accept or decline, got {decision!r}")
        status = "accepted" if decision == "accept" else "declined"
        self.contacts.set_status(record.address, status)
        try:
            self._send(
                record, "POST", "/base/connection/response", {"decision": decision}
            )
        except DispatchFailed:
            self.enqueue_retry(
                lambda: self._retry_connection_response(record.address, decision)
            )
        return self.contacts.get(record.address)

    def _retry_connection_response(self, address: Address, decision: str) -> bool:
        try:
            record = self.registry.resolve_address(address)
            self._send(
                record, "POST", "/base/connection/response", {"decision": decision}
            )
        except (DispatchFailed, NotFound):
            return False
        return True

    # ------------------------------------------------------------------
    # Module host integration
    # ------------------------------------------------------------------

    def _host_api(self, manifest: ModuleManifest) -> HostApi:
        primary_api = manifest.api_ids[0]

        def module_dispatch(target, api_id, method, subpath, data):
            return self.dispatch(target, api_id, method, subpath, data).data

        def module_acl_check(subject, path, action, item_id=None):
            return self.acl.evaluate(
                subject,
                primary_api.text,
                path,
                action,
                item_id=item_id,
                is_contact=self.contacts.is_accepted,
            )

        def module_acl_allow(subject, path_pattern, action):
            rule = self.acl.add_rule(
                AclRule(
                    subject=subject.text if isinstance(subject, Address) else subject,
                    api_id=primary_api.text,
                    path_pattern=path_pattern,
                    action=action,
                    effect="allow",
                    priority=50,  # module consent precedes user rules (100+)
                )
            )
            return rule.rule_id

        def module_acl_revoke(rule_id):
            try:
                self.acl.remove_rule(rule_id)
            except NotFound:
                pass

        return HostApi(
            module_id=manifest.module_id,
            api_ids=manifest.api_ids,
            granted_api_ids=frozenset(
                self.config.module_grants.get(manifest.module_id.text, [])
            ),
            storage=self.storage.namespace(manifest.module_id.text),
            clock=self.clock,
            identity_info=self.identity_info,
            dispatch=module_dispatch,
            contacts=lambda: [e.to_dict() for e in self.contacts.list()],
            acl_check=module_acl_check,
            acl_allow=module_acl_allow,
            acl_revoke=module_acl_revoke,
            defer=self.defer,
            enqueue_retry=self.enqueue_retry,
        )

    def module_admin_request(self, api_id: str, request: AdminRequest) -> Any:
        try:
            return self.host.invoke_c2s(api_id, request)
        except UnknownApi:
            raise
