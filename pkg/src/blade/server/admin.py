"""C2S admin API: the JSON-over-HTTP surface clients (and the bundled web
UI) talk to.  Everything except login requires a bearer session token; the
single admin credential lives in the node config.

Routes (all under /admin/v1/):

    POST   login                          {username, password} -> {token}
    GET    identity
    POST   identity/register              {name}
    POST   identity/url                   {url}
    POST   identity/rotate-delegate
    GET    profile          PUT profile   own profile fields
    GET    contacts[?status=...]
    POST   contacts/request               {target, message}
    POST   contacts/respond               {requester, decision}
    GET    acl              POST acl      rule list / add rule
    PUT    acl/<rule_id>    DELETE acl/<rule_id>
    GET    interfaces
    GET    marketplace/search?q=&api_id=
    GET    modules
    POST   modules/install                {module_id, source?}
    POST   modules/<module_id>            {action: start|stop}
    DELETE modules/<module_id>?purge=true
    ANY    modules/<api_id>/<subpath>     module C2S passthrough
    POST   dispatch                       {target, api_id, method, path, data}
    GET    registry/search?prefix=&limit=
"""

from __future__ import annotations

import json
import secrets
from typing import Any
from urllib.parse import parse_qs, urlsplit

from blade.crypto import Address
from blade.errors import BladeError, NotFound
from blade.modules.api import AdminRequest
from blade.protocol import status_for_error
from blade.server.acl import AclRule
from blade.server.node import BladeNode

ADMIN_PREFIX = "/admin/v1/"
SESSION_TTL = 12 * 3600.0


class Unauthenticated(BladeError):
    pass


def _json_body(body: bytes) -> Any:
    if not body:
        return None
    try:
        return json.loads(body)
    except json.JSONDecodeError as exc:
        raise BladeError(f"request body is not valid JSON: {exc}") from exc


class AdminApi:
    def __init__(self, node: BladeNode):
        self.node = node

    # ------------------------------------------------------------------

    def handle(
        self, method: str, path: str, headers: dict[str, str], body: bytes
    ) -> tuple[int, dict[str, str], bytes]:
        parts = urlsplit(path)
        query = {k: v[-1] for k, v in parse_qs(parts.query).items()}
        route = parts.path[len(ADMIN_PREFIX):] if parts.path.startswith(ADMIN_PREFIX) else None
        if route is None:
            return self._reply(404, {"code": "NotFound", "message": "not an admin path"})
        segments = [s for s in route.split("/") if s]
        try:
            data = _json_body(body)
            if segments == ["login"] and method == "POST":
                result = self._login(data or {})
            else:
                self._authenticate(headers)
                result = self._dispatch(method.upper(), segments, query, data)
            return self._reply(200, result)
        except BladeError as exc:
            return self._reply(status_for_error(exc.code), exc.to_wire())
        except (ValueError, KeyError, TypeError) as exc:
            return self._reply(
                400, {"code": "BadRequest", "message": f"{type(exc).__name__}: {exc}"}
            )

    def _reply(self, status: int, payload: Any):
        raw = json.dumps(payload).encode()
        return status, {"Content-Type": "application/json"}, raw

    # ------------------------------------------------------------------
    # Sessions
    # ------------------------------------------------------------------

    def _login(self, data: dict) -> dict:
        username = data.get("username", "")
        password = data.get("password", "")
        config = self.node.config
        if username != config.admin_user or not config.check_admin_password(password):
            raise Unauthenticated("bad admin credentials")
        token = secrets.token_hex(16)
        self.node.sessions[token] = self.node.clock.now()
        return {"token": token, "identity": self.node.identity_info()}

    def _authenticate(self, headers: dict[str, str]) -> None:
        auth = headers.get("Authorization") or headers.get("authorization") or ""
        token = auth.removeprefix("Bearer ").strip()
        created = self.node.sessions.get(token)
        if created is None or self.node.clock.now() - created > SESSION_TTL:
            self.node.sessions.pop(token, None)
            raise Unauthenticated("missing or expired session token")

    # ------------------------------------------------------------------
    # Routing
    # ------------------------------------------------------------------

    def _dispatch(self, method: str, segments: list[str], query: dict, data) -> Any:
        node = self.node
        match (method, segments):
            case ("GET", ["identity"]):
                return node.identity_info()
            case ("POST", ["identity", "register"]):
                record = node.register((data or {}).get("name", ""))
                return record.to_dict()
            case ("POST", ["identity", "url"]):
                return node.update_public_url((data or {}).get("url", "")).to_dict()
            case ("POST", ["identity", "rotate-delegate"]):
                node.rotate_delegate()
                return node.identity_info()
            case ("GET", ["profile"]):
                return node.profile_for(node.address)
            case ("PUT", ["profile"]):
                return self._update_profile(data or {})
            case ("GET", ["contacts"]):
                entries = node.contacts.list(query.get("status"))
                return [e.to_dict() for e in entries]
            case ("POST", ["contacts", "request"]):
                entry = node.send_connection_request(
                    self._target(data), (data or {}).get("message")
                )
                return entry.to_dict()
            case ("POST", ["contacts", "respond"]):
                entry = node.respond_connection_request(
                    (data or {}).get("requester", ""), (data or {}).get("decision", "")
                )
                return entry.to_dict()
            case ("GET", ["acl"]):
                return [r.to_dict() for r in node.acl.list_rules()]
            case ("POST", ["acl"]):
                return node.acl.add_rule(AclRule.from_dict(data or {})).to_dict()
            case ("PUT", ["acl", rule_id]):
                return node.acl.update_rule(rule_id, **(data or {})).to_dict()
            case ("DELETE", ["acl", rule_id]):
                node.acl.remove_rule(rule_id)
                return {"removed": rule_id}
            case ("GET", ["interfaces"]):
                return node.interface_list()
            case ("GET", ["marketplace", "search"]):
                api_id = query.get("api_id")
                return node.host.search_marketplace(
                    query.get("q", ""),
                    Address.parse(api_id) if api_id else None,
                )
            case ("GET", ["modules"]):
                return [m.to_dict() for m in node.host.list_installed()]
            case ("POST", ["modules", "install"]):
                data = data or {}
                module = node.host.install_package(
                    data.get("source"), Address.parse(data["module_id"])
                )
                return module.to_dict()
            case ("POST", ["modules", module_id]):
                return self._lifecycle(module_id, (data or {}).get("action", ""))
            case ("DELETE", ["modules", module_id]):
                node.host.uninstall(
                    Address.parse(module_id),
                    purge=query.get("purge", "") in ("1", "true", "yes"),
                )
                return {"uninstalled": module_id}
            case (_, ["modules", api_id, *rest]) if rest:
                request = AdminRequest(
                    method=method, path="/" + "/".join(rest), data=data, query=query
                )
                return node.module_admin_request(api_id, request)
            case ("POST", ["dispatch"]):
                return self._test_dispatch(data or {})
            case ("GET", ["registry", "search"]):
                hits = node.registry.search_names(
                    query.get("prefix", ""), int(query.get("limit", "25"))
                )
                return [r.to_dict() for r in hits]
            case _:
                raise NotFound(f"no admin route {method} /{'/'.join(segments)}")

    # ------------------------------------------------------------------

    @staticmethod
    def _target(data) -> str:
        target = (data or {}).get("target")
        if not target:
            raise BladeError("missing target")
        return target

    def _update_profile(self, fields: dict) -> dict:
        allowed = {"display_name", "description", "avatar_hash"}
        unknown = set(fields) - allowed
        if unknown:
            raise BladeError(f"unknown profile fields {sorted(unknown)}")
        for key, value in fields.items():
            if value is None:
                self.node.config.profile.pop(key, None)
            else:
                self.node.config.profile[key] = value
        return self.node.profile_for(self.node.address)

    def _lifecycle(self, module_id: str, action: str) -> dict:
        address = Address.parse(module_id)
        if action == "start":
            return self.node.host.start(address).to_dict()
        if action == "stop":
            return self.node.host.stop(address).to_dict()
        raise BladeError(f"unknown lifecycle action {action!r}")

    def _test_dispatch(self, data: dict) -> dict:
        api_id = data.get("api_id", "base")
        method = data.get("method", "GET")
        path = data.get("path", "/")
        target = self._target(data)
        if api_id == "base":
            record = self.node.resolve_target(target)
            verified = self.node._send(record, method, path, data.get("data"))
        else:
            verified = self.node.dispatch(
                target, Address.parse(api_id), method, path, data.get("data")
            )
        return {"status": verified.status, "data": verified.data}
