"""Scripted multi-node scenarios with assertions and gas reports.

A scenario is an ordered list of steps {actor, action, params, expect}
executed against a fresh network.  The four canonical flows ship as
built-ins (uc1_register, uc2_contacts, uc3_communicate, uc4_publish);
arbitrary scenarios load from JSON files with the same shape:

    {
      "name": "...", "seed": 7, "transport": "inproc",
      "nodes": ["alice", "bob"],
      "steps": [
        {"actor": "alice", "action": "register", "params": {"name": "alice"}},
        {"actor": "alice", "action": "connect",
         "params": {"target": "bob"}, "expect": {"contains": {"status": "pending_out"}}}
      ]
    }

Param values of the form ``$api:LABEL``, ``$module:LABEL``, ``$org:LABEL``,
``$package:LABEL`` resolve to ids created by earlier steps; ``$addr:NODE``
resolves to a node's identity address.

Expect clauses: {"error": CODE} (the step must fail with that code),
{"contains": subset}, {"equals": value}, {"length": n}, {"gas_total": n}.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from blade.crypto import Address, keccak256
from blade.errors import BladeError
from blade.modules.api import AdminRequest
from blade.modules.contacts_module import ENTRYPOINT as CONTACT_ENTRYPOINT
from blade.modules.packaging import ModuleManifest, build_package
from blade.registry import make_tx
from blade.server.acl import AclRule
from blade.simnet.harness import SimNetwork, SimNode, _seeded_key


class StepFailed(BladeError):
    def __init__(self, index: int, cause: str):
        super().__init__(f"step {index}: {cause}")
        self.index = index
        self.cause = cause


@dataclass
class Step:
    actor: str
    action: str
    params: dict = field(default_factory=dict)
    expect: Optional[dict] = None


@dataclass
class Scenario:
    name: str
    seed: int = 0
    transport: str = "inproc"
    nodes: list[str] = field(default_factory=list)
    steps: list[Step] = field(default_factory=list)

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        return cls(
            name=raw["name"],
            seed=int(raw.get("seed", 0)),
            transport=raw.get("transport", "inproc"),
            nodes=list(raw.get("nodes", [])),
            steps=[Step(**s) for s in raw.get("steps", [])],
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class StepResult:
    index: int
    actor: str
    action: str
    ok: bool
    detail: Any = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimReport:
    scenario: str
    seed: int
    transport: str
    steps: list[StepResult] = field(default_factory=list)
    gas_total: int = 0
    message_count: int = 0
    wall_time_s: float = 0.0
    passed: bool = False

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "transport": self.transport,
            "steps": [s.to_dict() for s in self.steps],
            "gas_total": self.gas_total,
            "message_count": self.message_count,
            "wall_time_s": self.wall_time_s,
            "passed": self.passed,
        }


# ----------------------------------------------------------------------
# Param references and expectation matching
# ----------------------------------------------------------------------


def _resolve(sim: SimNetwork, value: Any) -> Any:
    if isinstance(value, str) and value.startswith("$"):
        kind, _, label = value[1:].partition(":")
        if kind == "addr":
            return sim.nodes[label].address.text
        ref = sim.context.get(f"{kind}:{label}")
        if ref is None:
            raise BladeError(f"unresolved reference {value!r}")
        return ref
    if isinstance(value, dict):
        return {k: _resolve(sim, v) for k, v in value.items()}
    if isinstance(value, list):
        return [_resolve(sim, v) for v in value]
    return value


def _subset(expected: Any, actual: Any) -> bool:
    if isinstance(expected, dict):
        if not isinstance(actual, dict):
            return False
        return all(k in actual and _subset(v, actual[k]) for k, v in expected.items())
    if isinstance(expected, list):
        if not isinstance(actual, list):
            return False
        return all(any(_subset(item, got) for got in actual) for item in expected)
    return expected == actual


def _check_expect(sim: SimNetwork, expect: Optional[dict], outcome: Any, error):
    """Returns an error string or None."""
    expect = expect or {}
    expected_code = expect.get("error")
    if error is not None:
        code = getattr(error, "code", type(error).__name__)
        if expected_code == code:
            return None
        return f"raised {code}: {error}"
    if expected_code is not None:
        return f"expected error {expected_code}, got success"
    if "contains" in expect and not _subset(_resolve(sim, expect["contains"]), outcome):
        return f"result {outcome!r} does not contain {expect['contains']!r}"
    if "equals" in expect and _resolve(sim, expect["equals"]) != outcome:
        return f"result {outcome!r} != {expect['equals']!r}"
    if "length" in expect:
        if not hasattr(outcome, "__len__") or len(outcome) != expect["length"]:
            return f"result length is not {expect['length']}"
    if "gas_total" in expect and sim.registry.gas.total != expect["gas_total"]:
        return (
            f"gas total {sim.registry.gas.total} != expected {expect['gas_total']}"
        )
    return None


# ----------------------------------------------------------------------
# Actions
# ----------------------------------------------------------------------

ACTIONS: dict[str, Callable[[SimNetwork, SimNode, dict], Any]] = {}


def action(name: str):
    def decorate(fn):
        ACTIONS[name] = fn
        return fn

    return decorate


@action("register")
def _register(sim, actor, params):
    record = actor.node.register(params["name"])
    return record.to_dict()


@action("assert_registration")
def _assert_registration(sim, actor, params):
    record = sim.registry.resolve_name(params["name"])
    if record.address != actor.node.address:
        raise BladeError(f"{params['name']} does not resolve to {actor.name}")
    if record.url != actor.node.config.public_url:
        raise BladeError(
            f"registry url {record.url} != node url {actor.node.config.public_url}"
        )
    return record.to_dict()


@action("resolve_name")
def _resolve_name(sim, actor, params):
    return sim.registry.resolve_name(params["name"]).to_dict()


@action("search_names")
def _search_names(sim, actor, params):
    hits = sim.registry.search_names(params.get("prefix", ""))
    return {"names": [r.name for r in hits]}


@action("connect")
def _connect(sim, actor, params):
    entry = actor.node.send_connection_request(
        params["target"], params.get("message")
    )
    return entry.to_dict()


@action("respond")
def _respond(sim, actor, params):
    entry = actor.node.respond_connection_request(
        params["requester"], params["decision"]
    )
    return entry.to_dict()


@action("contacts")
def _contacts(sim, actor, params):
    return [e.to_dict() for e in actor.node.contacts.list(params.get("status"))]


@action("acl_add")
def _acl_add(sim, actor, params):
    rule = AclRule(
        subject=params.get("subject", "*"),
        api_id=params.get("api_id", "*"),
        path_pattern=params.get("path_pattern", "*"),
        action=params.get("action", "read"),
        effect=params.get("effect", "allow"),
        priority=params.get("priority", 100),
        item_id=params.get("item_id"),
    )
    return actor.node.acl.add_rule(rule).to_dict()


@action("profile_get")
def _profile_get(sim, actor, params):
    record = actor.node.resolve_target(params["target"])
    verified = actor.node._send(record, "GET", "/base/profile", None)
    return verified.data


@action("interfaces")
def _interfaces(sim, actor, params):
    if "target" in params:
        return actor.node.fetch_interfaces(params["target"], fresh=params.get("fresh", False))
    return actor.node.interface_list()


@action("negotiate")
def _negotiate(sim, actor, params):
    common = actor.node.negotiate(params["target"], set(params.get("apis", [])))
    return {"common": sorted(common)}


@action("create_org")
def _create_org(sim, actor, params):
    label = params.get("label", "org")
    org_key = _seeded_key(sim.seed, f"org/{label}", "id")
    sim.registry.apply_tx(
        make_tx(
            "create_organization",
            {"org_id": org_key.address},
            actor.node.identity_key.private_key,
        )
    )
    sim.context[f"org:{label}"] = org_key.address.text
    return {"org_id": org_key.address.text}


@action("register_api")
def _register_api(sim, actor, params):
    label = params.get("label", params["name"])
    org_id = Address.parse(_resolve(sim, params.get("org", "$org:org")))
    api_key = _seeded_key(sim.seed, f"api/{label}", "id")
    sim.registry.apply_tx(
        make_tx(
            "register_api",
            {
                "api_id": api_key.address,
                "org_id": org_id,
                "name": params["name"],
                "version": params.get("version", "1.0.0"),
                "spec_uri": params.get(
                    "spec_uri", f"http://specs.simnet/{params['name']}"
                ),
            },
            actor.node.identity_key.private_key,
        )
    )
    sim.context[f"api:{label}"] = api_key.address.text
    return {"api_id": api_key.address.text}


@action("publish_module")
def _publish_module(sim, actor, params):
    """Build a package for a bundled entrypoint, host it, register it."""
    label = params.get("label", params["name"])
    org_id = Address.parse(_resolve(sim, params.get("org", "$org:org")))
    api_ids = tuple(
        Address.parse(_resolve(sim, f"$api:{api_label}"))
        for api_label in params.get("apis", [])
    )
    module_key = _seeded_key(sim.seed, f"module/{label}", "id")
    manifest = ModuleManifest(
        module_id=module_key.address,
        name=params["name"],
        version=params.get("version", "1.0.0"),
        api_ids=api_ids,
        entrypoint=params.get("entrypoint", CONTACT_ENTRYPOINT),
    )
    archive = build_package(manifest)
    package_uri = f"http://packages.simnet/{label}-{manifest.version}.bpk"
    if sim.hub is not None:
        sim.hub.host_package(package_uri, archive)
        sim.context[f"package:{label}"] = package_uri
    else:
        import tempfile

        handle = tempfile.NamedTemporaryFile(
            suffix=".bpk", delete=False, prefix=f"{label}-"
        )
        handle.write(archive)
        handle.close()
        sim.context[f"package:{label}"] = handle.name
    sim.registry.apply_tx(
        make_tx(
            "register_module",
            {
                "module_id": module_key.address,
                "org_id": org_id,
                "name": params["name"],
                "version": manifest.version,
                "package_uri": package_uri,
                "package_hash": keccak256(archive),
                "api_ids": list(api_ids),
            },
            actor.node.identity_key.private_key,
        )
    )
    sim.context[f"module:{label}"] = module_key.address.text
    return {
        "module_id": module_key.address.text,
        "package_uri": package_uri,
        "package_hash": "0x" + keccak256(archive).hex(),
    }


@action("install_module")
def _install_module(sim, actor, params):
    module_ref = params["module"]
    module_id = Address.parse(
        _resolve(sim, module_ref if module_ref.startswith("$") else f"$module:{module_ref}")
        if not module_ref.startswith("0x")
        else module_ref
    )
    source = params.get("source")
    if source is None:
        label = module_ref.removeprefix("$module:")
        source = sim.context.get(f"package:{label}")
    installed = actor.node.host.install_package(source, module_id)
    return installed.to_dict()


@action("marketplace_search")
def _marketplace_search(sim, actor, params):
    api_ref = params.get("api_id")
    api_id = Address.parse(_resolve(sim, api_ref)) if api_ref else None
    return actor.node.host.search_marketplace(params.get("q", ""), api_id)


@action("module_lifecycle")
def _module_lifecycle(sim, actor, params):
    module_id = Address.parse(_resolve(sim, params["module_id"]))
    op = params["op"]
    if op == "start":
        return actor.node.host.start(module_id).to_dict()
    if op == "stop":
        return actor.node.host.stop(module_id).to_dict()
    if op == "uninstall":
        actor.node.host.uninstall(module_id, purge=params.get("purge", False))
        return {"uninstalled": module_id.text}
    raise BladeError(f"unknown lifecycle op {op!r}")


@action("dispatch")
def _dispatch(sim, actor, params):
    verified = actor.node.dispatch(
        params["target"],
        Address.parse(_resolve(sim, params["api_id"])),
        params.get("method", "GET"),
        params.get("path", "/"),
        params.get("data"),
    )
    return verified.data


@action("module_c2s")
def _module_c2s(sim, actor, params):
    api_id = _resolve(sim, params["api_id"])
    request = AdminRequest(
        method=params.get("method", "GET"),
        path=params.get("path", "/"),
        data=_resolve(sim, params.get("data")),
    )
    return actor.node.host.invoke_c2s(api_id, request)


@action("card_update")
def _card_update(sim, actor, params):
    return _module_c2s(
        sim,
        actor,
        {
            "api_id": params.get("api_id", "$api:contacts"),
            "method": "PUT",
            "path": "/card",
            "data": params.get("fields", {}),
        },
    )


@action("field_acl_set")
def _field_acl_set(sim, actor, params):
    return _module_c2s(
        sim,
        actor,
        {
            "api_id": params.get("api_id", "$api:contacts"),
            "method": "PUT",
            "path": "/field-acl",
            "data": params.get("rows", []),
        },
    )


@action("subscribe")
def _subscribe(sim, actor, params):
    target = Address.parse(_resolve(sim, params["target"]))
    return _module_c2s(
        sim,
        actor,
        {
            "api_id": params.get("api_id", "$api:contacts"),
            "method": "POST",
            "path": "/subscribe",
            "data": {"target": target.text},
        },
    )


@action("mirrors")
def _mirrors(sim, actor, params):
    return _module_c2s(
        sim,
        actor,
        {"api_id": params.get("api_id", "$api:contacts"), "path": "/mirrors"},
    )


@action("fault")
def _fault(sim, actor, params):
    changes = {
        k: params[k] for k in ("offline", "drop_percent", "delay_ms") if k in params
    }
    sim.set_fault(params.get("node", actor.name), **changes)
    return {"fault": changes}


@action("revive")
def _revive(sim, actor, params):
    sim.set_fault(params.get("node", actor.name), offline=False)
    return {"revived": params.get("node", actor.name)}


@action("wait")
def _wait(sim, actor, params):
    seconds = float(params.get("seconds", 1))
    if sim.hub is not None:
        sim.settle(until_offset=seconds)
    else:
        time.sleep(seconds)
        sim.settle()
    return {"waited": seconds}


@action("assert_gas")
def _assert_gas(sim, actor, params):
    expected = int(params["total"])
    if sim.registry.gas.total != expected:
        raise BladeError(
            f"gas total {sim.registry.gas.total} != expected {expected}"
        )
    return {"gas_total": sim.registry.gas.total}


@action("set_url")
def _set_url(sim, actor, params):
    return actor.node.update_public_url(params["url"]).to_dict()


# ----------------------------------------------------------------------
# Runner
# ----------------------------------------------------------------------


def run_scenario(
    scenario: Scenario,
    journal_path=None,
    raise_on_failure: bool = False,
) -> SimReport:
    """Execute every step on a fresh network; settle after each one."""
    started = time.perf_counter()
    sim = SimNetwork(
        seed=scenario.seed,
        transport=scenario.transport,
        journal_path=journal_path,
    )
    report = SimReport(
        scenario=scenario.name, seed=scenario.seed, transport=scenario.transport
    )
    try:
        for name in scenario.nodes:
            sim.spawn(name)
        for index, step in enumerate(scenario.steps):
            actor = sim.nodes.get(step.actor)
            if actor is None:
                raise StepFailed(index, f"unknown actor {step.actor!r}")
            outcome, error = None, None
            try:
                handler = ACTIONS.get(step.action)
                if handler is None:
                    raise BladeError(f"unknown action {step.action!r}")
                outcome = handler(sim, actor, _resolve(sim, step.params))
            except BladeError as exc:
                error = exc
            sim.settle()
            problem = _check_expect(sim, step.expect, outcome, error)
            result = StepResult(
                index=index,
                actor=step.actor,
                action=step.action,
                ok=problem is None,
                detail=outcome if error is None else error.to_wire(),
                error=problem,
            )
            report.steps.append(result)
            if problem is not None:
                if raise_on_failure:
                    raise StepFailed(index, problem)
                break
        report.passed = bool(report.steps) and all(s.ok for s in report.steps) and len(
            report.steps
        ) == len(scenario.steps)
        report.gas_total = sim.registry.gas.total
        report.message_count = sim.message_count()
    finally:
        report.wall_time_s = round(time.perf_counter() - started, 4)
        sim.close()
    return report


# ----------------------------------------------------------------------
# Built-in scenarios
# ----------------------------------------------------------------------


def uc1_register(seed: int = 0, transport: str = "inproc") -> Scenario:
    """Installation and registration: one user brings a node online."""
    return Scenario(
        name="uc1_register",
        seed=seed,
        transport=transport,
        nodes=["alice"],
        steps=[
            Step("alice", "register", {"name": "alice"},
                 {"contains": {"name": "alice"}}),
            Step("alice", "assert_registration", {"name": "alice"}),
            Step("alice", "assert_gas", {"total": 144_406},
                 {"gas_total": 144_406}),
        ],
    )


def uc2_contacts(seed: int = 0, transport: str = "inproc") -> Scenario:
    """Contact management: search, connection request, accept, ACLs."""
    return Scenario(
        name="uc2_contacts",
        seed=seed,
        transport=transport,
        nodes=["alice", "bob"],
        steps=[
            Step("alice", "register", {"name": "alice"}),
            Step("bob", "register", {"name": "bob"}),
            Step("alice", "search_names", {"prefix": "bo"},
                 {"contains": {"names": ["bob"]}}),
            Step("alice", "connect",
                 {"target": "bob", "message": "hi, it's alice"},
                 {"contains": {"status": "pending_out"}}),
            Step("bob", "contacts", {"status": "pending_in"}, {"length": 1}),
            Step("bob", "respond", {"requester": "$addr:alice", "decision": "accept"},
                 {"contains": {"status": "accepted"}}),
            Step("alice", "contacts", {"status": "accepted"}, {"length": 1}),
            Step("bob", "contacts", {"status": "accepted"}, {"length": 1}),
            Step("alice", "acl_add",
                 {"subject": "contacts", "api_id": "base",
                  "path_pattern": "/profile", "action": "read", "effect": "allow"}),
            Step("bob", "acl_add",
                 {"subject": "contacts", "api_id": "base",
                  "path_pattern": "/profile", "action": "read", "effect": "allow"}),
            Step("alice", "profile_get", {"target": "bob"},
                 {"contains": {"name": "bob"}}),
            Step("bob", "profile_get", {"target": "alice"},
                 {"contains": {"name": "alice"}}),
        ],
    )


def uc3_communicate(seed: int = 0, transport: str = "inproc") -> Scenario:
    """Communication: the full negotiation flow, including the
    api-mismatch-then-install branch."""
    return Scenario(
        name="uc3_communicate",
        seed=seed,
        transport=transport,
        nodes=["alice", "bob", "charlie"],
        steps=[
            Step("alice", "register", {"name": "alice"}),
            Step("bob", "register", {"name": "bob"}),
            Step("charlie", "register", {"name": "charlie"}),
            # charlie publishes the contact module to the marketplace
            Step("charlie", "create_org", {"label": "org"}),
            Step("charlie", "register_api",
                 {"label": "contacts", "name": "contacts", "version": "1.0.0"}),
            Step("charlie", "publish_module",
                 {"label": "contactdb", "name": "contact-db",
                  "version": "1.0.0", "apis": ["contacts"]}),
            # alice runs the module; bob does not (yet)
            Step("alice", "install_module", {"module": "contactdb"},
                 {"contains": {"state": "running"}}),
            # contacts + acl so the later exchange is permitted
            Step("alice", "connect", {"target": "bob"}),
            Step("bob", "respond",
                 {"requester": "$addr:alice", "decision": "accept"}),
            Step("bob", "acl_add",
                 {"subject": "contacts", "api_id": "$api:contacts",
                  "path_pattern": "*", "action": "read", "effect": "allow"}),
            Step("bob", "acl_add",
                 {"subject": "contacts", "api_id": "$api:contacts",
                  "path_pattern": "*", "action": "write", "effect": "allow",
                  "priority": 101}),
            # the mismatch branch: bob does not serve the api yet
            Step("alice", "dispatch",
                 {"target": "bob", "api_id": "$api:contacts",
                  "method": "GET", "path": "/card"},
                 {"error": "ApiMismatch"}),
            # marketplace lookup by api id finds a compatible module
            Step("alice", "marketplace_search", {"api_id": "$api:contacts"},
                 {"length": 1}),
            Step("bob", "install_module", {"module": "contactdb"},
                 {"contains": {"state": "running"}}),
            Step("bob", "card_update", {"fields": {"display_name": "Bob"}}),
            Step("bob", "field_acl_set",
                 {"rows": [["contacts", "display_name", "allow"]]}),
            # retry now succeeds end to end
            Step("alice", "dispatch",
                 {"target": "bob", "api_id": "$api:contacts",
                  "method": "GET", "path": "/card"},
                 {"contains": {"fields": {"display_name": "Bob"}, "revision": 1}}),
        ],
    )


def uc4_publish(seed: int = 0, transport: str = "inproc") -> Scenario:
    """Module development: org + api + module registration, then an install
    on another user's node."""
    return Scenario(
        name="uc4_publish",
        seed=seed,
        transport=transport,
        nodes=["charlie", "dana"],
        steps=[
            Step("charlie", "register", {"name": "charlie"}),
            Step("dana", "register", {"name": "dana"}),
            Step("charlie", "create_org", {"label": "org"}),
            Step("charlie", "register_api",
                 {"label": "contacts", "name": "contacts", "version": "1.0.0"}),
            Step("charlie", "publish_module",
                 {"label": "contactdb", "name": "contact-db",
                  "version": "1.0.0", "apis": ["contacts"]}),
            Step("dana", "marketplace_search", {"q": "contact"}, {"length": 1}),
            Step("dana", "install_module", {"module": "contactdb"},
                 {"contains": {"state": "running"}}),
            Step("dana", "interfaces", {},
                 {"contains": [{"api_id": "$api:contacts"}]}),
            # 2 * createIdentity + createOrganization; marketplace writes are unmetered
            Step("charlie", "assert_gas", {"total": 2 * 144_406 + 120_779}),
        ],
    )


BUILTIN_SCENARIOS: dict[str, Callable[..., Scenario]] = {
    "uc1_register": uc1_register,
    "uc2_contacts": uc2_contacts,
    "uc3_communicate": uc3_communicate,
    "uc4_publish": uc4_publish,
}
