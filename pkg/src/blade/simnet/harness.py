"""Multi-node network harness: N nodes sharing one registry.

Two fabrics:

- ``inproc``: virtual clock, synchronous in-process delivery, seeded node
  keys, deterministic end to end (equal seeds reproduce byte-identical
  registry journals).
- ``http``: every node runs a real HTTP server on a loopback ephemeral
  port; the registry stays shared in-process (it models the globally
  consistent chain).  Real concurrency, so determinism is not claimed.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass
from typing import Optional

from blade.clock import SystemClock, VirtualClock
from blade.crypto import generate_keypair
from blade.errors import BladeError
from blade.registry import Registry
from blade.server.config import NodeConfig
from blade.server.httpd import NodeHTTPServer
from blade.server.node import BladeNode
from blade.simnet.hub import InprocHub, UnsupportedInHttpMode
from blade.transport import HttpTransport

TRANSPORTS = ("inproc", "http")


class PortUnavailable(BladeError):
    pass


def _seeded_key(seed: int, name: str, role: str):
    material = hashlib.sha256(f"simnet/{seed}/{name}/{role}".encode()).digest()
    return generate_keypair(material)


@dataclass
class SimNode:
    name: str
    node: BladeNode
    http_server: Optional[NodeHTTPServer] = None

    @property
    def address(self):
        return self.node.address


class SimNetwork:
    def __init__(
        self,
        seed: int = 0,
        transport: str = "inproc",
        journal_path=None,
        clock_start: float = 1_700_000_000.0,
    ):
        if transport not in TRANSPORTS:
            raise BladeError(f"transport must be one of {TRANSPORTS}")
        self.seed = seed
        self.transport_kind = transport
        self.registry = Registry(journal_path)
        self.nodes: dict[str, SimNode] = {}
        self.context: dict = {}  # scenario-level shared references
        if transport == "inproc":
            self.clock = VirtualClock(clock_start)
            self.hub = InprocHub(self.clock, seed)
            self.transport = self.hub
        else:
            self.clock = SystemClock()
            self.hub = None
            self.transport = HttpTransport(timeout=10.0)

    # ------------------------------------------------------------------

    def spawn(self, name: str, admin_password: str = "simnet") -> SimNode:
        if name in self.nodes:
            raise BladeError(f"node {name!r} already exists")
        config = NodeConfig()
        config.set_admin_password(admin_password)
        node = BladeNode(
            config=config,
            registry=self.registry,
            transport=self.transport,
            clock=self.clock,
            identity_key=_seeded_key(self.seed, name, "identity"),
            delegate_key=_seeded_key(self.seed, name, "delegate"),
        )
        sim_node = SimNode(name=name, node=node)
        if self.transport_kind == "inproc":
            config.public_url = f"http://{name}.simnet"
            self.hub.attach(config.public_url, node)
        else:
            server = NodeHTTPServer(node)
            try:
                config.public_url = server.start()
            except OSError as exc:
                raise PortUnavailable(str(exc)) from exc
            sim_node.http_server = server
        self.nodes[name] = sim_node
        return sim_node

    def __getitem__(self, name: str) -> SimNode:
        return self.nodes[name]

    def message_count(self) -> int:
        if self.hub is not None:
            return self.hub.messages_sent
        return sum(n.node.stats["s2s_out"] for n in self.nodes.values())

    # ------------------------------------------------------------------

    def settle(self, until_offset: float | None = None, timeout: float = 10.0):
        """Let all queued work (pushes, retries) finish.

        inproc: drains deterministically, optionally advancing virtual time
        by ``until_offset`` seconds.  http: polls until every node is idle."""
        if self.hub is not None:
            until = (
                self.clock.now() + until_offset if until_offset is not None else None
            )
            self.hub.settle(until=until)
            if until is not None and self.clock.now() < until:
                self.clock.set(until)
            return
        deadline = time.time() + timeout + (until_offset or 0)
        while time.time() < deadline:
            if all(n.node.pending_work() is None for n in self.nodes.values()):
                return
            time.sleep(0.05)

    def set_fault(self, name: str, **changes):
        if self.hub is None:
            raise UnsupportedInHttpMode("fault injection requires inproc transport")
        return self.hub.set_fault(self.nodes[name].node, **changes)

    def close(self) -> None:
        for sim_node in self.nodes.values():
            if sim_node.http_server is not None:
                sim_node.http_server.stop()
        self.registry.close()


def spawn_network(
    n: int, seed: int = 0, transport: str = "inproc", journal_path=None
) -> SimNetwork:
    """N fresh nodes (named node0..node{n-1}) plus the shared registry.

    Nodes have deterministic seeded keys and are not yet registered."""
    if n < 1:
        raise ValueError("a network needs at least one node")
    network = SimNetwork(seed=seed, transport=transport, journal_path=journal_path)
    for index in range(n):
        network.spawn(f"node{index}")
    return network
