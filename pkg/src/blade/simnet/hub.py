"""In-process message fabric for deterministic multi-node runs.

Implements the Transport interface by direct function calls into the target
node's handler, with per-node fault injection (offline, probabilistic drop,
fixed delay) driven by a seeded RNG and a virtual clock, plus hosting for
package bytes addressed by URL.

Determinism: delivery is synchronous on the caller's stack; post-response
work (deferred pushes, due retries) runs only inside settle(), which walks
nodes in attach order until the whole fabric is idle.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from blade.clock import VirtualClock
from blade.errors import BladeError, DispatchFailed


class UnsupportedInHttpMode(BladeError):
    """Fault injection needs the in-process fabric."""


@dataclass
class NodeFault:
    offline: bool = False
    drop_percent: float = 0.0
    delay_ms: float = 0.0


class InprocHub:
    def __init__(self, clock: VirtualClock, seed: int):
        self.clock = clock
        self._nodes: list = []  # (base_url, node) in attach order
        self._by_url: dict[str, object] = {}
        self._faults: dict[str, NodeFault] = {}  # node address text -> fault
        self._packages: dict[str, bytes] = {}
        self._rng = random.Random(seed ^ 0x9E3779B9)
        self.messages_sent = 0

    # ------------------------------------------------------------------
    # Topology
    # ------------------------------------------------------------------

    def attach(self, base_url: str, node) -> None:
        key = base_url.rstrip("/")
        self._by_url[key] = node
        if node not in self._nodes:
            self._nodes.append(node)

    def detach(self, base_url: str) -> None:
        """Unbind a URL (the node itself keeps running; models a move)."""
        self._by_url.pop(base_url.rstrip("/"), None)

    def set_fault(self, node, **changes) -> NodeFault:
        fault = self._faults.setdefault(node.address.text, NodeFault())
        for name, value in changes.items():
            if not hasattr(fault, name):
                raise BladeError(f"unknown fault field {name!r}")
            setattr(fault, name, value)
        return fault

    def clear_fault(self, node) -> None:
        self._faults.pop(node.address.text, None)

    # ------------------------------------------------------------------
    # Transport interface
    # ------------------------------------------------------------------

    def send(self, base_url, method, path, headers, body):
        node = self._by_url.get(base_url.rstrip("/"))
        if node is None:
            raise DispatchFailed(f"no node at {base_url}")
        fault = self._faults.get(node.address.text)
        if fault is not None:
            if fault.offline:
                raise DispatchFailed(f"{base_url} is offline")
            if fault.drop_percent and self._rng.random() * 100 < fault.drop_percent:
                raise DispatchFailed(f"message to {base_url} dropped")
            if fault.delay_ms:
                self.clock.advance(fault.delay_ms / 1000.0)
        self.messages_sent += 1
        return node.handle_request(method, path, headers, body)

    def fetch(self, url: str) -> bytes:
        data = self._packages.get(url)
        if data is None:
            raise DispatchFailed(f"nothing hosted at {url}")
        return bytes(data)

    def host_package(self, url: str, data: bytes) -> None:
        self._packages[url] = bytes(data)

    # ------------------------------------------------------------------
    # Scheduling
    # ------------------------------------------------------------------

    def settle(self, until: float | None = None, max_steps: int = 100_000) -> int:
        """Run deferred tasks and due retries until the fabric is idle.

        When ``until`` is given, virtual time is advanced stepwise to retry
        due times up to that bound; otherwise no time passes and
        not-yet-due retries stay queued."""
        steps = 0
        while steps < max_steps:
            progressed = 0
            for node in self._nodes:
                progressed += node.drain_deferred()
                progressed += node.pump_retries()
            if progressed:
                steps += progressed
                continue
            dues = [d for d in (n.pending_work() for n in self._nodes) if d is not None]
            if not dues:
                break
            target = min(dues)
            if until is None or target > until:
                break
            if target > self.clock.now():
                self.clock.set(target)
            steps += 1
        return steps
