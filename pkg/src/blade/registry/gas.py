"""Fixed-cost gas accounting for registry mutations.

Each metered operation has a constant cost in gas units; reads are free.
Marketplace registration ops have no published cost and are modeled as
unmetered (cost 0).  Failed transactions charge nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

GAS_COSTS: dict[str, int] = {
    "create_identity": 144_406,
    "set_url": 33_101,
    "set_delegate": 55_481,
    "create_organization": 120_779,
    "add_org_member": 48_810,
    "remove_org_member": 26_888,
    "change_org_owner": 30_221,
}

UNMETERED_OPS = frozenset({"register_api", "register_module", "update_module"})


def cost_of(op: str) -> int:
    if op in GAS_COSTS:
        return GAS_COSTS[op]
    if op in UNMETERED_OPS:
        return 0
    raise KeyError(f"unknown registry operation {op!r}")


@dataclass
class GasLedger:
    """Per-transaction cost entries plus a running total."""

    entries: list[tuple[str, int]] = field(default_factory=list)
    total: int = 0

    def charge(self, op: str) -> int:
        cost = cost_of(op)
        self.entries.append((op, cost))
        self.total += cost
        return cost
