"""Deterministic multi-node simulation harness and scenario runner."""

from blade.simnet.harness import PortUnavailable, SimNetwork, SimNode, spawn_network
from blade.simnet.hub import InprocHub, NodeFault, UnsupportedInHttpMode
from blade.simnet.scenarios import (
    BUILTIN_SCENARIOS,
    Scenario,
    SimReport,
    Step,
    StepFailed,
    StepResult,
    run_scenario,
    uc1_register,
    uc2_contacts,
    uc3_communicate,
    uc4_publish,
)

__all__ = [
    "BUILTIN_SCENARIOS",
    "InprocHub",
    "NodeFault",
    "PortUnavailable",
    "Scenario",
    "SimNetwork",
    "SimNode",
    "SimReport",
    "Step",
    "StepFailed",
    "StepResult",
    "UnsupportedInHttpMode",
    "run_scenario",
    "spawn_network",
    "uc1_register",
    "uc2_contacts",
    "uc3_communicate",
    "uc4_publish",
]
