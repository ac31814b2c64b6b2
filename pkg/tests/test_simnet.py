"""Harness determinism, fault injection, scenario files, and the CLI."""

import json

import pytest

from blade.registry import Registry
from blade.simnet import (
    BUILTIN_SCENARIOS,
    Scenario,
    SimNetwork,
    Step,
    UnsupportedInHttpMode,
    run_scenario,
    spawn_network,
    uc1_register,
    uc2_contacts,
)
from blade.simnet.cli import main as sim_main


# ----------------------------------------------------------------------
# spawn_network
# ----------------------------------------------------------------------


def test_spawn_network_basic():
    sim = spawn_network(2, seed=5)
    assert len(sim.nodes) == 2
    assert sim.registry.events(0) == []
    assert sim["node0"].address != sim["node1"].address
    sim.close()


def test_spawn_network_seeded_addresses_reproducible():
    a = spawn_network(3, seed=9)
    b = spawn_network(3, seed=9)
    c = spawn_network(3, seed=10)
    try:
        assert [n.address for n in a.nodes.values()] == [
            n.address for n in b.nodes.values()
        ]
        assert [n.address for n in a.nodes.values()] != [
            n.address for n in c.nodes.values()
        ]
    finally:
        a.close()
        b.close()
        c.close()


def test_spawn_network_rejects_zero_nodes():
    with pytest.raises(ValueError):
        spawn_network(0)


# ----------------------------------------------------------------------
# built-in scenarios
# ----------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(BUILTIN_SCENARIOS))
def test_builtin_scenarios_pass(name):
    report = run_scenario(BUILTIN_SCENARIOS[name](seed=3))
    failures = [s for s in report.steps if not s.ok]
    assert report.passed, failures
    assert report.gas_total == report.gas_total  # present
    assert report.message_count >= 0
    assert report.wall_time_s >= 0


def test_report_shape():
    report = run_scenario(uc1_register(seed=4))
    raw = report.to_dict()
    assert raw["scenario"] == "uc1_register"
    assert raw["passed"] is True
    assert raw["gas_total"] == 144_406
    assert all(
        {"index", "actor", "action", "ok"} <= set(step) for step in raw["steps"]
    )


def test_failing_step_recorded_and_rest_skipped():
    scenario = Scenario(
        name="fails",
        nodes=["a"],
        steps=[
            Step("a", "register", {"name": "a-user"}),
            Step("a", "assert_gas", {"total": 1}),  # wrong on purpose
            Step("a", "register", {"name": "never-reached"}),
        ],
    )
    report = run_scenario(scenario)
    assert not report.passed
    assert len(report.steps) == 2
    assert report.steps[1].ok is False


def test_expected_error_counts_as_pass():
    scenario = Scenario(
        name="expected-error",
        nodes=["a"],
        steps=[
            Step("a", "resolve_name", {"name": "ghost"}, {"error": "NotFound"}),
        ],
    )
    report = run_scenario(scenario)
    assert report.passed


# ----------------------------------------------------------------------
# determinism
# ----------------------------------------------------------------------


def test_equal_seeds_equal_journals(tmp_path):
    j1, j2, j3 = (tmp_path / f"j{i}.jsonl" for i in range(3))
    run_scenario(uc2_contacts(seed=77), journal_path=j1)
    run_scenario(uc2_contacts(seed=77), journal_path=j2)
    run_scenario(uc2_contacts(seed=78), journal_path=j3)
    assert j1.read_bytes() == j2.read_bytes()
    assert j1.read_bytes() != j3.read_bytes()


def test_journal_replays_into_equal_state(tmp_path):
    journal = tmp_path / "journal.jsonl"
    run_scenario(uc2_contacts(seed=12), journal_path=journal)
    replayed = Registry(journal)
    assert replayed.gas.total == 2 * 144_406
    assert replayed.resolve_name("alice").name == "alice"
    replayed.close()


# ----------------------------------------------------------------------
# fault injection
# ----------------------------------------------------------------------


def test_drop_percent_zero_is_no_fault():
    sim = spawn_network(2, seed=8)
    sim["node0"].node.register("node-zero")
    sim["node1"].node.register("node-one")
    sim.set_fault("node1", drop_percent=0)
    entry = sim["node0"].node.send_connection_request("node-one")
    sim.settle()
    assert not entry.retry_pending or not sim["node0"].node.contacts.get(
        sim["node1"].address
    ).retry_pending
    assert sim["node1"].node.contacts.get(sim["node0"].address) is not None
    sim.close()


def test_delay_only_still_delivers():
    sim = spawn_network(2, seed=8)
    sim["node0"].node.register("node-zero")
    sim["node1"].node.register("node-one")
    sim.set_fault("node1", delay_ms=2000)
    sim["node0"].node.send_connection_request("node-one")
    sim.settle(until_offset=60)
    assert sim["node1"].node.contacts.get(sim["node0"].address) is not None
    sim.close()


def test_drop_percent_full_blocks_until_cleared():
    sim = spawn_network(2, seed=8)
    sim["node0"].node.register("node-zero")
    sim["node1"].node.register("node-one")
    sim.set_fault("node1", drop_percent=100)
    entry = sim["node0"].node.send_connection_request("node-one")
    assert entry.retry_pending
    assert sim["node1"].node.contacts.get(sim["node0"].address) is None
    sim.set_fault("node1", drop_percent=0)
    sim.settle(until_offset=30)
    assert sim["node1"].node.contacts.get(sim["node0"].address) is not None
    sim.close()


def test_fault_injection_requires_inproc():
    sim = SimNetwork(seed=8, transport="http")
    sim.spawn("a")
    with pytest.raises(UnsupportedInHttpMode):
        sim.set_fault("a", offline=True)
    sim.close()


# ----------------------------------------------------------------------
# scenario files and the CLI
# ----------------------------------------------------------------------


def test_scenario_file_roundtrip(tmp_path):
    scenario_file = tmp_path / "two-users.json"
    scenario_file.write_text(
        json.dumps(
            {
                "name": "two-users",
                "seed": 5,
                "transport": "inproc",
                "nodes": ["x", "y"],
                "steps": [
                    {"actor": "x", "action": "register", "params": {"name": "xavier"}},
                    {"actor": "y", "action": "register", "params": {"name": "yvonne"}},
                    {
                        "actor": "x",
                        "action": "connect",
                        "params": {"target": "yvonne"},
                        "expect": {"contains": {"status": "pending_out"}},
                    },
                    {
                        "actor": "y",
                        "action": "respond",
                        "params": {"requester": "$addr:x", "decision": "accept"},
                        "expect": {"contains": {"status": "accepted"}},
                    },
                    {"actor": "x", "action": "assert_gas", "params": {"total": 288812}},
                ],
            }
        )
    )
    scenario = Scenario.from_file(scenario_file)
    report = run_scenario(scenario)
    assert report.passed, [s for s in report.steps if not s.ok]


def test_cli_run_builtin_and_report(tmp_path, capsys):
    report_path = tmp_path / "report.json"
    code = sim_main(
        ["run", "uc1_register", "--seed", "6", "--report", str(report_path)]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert "PASS" in printed
    raw = json.loads(report_path.read_text())
    assert raw["passed"] is True and raw["gas_total"] == 144_406


def test_cli_exit_code_on_failure(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(
        json.dumps(
            {
                "name": "bad",
                "nodes": ["a"],
                "steps": [
                    {"actor": "a", "action": "assert_gas", "params": {"total": 999}}
                ],
            }
        )
    )
    assert sim_main(["run", str(bad)]) == 1


def test_cli_list(capsys):
    assert sim_main(["list"]) == 0
    out = capsys.readouterr().out
    for name in BUILTIN_SCENARIOS:
        assert name in out


def test_cli_unknown_scenario():
    with pytest.raises(SystemExit):
        sim_main(["run", "no_such_scenario"])
