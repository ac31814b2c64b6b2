"""blade-sim: run built-in or file-based scenarios.

    blade-sim run uc2_contacts --seed 7 --transport inproc --report out.json
    blade-sim run my-scenario.json
    blade-sim list

Exit code 0 iff every step assertion passed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from blade.simnet.scenarios import BUILTIN_SCENARIOS, Scenario, run_scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blade-sim", description="Deterministic multi-node scenario runner."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a built-in scenario or a JSON file")
    run.add_argument("scenario", help="built-in name or path to a .json scenario")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument(
        "--transport", choices=("inproc", "http"), default=None,
        help="override the scenario's transport",
    )
    run.add_argument("--report", metavar="OUT.json", help="write the report as JSON")
    run.add_argument("--journal", metavar="PATH", help="persist the registry journal")

    commands.add_parser("list", help="list built-in scenarios")
    return parser


def _load_scenario(ref: str, seed: int, transport: str | None) -> Scenario:
    if ref in BUILTIN_SCENARIOS:
        scenario = BUILTIN_SCENARIOS[ref](seed=seed, transport=transport or "inproc")
        return scenario
    path = Path(ref)
    if not path.exists():
        known = ", ".join(sorted(BUILTIN_SCENARIOS))
        raise SystemExit(f"no scenario {ref!r} (built-ins: {known})")
    scenario = Scenario.from_file(path)
    scenario.seed = seed if seed else scenario.seed
    if transport:
        scenario.transport = transport
    return scenario


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "list":
        for name, factory in sorted(BUILTIN_SCENARIOS.items()):
            doc = (factory.__doc__ or "").strip().splitlines()[0]
            print(f"{name:20s} {doc}")
        return 0

    scenario = _load_scenario(args.scenario, args.seed, args.transport)
    report = run_scenario(scenario, journal_path=args.journal)

    for step in report.steps:
        mark = "ok " if step.ok else "FAIL"
        line = f"[{mark}] step {step.index:2d} {step.actor:>8s} {step.action}"
        if step.error:
            line += f"  <- {step.error}"
        print(line)
    print(
        f"scenario {report.scenario}: "
        f"{'PASS' if report.passed else 'FAIL'} "
        f"(gas={report.gas_total}, messages={report.message_count}, "
        f"wall={report.wall_time_s}s)"
    )
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
