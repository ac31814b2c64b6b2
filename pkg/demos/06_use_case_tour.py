"""Run all four built-in scenarios and print their reports.

Equivalent to:

    blade-sim run uc1_register && blade-sim run uc2_contacts && ...

Pass --transport http on the CLI to run the same flows over real loopback
HTTP servers instead of the in-process fabric.
"""

from blade.simnet import BUILTIN_SCENARIOS, run_scenario

for name, factory in sorted(BUILTIN_SCENARIOS.items()):
    report = run_scenario(factory(seed=7))
    status = "PASS" if report.passed else "FAIL"
    print(
        f"{name:18s} {status}  steps={len(report.steps):2d} "
        f"gas={report.gas_total:>9,}  messages={report.message_count:3d}  "
        f"wall={report.wall_time_s:.3f}s"
    )
    for step in report.steps:
        if not step.ok:
            print(f"   step {step.index} {step.action}: {step.error}")
