#!/usr/bin/env python3
"""Replay the four keyword demonstration plans from checked-in fixtures.

Shows GOTO jumps, true/false IF branches, and FORALL expansion end to end
without any live backend. Run from the repository root:

    python demos/replay_keyword_demos.py
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from planexec.gateway import FixtureStore, ReplayGateway  # noqa: E402
from planexec.runner import execute_run, render_trace  # noqa: E402
from planexec.staging import RunConfig  # noqa: E402

from tests.golden import SCENARIOS  # noqa: E402

GOLDENS = ROOT / "tests" / "data" / "goldens"


def main() -> None:
    for scenario in SCENARIOS:
        print(f"\n=== {scenario.id} " + "=" * (40 - len(scenario.id)))
        print("plan:")
        for line in scenario.plan.strip().splitlines():
            print(f"  {line}")
        gateway = ReplayGateway(FixtureStore.load(GOLDENS / f"{scenario.id}.jsonl"))
        engine = execute_run(
            scenario.task,
            scenario.instance,
            scenario.plan,
            gateway=gateway,
            config=RunConfig(),
        )
        print("result log outputs:")
        for entry in engine.ctx.result_log:
            shown = entry.output if entry.output is not None else "(skipped)"
            if len(shown) > 96:
                shown = shown[:93] + "..."
            print(f"  step {entry.step_number}: {shown}")
        print("trace:")
        for line in render_trace(engine).strip().splitlines():
            print(f"  {line}")


if __name__ == "__main__":
    main()
