#!/usr/bin/env python3
"""Author the replay fixture files for the keyword demonstration scenarios.

Runs each scenario once in record mode against the scripted responder and
writes tests/data/goldens/<id>.jsonl. Re-run after any change that affects
rendered prompts or request composition, then commit the refreshed files.
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from planexec.gateway import FixtureStore, RecordingGateway  # noqa: E402
from planexec.runner import execute_run  # noqa: E402
from planexec.staging import RunConfig  # noqa: E402
from planexec.testing import ScriptedGateway  # noqa: E402

from tests.golden import SCENARIOS  # noqa: E402
from tests.helpers import echo_handler  # noqa: E402


def author(scenario, outdir: Path) -> None:
    path = outdir / f"{scenario.id}.jsonl"
    if path.exists():
        path.unlink()
    store = FixtureStore.load(path)
    scripted = ScriptedGateway(
        script={k: list(v) for k, v in scenario.script.items()},
        handler=echo_handler,
    )
    gateway = RecordingGateway(scripted, store)
    engine = execute_run(
        scenario.task,
        scenario.instance,
        scenario.plan,
        gateway=gateway,
        config=RunConfig(),
    )
    outputs = tuple(entry.output for entry in engine.ctx.result_log)
    if outputs != scenario.expected_outputs:
        raise SystemExit(
            f"{scenario.id}: outputs diverge from the expected log:\n"
            f"  got:      {outputs!r}\n  expected: {scenario.expected_outputs!r}"
        )
    print(f"{scenario.id}: {len(store.entries)} fixtures -> {path}")


def main() -> None:
    outdir = ROOT / "tests" / "data" / "goldens"
    outdir.mkdir(parents=True, exist_ok=True)
    for scenario in SCENARIOS:
        author(scenario, outdir)


if __name__ == "__main__":
    main()
