#!/usr/bin/env python3
"""Build a small calendar-scheduling dataset, capture fixtures for it, and
score a replayed evaluation with the deterministic interval oracle.

    python demos/calendar_eval_demo.py
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from planexec.gateway import FixtureStore, ReplayGateway  # noqa: E402
from planexec.runner import eval_dataset  # noqa: E402
from planexec.scheduling import generate_dataset, parse_instance  # noqa: E402
from planexec.staging import RunConfig  # noqa: E402

from tests.helpers import author_eval_fixtures  # noqa: E402


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="calendar-demo-"))
    dataset = workdir / "dataset"
    generate_dataset(dataset, count=5, seed=3)
    print(f"dataset: {dataset}")
    sample = sorted(dataset.iterdir())[0]
    print("\nfirst instance:")
    print(sample.joinpath("instance.txt").read_text())
    spec = parse_instance(sample.joinpath("instance.txt").read_text())
    print(f"parsed: {len(spec.participants)} participants, "
          f"{spec.duration} minutes on {spec.day}")

    fixtures = workdir / "fixtures.jsonl"
    author_eval_fixtures(dataset, fixtures)
    print(f"\nfixtures captured: {fixtures}")

    gateway = ReplayGateway(FixtureStore.load(fixtures))
    report = eval_dataset(dataset, "oracle", gateway=gateway, config=RunConfig())
    print("\nreplayed evaluation:")
    for row in report["instances"]:
        print(f"  {row['id']}: {row['verdict']}  answer={row['answer']!r}")
    print(f"oracle accuracy: {report['correct']}/{report['count']}")


if __name__ == "__main__":
    main()
