"""Optional live smoke run: 10 generated calendar instances end to end.

Needs a reachable chat-completions backend; configure and opt in with:

    export LLM_BASE_URL=https://api.example.com/v1
    export LLM_MODEL=some-model
    export LLM_API_KEY=...
    pytest tests/test_live_smoke.py -s

The reported oracle validity rate is informational (model-dependent);
the test only requires the sweep to complete.
"""

from __future__ import annotations

import os

import pytest

from planexec.gateway import HttpBackend
from planexec.runner import eval_dataset
from planexec.scheduling import generate_dataset
from planexec.staging import RunConfig

pytestmark = pytest.mark.skipif(
    not (os.environ.get("LLM_BASE_URL") and os.environ.get("LLM_MODEL")),
    reason="live backend not configured (LLM_BASE_URL / LLM_MODEL)",
)


def test_live_calendar_smoke(tmp_path):
    dataset = tmp_path / "dataset"
    generate_dataset(dataset, count=10, seed=99)
    gateway = HttpBackend(
        base_url=os.environ["LLM_BASE_URL"],
        model=os.environ["LLM_MODEL"],
    )
    report = eval_dataset(dataset, "oracle", gateway=gateway, config=RunConfig())
    assert report["count"] == 10
    print(
        f"\nlive smoke: oracle validity {report['correct']}/10 "
        f"({report['accuracy']:.0%})"
    )
