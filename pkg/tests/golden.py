"""The four keyword demonstration scenarios and their expected logs.

Inputs and expected outputs are frozen verbatim; the fixture files under
``tests/data/goldens`` are generated from these definitions by
``scripts/make_goldens.py`` and replayed by the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

STATUE_STORY = (
    "At dawn, the Statue of Liberty stands silent, her torch cutting "
    "through the gentle mist like a lighthouse guiding weary souls. "
    "Once a welcoming beacon for immigrants arriving by sea, her "
    "green copper face reflects the dreams of those seeking freedom. "
    "Emma, a young artist, sketches the statue, feeling the weight of "
    "history in every stroke. The air hums with stories of hope and "
    "resilience, whispered by the harbor breeze. As the sun rises, "
    "Lady Liberty's torch gleams brightly, a timeless emblem of "
    "courage and liberty shining over New York, inspiring all who "
    "behold her to embrace new beginnings."
)

BRIDGE_STORY = (
    "As dawn breaks over Manhattan, the Brooklyn Bridge stands "
    "majestic, its cables woven like a giant harp strummed by the "
    "city’s heartbeat. Emma, clutching her grandfather’s old camera, "
    "steps onto the wooden walkway, the mist curling around steel "
    "towers like whispered legends. Each footstep echoes stories of "
    "dreamers, engineers, and workers who defied odds to build this "
    "marvel. Below, the East River glistens, ferrying hopes and "
    "histories. Emma raises her camera, capturing the sun’s golden "
    "kiss on the Gothic arches. In this moment, the bridge connects "
    "past and present, her memories intertwining with the city’s "
    "timeless song."
)

EMPIRE_STORY = (
    "In the heart of New York City, the Empire State Building stands "
    "as a sentinel of dreams and determination. As twilight paints "
    "the sky in hues of orange and pink, the skyscraper’s lights "
    "flicker to life, a beacon for dreamers worldwide. Long ago, "
    "ambitious architects and workers toiled through freezing winters "
    "and scorching summers, crafting this marvel from steel and "
    "stone. Beneath its towering spire, lovers meet, tourists gaze in "
    "awe, and New Yorkers find a moment of solace amid the city's "
    "chaos. The Empire State Building is more than concrete; it’s the "
    "spirit of ambition etched into the skyline, forever inspiring."
)


@dataclass(frozen=True)
class GoldenScenario:
    id: str
    task: str
    instance: str
    plan: str
    # expected result-log output fields in order, None for skipped steps,
    # final entry is the FIN "FINISHED"
    expected_outputs: tuple[str | None, ...]
    # scripted replies per template id, consumed in order during authoring
    script: dict[str, list[str]] = field(default_factory=dict)


EXACT_TEXT_TASK = (
    "Demonstrate conditional execution with simple mathematical statements. "
    "Execute the numbered plan exactly, and when a step asks for exact text, "
    "reproduce it verbatim with no extra words."
)

GOTO_TASK = (
    "Demonstrate direct control-flow jumps. Execute the numbered plan "
    "exactly, and when a step asks for exact text, reproduce it verbatim "
    "with no extra words."
)

FORALL_TASK = (
    "Write short creative stories about New York monuments. Execute the "
    "numbered plan exactly. Every story should be about 100 words and "
    "focused on the monument named in the iteration."
)

MONUMENTS = ("Statue of Liberty", "Brooklyn Bridge", "Empire State Building")
STORIES = {
    "Statue of Liberty": STATUE_STORY,
    "Brooklyn Bridge": BRIDGE_STORY,
    "Empire State Building": EMPIRE_STORY,
}

FORALL_AGGREGATE = "\n\n".join(f"{m}: {STORIES[m]}" for m in MONUMENTS)

FORALL_SCENARIO = GoldenScenario(
    id="forall_monuments",
    task=FORALL_TASK,
    instance=(
        "New York monuments and landmarks to feature: Statue of Liberty, "
        "Brooklyn Bridge, Empire State Building."
    ),
    plan=(
        "1. FORALL New York monuments or landmarks listed in the input text: "
        "LLM: Write a vivid story of about 100 words centered on that "
        "monument.\n"
    ),
    expected_outputs=(FORALL_AGGREGATE, "FINISHED"),
    script={
        "forall_decompose": [
            '{"items": ["Statue of Liberty", "Brooklyn Bridge", "Empire State '
            'Building"], "task": "LLM: Write a vivid story of about 100 words '
            'centered on that monument."}'
        ],
        "executor_system": [STORIES[m] for m in MONUMENTS],
    },
)

IF_TRUE_SCENARIO = GoldenScenario(
    id="if_true",
    task=EXACT_TEXT_TASK,
    instance=(
        "Math note: 12 is greater than 7, 3 is less than 10, and no "
        "arithmetic errors are present."
    ),
    plan=(
        "1. IF 12 is greater than 7 according to the input text, then LLM: "
        'Output exactly "Math branch activated because 12 > 7."\n'
        '2. LLM: Output exactly "Continue with the verified arithmetic '
        'storyline."\n'
        '3. LLM: Output exactly "Mathematical IF demonstration complete."\n'
    ),
    expected_outputs=(
        "Math branch activated because 12 > 7.",
        "Continue with the verified arithmetic storyline.",
        "Mathematical IF demonstration complete.",
        "FINISHED",
    ),
    script={
        "if_decompose": [
            '{"if condition": "12 is greater than 7 according to the input '
            'text","then statement": "LLM: Output exactly \\"Math branch '
            'activated because 12 > 7.\\""}'
        ],
        "if_judge": ["Yes"],
    },
)

IF_FALSE_SCENARIO = GoldenScenario(
    id="if_false",
    task=EXACT_TEXT_TASK,
    instance=(
        "Math note: 5 is less than 9, 2 plus 2 equals 4, and 10 is not "
        "less than 3."
    ),
    plan=(
        "1. IF 10 is less than 3 according to the input text, then LLM: "
        'Output exactly "False math branch activated."\n'
        '2. LLM: Output exactly "Continue after the false mathematical IF."\n'
        '3. LLM: Output exactly "False mathematical IF demonstration '
        'complete."\n'
    ),
    expected_outputs=(
        None,
        "Continue after the false mathematical IF.",
        "False mathematical IF demonstration complete.",
        "FINISHED",
    ),
    script={
        "if_decompose": [
            '{"if condition": "10 is less than 3 according to the input '
            'text","then statement": "LLM: Output exactly \\"False math '
            'branch activated.\\""}'
        ],
        "if_judge": ["No"],
    },
)

GOTO_SCENARIO = GoldenScenario(
    id="goto",
    task=GOTO_TASK,
    instance=(
        "Routing note: jump directly to the emergency branch and skip the "
        "descriptive intermediate steps."
    ),
    plan=(
        "1. goto step 4\n"
        '2. LLM: Output exactly "This step should be skipped."\n'
        '3. LLM: Output exactly "This step should also be skipped."\n'
        '4. LLM: Output exactly "Reached the later step through direct '
        'GOTO."\n'
        '5. LLM: Output exactly "Direct GOTO demonstration complete."\n'
    ),
    expected_outputs=(
        None,
        None,
        None,
        "Reached the later step through direct GOTO.",
        "Direct GOTO demonstration complete.",
        "FINISHED",
    ),
)

SCENARIOS = (FORALL_SCENARIO, IF_TRUE_SCENARIO, IF_FALSE_SCENARIO, GOTO_SCENARIO)
