"""Deterministic calendar-scheduling oracle and desk-scale dataset builder.

Instances follow one phrasing family ("X has blocked their calendar on
Monday during 9:00 to 9:30, ..."), parsed by a strict grammar; anything
outside the family is a grammar error rather than a guess. All intervals
are half-open [start, end): a meeting may start at the exact minute a busy
slot ends.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from pathlib import Path

from .model import step_output_content

WEEKDAYS = (
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
)

MINUTES_PER_DAY = 24 * 60


class CalendarParseError(ValueError):
    pass


def parse_hhmm(text: str) -> int:
    m = re.fullmatch(r"(\d{1,2}):(\d{2})", text.strip())
    if m is None:
        raise CalendarParseError(f"not a H:MM time: {text!r}")
    minutes = int(m.group(1)) * 60 + int(m.group(2))
    if not 0 <= minutes <= MINUTES_PER_DAY:
        raise CalendarParseError(f"time out of range: {text!r}")
    return minutes


def minutes_to_hhmm(minutes: int) -> str:
    return f"{minutes // 60}:{minutes % 60:02d}"


@dataclass(frozen=True)
class CalendarAnswer:
    day: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.day not in WEEKDAYS:
            raise CalendarParseError(f"not a weekday: {self.day!r}")
        if not (0 <= self.start < self.end <= MINUTES_PER_DAY):
            raise CalendarParseError("answer interval is not ordered within a day")

    def text(self) -> str:
        return f"{self.day}, {minutes_to_hhmm(self.start)} to {minutes_to_hhmm(self.end)}"


_ANSWER_RE = re.compile(
    r"(Monday|Tuesday|Wednesday|Thursday|Friday|Saturday|Sunday)\s*,\s*"
    r"(\d{1,2}:\d{2})\s+to\s+(\d{1,2}:\d{2})",
    re.IGNORECASE,
)


def parse_calendar_answer(text: str) -> CalendarAnswer:
    """Accepts "Day, HH:MM to HH:MM", tolerant of an XML wrapper and spacing."""
    body = step_output_content(text)
    m = _ANSWER_RE.search(body)
    if m is None:
        raise CalendarParseError(f"not a calendar answer: {text!r}")
    return CalendarAnswer(
        day=m.group(1).capitalize(),
        start=parse_hhmm(m.group(2)),
        end=parse_hhmm(m.group(3)),
    )


@dataclass(frozen=True)
class Interval:
    start: int
    end: int

    def overlaps(self, other: "Interval") -> bool:
        # Half-open intervals: touching endpoints do not overlap.
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Participant:
    name: str
    busy: tuple[Interval, ...]


@dataclass(frozen=True)
class CalendarSpec:
    participants: tuple[Participant, ...]
    day: str
    work_start: int
    work_end: int
    duration: int


_HEADER_RE = re.compile(
    r"schedule a meeting for (?P<names>.+?) for (?P<duration>one hour|half an hour|"
    r"\d+ minutes) between the work hours of (?P<ws>\d{1,2}:\d{2}) to "
    r"(?P<we>\d{1,2}:\d{2}) on (?P<day>Monday|Tuesday|Wednesday|Thursday|Friday|"
    r"Saturday|Sunday)",
)
_BUSY_RE = re.compile(
    r"^(?P<name>[A-Za-z]+) (?:has meetings|has blocked their calendar|is busy) on "
    r"(?P<day>[A-Za-z]+) during (?P<slots>[\d:,\sto]+?);?$"
)
_FREE_RE = re.compile(
    r"^(?P<name>[A-Za-z]+) (?:is free the entire day|has no meetings the whole day)\.?;?$"
)


def _parse_duration(text: str) -> int:
    if text == "one hour":
        return 60
    if text == "half an hour":
        return 30
    m = re.fullmatch(r"(\d+) minutes", text)
    if m is None:
        raise CalendarParseError(f"unknown duration phrase: {text!r}")
    return int(m.group(1))


def _parse_slots(text: str) -> tuple[Interval, ...]:
    slots = []
    for piece in text.split(","):
        piece = piece.strip().rstrip(".;")
        if not piece:
            continue
        m = re.fullmatch(r"(\d{1,2}:\d{2})\s+to\s+(\d{1,2}:\d{2})", piece)
        if m is None:
            raise CalendarParseError(f"not a busy slot: {piece!r}")
        start, end = parse_hhmm(m.group(1)), parse_hhmm(m.group(2))
        if start >= end:
            raise CalendarParseError(f"busy slot is not ordered: {piece!r}")
        slots.append(Interval(start, end))
    return tuple(slots)


def parse_instance(text: str) -> CalendarSpec:
    """Parse an instance of the scheduling phrasing family into a spec."""
    header = _HEADER_RE.search(text)
    if header is None:
        raise CalendarParseError("instance header did not match the grammar")
    names = [
        n.strip()
        for n in re.split(r",| and ", header.group("names"))
        if n.strip()
    ]
    if not names:
        raise CalendarParseError("no participant names found")
    day = header.group("day")
    busy: dict[str, tuple[Interval, ...]] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        bm = _BUSY_RE.match(line)
        if bm:
            if bm.group("day") != day:
                raise CalendarParseError(
                    f"busy line for unexpected day {bm.group('day')!r}"
                )
            busy[bm.group("name")] = _parse_slots(bm.group("slots"))
            continue
        fm = _FREE_RE.match(line)
        if fm:
            busy[fm.group("name")] = ()
    unknown = set(busy) - set(names)
    if unknown:
        raise CalendarParseError(f"busy lines for unknown participants: {unknown}")
    participants = tuple(
        Participant(name=n, busy=busy.get(n, ())) for n in names
    )
    return CalendarSpec(
        participants=participants,
        day=day,
        work_start=parse_hhmm(header.group("ws")),
        work_end=parse_hhmm(header.group("we")),
        duration=_parse_duration(header.group("duration")),
    )


def verify_calendar(answer: CalendarAnswer, spec: CalendarSpec) -> tuple[bool, list[str]]:
    """Check an answer against the spec; returns (valid, reasons-if-not)."""
    reasons: list[str] = []
    if answer.day != spec.day:
        reasons.append(f"meeting is on {answer.day}, required day is {spec.day}")
    if answer.end - answer.start != spec.duration:
        reasons.append(
            f"meeting lasts {answer.end - answer.start} minutes, "
            f"required duration is {spec.duration}"
        )
    if answer.start < spec.work_start or answer.end > spec.work_end:
        reasons.append(
            f"meeting is outside work hours "
            f"{minutes_to_hhmm(spec.work_start)} to {minutes_to_hhmm(spec.work_end)}"
        )
    candidate = Interval(answer.start, answer.end)
    for person in spec.participants:
        for slot in person.busy:
            if candidate.overlaps(slot):
                reasons.append(
                    f"{person.name} is busy "
                    f"{minutes_to_hhmm(slot.start)} to {minutes_to_hhmm(slot.end)}"
                )
    return (not reasons, reasons)


def enumerate_slots(spec: CalendarSpec, grid: int = 30) -> list[CalendarAnswer]:
    """All candidate slots of the required duration on the grid."""
    slots = []
    start = spec.work_start
    while start + spec.duration <= spec.work_end:
        slots.append(CalendarAnswer(spec.day, start, start + spec.duration))
        start += grid
    return slots


def first_valid_slot(spec: CalendarSpec, grid: int = 30) -> CalendarAnswer | None:
    for slot in enumerate_slots(spec, grid):
        valid, _ = verify_calendar(slot, spec)
        if valid:
            return slot
    return None


# -- Dataset generation ------------------------------------------------------------

CALENDAR_TASK = (
    "Your task is to find a feasible schedule for calendar events, taking into "
    "account time slots, durations, constraints, and conflicts. You will analyze "
    "the calendar requirements and available time slots to determine the optimal "
    "event schedule. Output the final calendar schedule outlining the day and "
    "time of the meeting, without any other text."
)

CALENDAR_FACTS = [
    "If a busy slot ends at time t, then the person is considered free at time "
    "t. For example, if the person is busy from 10:00 AM to 12:00 PM, then the "
    "person is considered free at 12:00 PM, and a meeting can be scheduled at "
    "12:00 PM for this person.",
    "There is no need to have breaks between work for any person.",
    "A solution always exists.",
    "Each time interval is considered as half open with the open part being the "
    "end of the interval.",
]

CALENDAR_PLAN = """\
1. LLM: List each participant's busy intervals on the meeting day from the input text.
2. LLM: Determine the free time slots within the work hours that fit the meeting duration for everyone.
3. LLM: Output the final schedule as "Day, HH:MM to HH:MM" without any other text.
"""

_NAME_POOL = (
    "Michelle", "Steven", "Jerry", "Laura", "Patrick", "Naomi", "Victor",
    "Amara", "Felix", "Priya", "Oscar", "Dana", "Hugo", "Irene", "Tariq",
)

_BUSY_PHRASES = (
    "{name} has meetings on {day} during {slots}",
    "{name} has blocked their calendar on {day} during {slots}",
)


def generate_spec(rng: random.Random) -> CalendarSpec:
    """Sample a solvable spec on the 30-minute grid."""
    while True:
        day = rng.choice(WEEKDAYS[:5])
        n = rng.randint(2, 3)
        names = rng.sample(_NAME_POOL, n)
        work_start, work_end = 9 * 60, 17 * 60
        duration = rng.choice((30, 60))
        participants = []
        for name in names:
            busy: list[Interval] = []
            cursor = work_start
            while cursor < work_end:
                if rng.random() < 0.35:
                    length = rng.choice((30, 60, 90))
                    end = min(cursor + length, work_end)
                    busy.append(Interval(cursor, end))
                    cursor = end
                else:
                    cursor += 30
            participants.append(Participant(name=name, busy=tuple(busy)))
        spec = CalendarSpec(
            participants=tuple(participants),
            day=day,
            work_start=work_start,
            work_end=work_end,
            duration=duration,
        )
        if first_valid_slot(spec) is not None:
            return spec


def render_instance(spec: CalendarSpec, rng: random.Random) -> str:
    names = [p.name for p in spec.participants]
    if len(names) == 1:
        name_list = names[0]
    else:
        name_list = ", ".join(names[:-1]) + " and " + names[-1]
    duration_phrase = {30: "half an hour", 60: "one hour"}.get(
        spec.duration, f"{spec.duration} minutes"
    )
    lines = [
        f"You need to schedule a meeting for {name_list} for {duration_phrase} "
        f"between the work hours of {minutes_to_hhmm(spec.work_start)} to "
        f"{minutes_to_hhmm(spec.work_end)} on {spec.day}. ",
        "",
        "Here are the existing schedules for everyone during the day: ",
    ]
    for person in spec.participants:
        if not person.busy:
            lines.append(f"{person.name} has no meetings the whole day.")
            continue
        slots = ", ".join(
            f"{minutes_to_hhmm(s.start)} to {minutes_to_hhmm(s.end)}"
            for s in person.busy
        )
        phrase = rng.choice(_BUSY_PHRASES)
        lines.append(phrase.format(name=person.name, day=spec.day, slots=slots) + "; ")
    lines.append("")
    lines.append("Find a time that works for everyone's schedule and constraints. ")
    lines.append("SOLUTION: ")
    return "\n".join(lines)


def generate_dataset(outdir: str | Path, count: int, seed: int = 7) -> list[Path]:
    """Write ``count`` instance directories (task/instance/plan/gold/facts)."""
    rng = random.Random(seed)
    root = Path(outdir)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(count):
        spec = generate_spec(rng)
        gold = first_valid_slot(spec)
        assert gold is not None
        d = root / f"inst_{i:03d}"
        d.mkdir(parents=True, exist_ok=True)
        (d / "task.txt").write_text(CALENDAR_TASK, encoding="utf-8")
        (d / "instance.txt").write_text(render_instance(spec, rng), encoding="utf-8")
        (d / "plan.txt").write_text(CALENDAR_PLAN, encoding="utf-8")
        (d / "gold.txt").write_text(gold.text() + "\n", encoding="utf-8")
        (d / "facts.txt").write_text(
            "\n".join(f"{i+1}. {f}" for i, f in enumerate(CALENDAR_FACTS)) + "\n",
            encoding="utf-8",
        )
        written.append(d)
    return written
