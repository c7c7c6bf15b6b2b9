"""Finite-change Δ⁰₂ approximations given as mutation schedules."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from cantorlab.errors import ParseError, ScheduleError
from cantorlab.sequences import Pattern, Source, join

log = logging.getLogger(__name__)


# --- tally values ---


@dataclass(frozen=True)
class Finite:
    stage: int

    def __str__(self) -> str:
        return str(self.stage)


@dataclass(frozen=True)
class Infinite:
    def __str__(self) -> str:
        return "inf"


@dataclass(frozen=True)
class Unknown:
    budget: int

    def __str__(self) -> str:
        return f"unknown({self.budget})"


TallyValue = Finite | Infinite | Unknown


# --- schedules ---


@dataclass(frozen=True)
class Event:
    stage: int
    flips: frozenset[int]

    def __str__(self) -> str:
        return f"stage {self.stage}: flip " + " ".join(str(p) for p in sorted(self.flips))


@dataclass(frozen=True)
class MutationSchedule:
    base: Pattern
    events: tuple[Event, ...] = ()
    horizon: int | None = None
    name: str = "schedule"
    approximants: tuple[Pattern, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        last = 0
        for event in self.events:
            if event.stage <= last:
                raise ScheduleError(
                    f"stage {event.stage} must be >= 1 and above the previous stage {last}"
                )
            if not event.flips:
                raise ScheduleError(f"stage {event.stage} flips nothing")
            if min(event.flips) < 0:
                raise ScheduleError(f"stage {event.stage} flips a negative position")
            last = event.stage
        horizon = last if self.horizon is None else self.horizon
        if horizon < last:
            raise ScheduleError(f"horizon {horizon} precedes the last event at stage {last}")
        object.__setattr__(self, "horizon", horizon)

        by_stage = {e.stage: e.flips for e in self.events}
        current = self.base
        approximants = [current]
        for s in range(1, horizon + 1):
            if s in by_stage:
                current = current.flip(by_stage[s])
            approximants.append(current)
        object.__setattr__(self, "approximants", tuple(approximants))

    @property
    def T(self) -> int:
        return self.horizon  # type: ignore[return-value]

    def approximant(self, s: int) -> Pattern:
        return self.approximants[min(s, self.T)]

    @property
    def limit(self) -> Pattern:
        return self.approximants[-1]

    def to_text(self) -> str:
        lines = [f"schedule {self.name}", f"base: {self.base}"]
        lines += [str(e) for e in self.events]
        if self.T != (self.events[-1].stage if self.events else 0):
            lines.append(f"horizon: {self.T}")
        return "\n".join(lines) + "\n"


def parse_schedule(text: str, source: str = "<schedule>") -> MutationSchedule:
    """Parse the line format::

        schedule two-stage
        base: +0
        stage 1: flip 0
        stage 2: flip 1
        horizon: 3        # optional, defaults to the last stage
    """
    name = Path(source).stem if source != "<schedule>" else "schedule"
    base: Pattern | None = None
    horizon: int | None = None
    events: list[Event] = []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if not seen_header:
                words = line.split()
                if words[0] != "schedule":
                    raise ParseError("expected header 'schedule'")
                if len(words) > 1:
                    name = words[1]
                seen_header = True
            elif line.startswith("base:"):
                base = Pattern.parse(line.removeprefix("base:"))
            elif line.startswith("horizon:"):
                horizon = int(line.removeprefix("horizon:"))
            elif line.startswith("stage"):
                head, colon, body = line.partition(":")
                if not colon or not body.split() or body.split()[0] != "flip":
                    raise ParseError(f"expected 'stage N: flip p ...', got {line!r}")
                stage = int(head.removeprefix("stage"))
                flips = frozenset(int(tok) for tok in body.split()[1:])
                if not flips:
                    raise ParseError(f"stage {stage} flips nothing")
                if events and stage <= events[-1].stage:
                    raise ParseError(f"stage {stage} is not above stage {events[-1].stage}")
                if stage < 1:
                    raise ParseError("events start at stage 1")
                events.append(Event(stage, flips))
            else:
                raise ParseError(f"unexpected line {line!r}")
        except ParseError as exc:
            raise ParseError(str(exc), lineno, source) from None
        except ValueError as exc:
            raise ParseError(f"bad number: {exc}", lineno, source) from None
    if not seen_header:
        raise ParseError("empty schedule file", None, source)
    if base is None:
        raise ParseError("missing 'base:' line", None, source)
    try:
        schedule = MutationSchedule(base, tuple(events), horizon, name=name)
    except ScheduleError as exc:
        raise ParseError(str(exc), None, source) from None
    log.info("schedule %s: %d event(s), horizon %d", schedule.name, len(events), schedule.T)
    return schedule


def load_schedule(path: Path) -> MutationSchedule:
    return parse_schedule(path.read_text(), source=str(path))


def join_schedules(*schedules: MutationSchedule) -> MutationSchedule:
    """The approximation of A¹ ⊕ … ⊕ Aˡ: position p of component j moves to l·p + j."""
    if not schedules:
        raise ValueError("join of no schedules")
    width = len(schedules)
    flips: dict[int, set[int]] = {}
    for j, sched in enumerate(schedules):
        for event in sched.events:
            flips.setdefault(event.stage, set()).update(width * p + j for p in event.flips)
    events = tuple(Event(s, frozenset(flips[s])) for s in sorted(flips))
    return MutationSchedule(
        join(*(s.base for s in schedules)),
        events,
        max(s.T for s in schedules),
        name="+".join(s.name for s in schedules),
    )


# --- θ and the case analysis ---


def theta(schedule: MutationSchedule, x: Source, n: int) -> Finite | Infinite:
    """Least s <= T with X↾n = A_s↾n."""
    prefix = x.take(n)
    for s, approximant in enumerate(schedule.approximants):
        if approximant.take(n) == prefix:
            return Finite(s)
    return Infinite()


@dataclass(frozen=True)
class Case1:
    """X = A_s for some s < T; θ(X, n) = s for every n >= stable_from."""

    stage: int
    stable_from: int

    def __str__(self) -> str:
        return f"case1 stage={self.stage} stable_from={self.stable_from}"


@dataclass(frozen=True)
class Case2:
    """X differs from every approximant; θ(X, witness) is the first Infinite."""

    witness: int

    def __str__(self) -> str:
        return f"case2 witness={self.witness}"


@dataclass(frozen=True)
class Case3:
    """X is the limit A_T and no earlier approximant."""

    def __str__(self) -> str:
        return "case3"


Case = Case1 | Case2 | Case3


def classify_input(schedule: MutationSchedule, x: Pattern) -> Case:
    differences: list[int] = []
    for s, approximant in enumerate(schedule.approximants):
        d = x.first_difference(approximant)
        if d is None:
            if s == schedule.T:
                return Case3()
            # X↾n = A_t↾n exactly when n <= d_t
            return Case1(s, max((d + 1 for d in differences), default=0))
        differences.append(d)
    return Case2(max(d + 1 for d in differences))
