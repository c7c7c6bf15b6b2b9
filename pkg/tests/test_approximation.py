import textwrap
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cantorlab.approximation import (
    Case1,
    Case2,
    Case3,
    Event,
    Finite,
    Infinite,
    MutationSchedule,
    classify_input,
    join_schedules,
    load_schedule,
    parse_schedule,
    theta,
)
from cantorlab.errors import ParseError, ScheduleError
from cantorlab.sequences import FiniteSource, Pattern
from tests.strategies import patterns, schedules

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def threestage() -> MutationSchedule:
    return load_schedule(FIXTURES / "threestage.schedule")


def test_approximants_and_limit(threestage):
    assert threestage.T == 2
    assert [str(a) for a in threestage.approximants] == ["+0", "1+0", "11+0"]
    assert threestage.approximant(9) == threestage.limit == Pattern.parse("11+0")


def test_horizon_past_the_last_event():
    sched = parse_schedule("schedule late\nbase: +1\nstage 2: flip 3\nhorizon: 5\n")
    assert sched.T == 5
    assert sched.approximant(1) == Pattern.parse("+1")
    assert sched.approximant(4).take(5) == "11101"
    assert "horizon: 5" in sched.to_text()


def test_to_text_parses_back(threestage):
    again = parse_schedule(threestage.to_text())
    assert again.approximants == threestage.approximants
    assert again.name == "threestage"


def test_schedule_validation():
    with pytest.raises(ScheduleError):
        MutationSchedule(Pattern.parse("+0"), (Event(2, frozenset({0})), Event(2, frozenset({1}))))
    with pytest.raises(ScheduleError):
        MutationSchedule(Pattern.parse("+0"), (Event(1, frozenset()),))
    with pytest.raises(ScheduleError):
        MutationSchedule(Pattern.parse("+0"), (Event(3, frozenset({0})),), horizon=2)


@pytest.mark.parametrize(
    "body, line",
    [
        ("base: +0\nstage 1: flip\n", 3),
        ("base: +0\nstage 2: flip 0\nstage 1: flip 1\n", 4),
        ("base: +0\nstage x: flip 0\n", 3),
        ("base: +0\nstage 1: swap 0\n", 3),
        ("base: +0\nmystery\n", 3),
        ("base: +0\nstage 0: flip 1\n", 3),
    ],
)
def test_parse_errors_name_the_line(body, line):
    with pytest.raises(ParseError) as info:
        parse_schedule("schedule bad\n" + body, source="bad.schedule")
    assert info.value.line == line
    assert str(info.value).startswith(f"bad.schedule:{line}:")


def test_parse_needs_header_and_base():
    with pytest.raises(ParseError):
        parse_schedule("")
    with pytest.raises(ParseError, match="base"):
        parse_schedule("schedule s\nstage 1: flip 0\n")


def test_comments_and_blank_lines_are_ignored():
    sched = parse_schedule(
        textwrap.dedent("""
            # a one-flip schedule
            schedule one

            base: +0   # all zeros
            stage 1: flip 0
        """)
    )
    assert sched.limit == Pattern.parse("1+0")


def test_join_schedules_interleaves_flips(threestage):
    still = parse_schedule("schedule still\nbase: +0\n")
    joined = join_schedules(threestage, still)
    assert joined.T == 2
    assert joined.events == (Event(1, frozenset({0})), Event(2, frozenset({2})))
    assert joined.limit.take(6) == "101000"
    assert joined.name == "threestage+still"


def test_theta(threestage):
    x = Pattern.parse("1+0")
    assert [theta(threestage, x, n) for n in range(4)] == [Finite(s) for s in (0, 1, 1, 1)]
    assert theta(threestage, Pattern.parse("01+0"), 2) == Infinite()
    assert theta(threestage, FiniteSource("11"), 2) == Finite(2)


def test_classify_input(threestage):
    assert classify_input(threestage, Pattern.parse("1+0")) == Case1(1, 1)
    assert classify_input(threestage, Pattern.parse("+0")) == Case1(0, 0)
    assert classify_input(threestage, Pattern.parse("01+0")) == Case2(2)
    assert classify_input(threestage, Pattern.parse("11+0")) == Case3()


def test_stable_from_is_where_theta_settles(threestage):
    x = Pattern.parse("1+0")
    case = classify_input(threestage, x)
    assert all(theta(threestage, x, n) == Finite(case.stage) for n in range(case.stable_from, 8))
    assert theta(threestage, x, case.stable_from - 1) != Finite(case.stage)


def test_two_event_schedule_cases():
    sched = parse_schedule("schedule two\nbase: +0\nstage 1: flip 0\nstage 2: flip 1\n")
    assert classify_input(sched, Pattern.parse("01+0")) == Case2(2)
    assert classify_input(sched, Pattern.parse("110+0")) == Case3()
    assert str(Case2(2)) == "case2 witness=2"


@given(st.data())
def test_classification_agrees_with_theta(data):
    schedule = data.draw(schedules())
    x = data.draw(st.one_of(st.sampled_from(schedule.approximants), patterns))
    case = classify_input(schedule, x)
    if isinstance(case, Case1):
        assert all(theta(schedule, x, n) == Finite(case.stage) for n in range(case.stable_from, 16))
        if case.stable_from > 0:
            assert theta(schedule, x, case.stable_from - 1) != Finite(case.stage)
    elif isinstance(case, Case2):
        assert theta(schedule, x, case.witness) == Infinite()
        assert isinstance(theta(schedule, x, case.witness - 1), Finite)
    else:
        assert x == schedule.limit
        assert theta(schedule, x, 16) == Finite(schedule.T)
