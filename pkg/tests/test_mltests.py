from pathlib import Path

import pytest

from cantorlab.approximation import Finite, Unknown
from cantorlab.dyadic import Dyadic
from cantorlab.errors import InputTooShort, ParseError, PrecisionError
from cantorlab.measures import LEBESGUE, CylinderSet, MeasureOracle, point_mass
from cantorlab.mltests import (
    StagedTest,
    audit_bounds,
    capture_profile,
    capture_stage,
    check_bound,
    check_monotone,
    delayed,
    geometric,
    inflated,
    load_test,
    parse_test,
    zeros,
)
from cantorlab.sequences import FiniteSource, Pattern
from cantorlab.tally import least_stage, make_theta_test

FIXTURES = Path(__file__).parent / "fixtures"


def test_zeros_is_a_martin_lof_test():
    audit = audit_bounds(zeros(), LEBESGUE, range(5), range(3))
    assert audit.ok
    assert len(audit.verdicts) == 15
    assert audit.render().endswith("# clean\n")


def test_inflated_fails_from_component_one():
    audit = audit_bounds(inflated(), LEBESGUE, range(3), range(2))
    first = audit.first_violation
    assert (first.i, first.s) == (1, 0)
    assert first.mass == Dyadic(1)


def test_schnorr_gap_closes():
    verdict = check_bound(geometric(), LEBESGUE, 1, 3)
    assert verdict.ok
    assert verdict.mass == Dyadic(7, 4)
    assert verdict.gap == Dyadic(1, 4)
    assert verdict.trend == "closing"


def test_schnorr_gap_can_be_steady():
    steady = StagedTest(lambda i, s: CylinderSet(["1" * (i + 1)]), kind="schnorr", name="steady")
    assert check_bound(steady, LEBESGUE, 2, 4).trend == "steady"


def test_bounds_against_a_point_mass():
    atom = point_mass(Pattern.parse("+0"))
    assert not check_bound(zeros(), atom, 3, 0).ok
    assert check_bound(geometric(), atom, 3, 5).ok


def test_generalized_test_needs_a_decreasing_sequence():
    test = StagedTest(lambda i, s: CylinderSet(["0" * i]), kind="generalized", name="halving")
    verdict = check_bound(test, LEBESGUE, 2, 0)
    assert verdict.ok
    assert verdict.sequence == (Dyadic(1), Dyadic(1, 1), Dyadic(1, 2))
    assert not check_bound(test, LEBESGUE, 2, 0, epsilon=Dyadic(1, 3)).ok


def test_inexact_measure_checks():
    noisy = MeasureOracle(lambda sigma, i: Dyadic(1, len(sigma)) + Dyadic(1, i + 1), name="noisy")
    assert check_bound(geometric(), noisy, 2, 1, precision=10).ok
    assert not check_bound(inflated(), noisy, 1, 0, precision=10).ok
    # mass exactly 2^-i cannot be told apart from slightly more
    with pytest.raises(PrecisionError):
        check_bound(zeros(), noisy, 2, 0, precision=10)
    halving = StagedTest(lambda i, s: CylinderSet(["0" * i]), kind="generalized")
    with pytest.raises(PrecisionError):
        check_bound(halving, noisy, 1, 0)


def test_monotonicity():
    assert check_monotone(geometric(), range(3), 4).ok
    shrinking = StagedTest(lambda i, s: CylinderSet(["0"] if s == 0 else ["1"]), name="shrinking")
    report = check_monotone(shrinking, range(1), 2)
    assert report.violations == ((0, 0, "0"),)
    assert report.render().endswith("1 violation(s)\n")


def test_capture_stages():
    x = Pattern.parse("+0")
    assert capture_stage(delayed(), x, 2, budget=10) == Finite(3)
    assert capture_stage(delayed(), x, 2, budget=10, strict=True) == Finite(4)
    assert capture_stage(delayed(), x, 2, budget=2) == Unknown(2)
    assert capture_stage(zeros(), Pattern.parse("+1"), 1, budget=5) == Unknown(5)
    profile = capture_profile(delayed(), x, 3, budget=10)
    assert [str(v) for v in profile.values] == ["1", "2", "3"]


def test_parse_test_file():
    test = load_test(str(FIXTURES / "sparse.test"))
    assert test.name == "sparse"
    assert test.horizon == 3
    assert test.stage(1, 0).generators == ()
    assert test.stage(1, 2).generators == ("00",)
    assert test.stage(1, 3).generators == ("00", "011")
    assert test.stage(1, 7) == test.stage(1, 3)
    assert test.stage(0, 0).generators == ("",)
    assert audit_bounds(test, LEBESGUE, range(3), range(4)).ok


def test_horizon_defaults_to_the_last_stage():
    test = parse_test("test t\n0 2: 1\n1 5: 01\n")
    assert test.horizon == 5
    assert parse_test("test t\nhorizon: open\n0 1: 1\n").horizon is None


@pytest.mark.parametrize(
    "text, line",
    [
        ("exam\n", 1),
        ("test t\nkind: fuzzy\n", 2),
        ("test t\n0: 01\n", 2),
        ("test t\n0 x: 01\n", 2),
        ("test t\n0 1: 012\n", 2),
        ("test t\ntest u\n", 2),
    ],
)
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_test(text, source="t.test")
    assert info.value.line == line


def test_load_test_builtins_and_errors():
    assert load_test("geometric").kind == "schnorr"
    with pytest.raises(ParseError):
        load_test("no-such-test")
    with pytest.raises(ValueError):
        StagedTest(lambda i, s: CylinderSet(), kind="weird")


def test_header_line_is_optional():
    bare = parse_test("0 1: 00 01\n1 2: 000\n")
    assert bare.name == "test"
    assert bare.horizon == 2
    assert bare.stage(0, 0).generators == ()
    assert bare.stage(0, 1).generators == ("00", "01")
    assert bare.stage(1, 5).generators == ("000",)


def test_finite_input_that_rules_out_a_long_generator():
    test = parse_test("0 0: 00\n0 3: 1\n")
    x = FiniteSource("1")
    assert capture_stage(test, x, 0, budget=5) == Finite(3)
    assert capture_stage(test, x, 0, budget=5, strict=True) == Finite(3)
    assert least_stage(make_theta_test(test), x, 0, budget=5) == Finite(3)


def test_finite_input_too_short_for_a_compatible_generator():
    test = parse_test("0 0: 00\n0 3: 1\n")
    x = FiniteSource("0")
    with pytest.raises(InputTooShort, match="'00'"):
        capture_stage(test, x, 0, budget=5)
    with pytest.raises(InputTooShort):
        capture_stage(test, x, 0, budget=5, strict=True)
    with pytest.raises(InputTooShort):
        least_stage(make_theta_test(test), x, 0, budget=5)


def test_generalized_audit_reads_the_horizon_stage():
    text = "kind: generalized\n{}0 0: ε\n1 0: 0\n1 2: 1\n2 2: 00\n"
    closed = parse_test(text.format(""))
    verdict = check_bound(closed, LEBESGUE, 2, 0)
    assert verdict.s == 0
    assert verdict.sequence == (Dyadic(1), Dyadic(1), Dyadic(1, 2))
    assert verdict.ok
    opened = parse_test(text.format("horizon: open\n"))
    assert check_bound(opened, LEBESGUE, 2, 0).sequence == (Dyadic(1), Dyadic(1, 1), Dyadic(0))
