import logging

import pytest

from cantorlab.dyadic import ONE, ZERO, Dyadic
from cantorlab.errors import OracleError, PrecisionError
from cantorlab.measures import (
    LEBESGUE,
    CylinderSet,
    MeasureOracle,
    atom_candidates,
    check_additivity,
    convex_sum,
    measure_eval,
    point_mass,
    render_measure_line,
    uniform_mixture,
)
from cantorlab.sequences import Pattern, strings


def _noisy_lebesgue() -> MeasureOracle:
    """Lebesgue measure reported 2^-(i+1) too high, a valid approximation."""
    return MeasureOracle(lambda sigma, i: Dyadic(1, len(sigma)) + Dyadic(1, i + 1), name="noisy")


def test_lebesgue_and_point_mass():
    assert measure_eval(LEBESGUE, "") == ONE
    assert measure_eval(LEBESGUE, "011") == Dyadic(1, 3)
    atom = point_mass(Pattern.parse("+01"))
    assert measure_eval(atom, "0101") == ONE
    assert measure_eval(atom, "011") == ZERO


def test_oracle_failures_are_wrapped():
    def boom(sigma, i):
        raise KeyError(sigma)

    with pytest.raises(OracleError):
        measure_eval(MeasureOracle(boom, name="boom"), "0")
    with pytest.raises(OracleError):
        measure_eval(MeasureOracle(lambda s, i: 0.5, name="float"), "0")


def test_negative_approximations_are_clamped(caplog):
    below = MeasureOracle(lambda sigma, i: Dyadic(-1, i + 1), name="below")
    with caplog.at_level(logging.WARNING, logger="cantorlab.measures"):
        assert measure_eval(below, "0", 3) == ZERO
    assert "clamped" in caplog.text


def test_convex_sum_of_exact_measures_is_exact():
    rho = convex_sum(LEBESGUE, point_mass(Pattern.parse("+1")), Dyadic(1, 2))
    assert rho.exact
    assert measure_eval(rho, "1") == Dyadic(3, 2)
    assert measure_eval(rho, "0") == Dyadic(1, 2)


def test_convex_sum_weight_must_be_a_probability():
    with pytest.raises(ValueError):
        convex_sum(LEBESGUE, LEBESGUE, Dyadic(3, 1))


def test_convex_sum_with_inexact_operand_stays_within_precision():
    rho = convex_sum(_noisy_lebesgue(), LEBESGUE, Dyadic(1, 2))
    assert not rho.exact
    for i in (0, 3, 8):
        for sigma in ("", "0", "10"):
            error = measure_eval(rho, sigma, i) - Dyadic(1, len(sigma))
            assert abs(error) <= Dyadic(1, i)


def test_uniform_mixture_of_three():
    zeros, ones = point_mass(Pattern.parse("+0")), point_mass(Pattern.parse("+1"))
    mix = uniform_mixture([LEBESGUE, zeros, ones])
    assert not mix.exact
    for i in (2, 6, 12):
        value = measure_eval(mix, "0", i)
        # (1/2 + 1 + 0) / 3 = 1/2
        assert abs(value - Dyadic(1, 1)) <= Dyadic(1, i)


def test_uniform_mixture_of_a_power_of_two_is_exact():
    mix = uniform_mixture([LEBESGUE, point_mass(Pattern.parse("+0"))])
    assert mix.exact
    assert measure_eval(mix, "00") == Dyadic(5, 3)
    with pytest.raises(ValueError):
        uniform_mixture([])


def test_cylinder_sets_are_prefix_free():
    u = CylinderSet(["01", "0", "11", "110"])
    assert u.generators == ("0", "11")
    assert u.covers("0110")
    assert not u.covers("10")
    assert u.measure(LEBESGUE) == Dyadic(3, 2)
    assert u.union(CylinderSet(["10"])).measure(LEBESGUE) == ONE
    assert u == CylinderSet(["11", "0"])
    assert u.covering_generator("1101", max_length=1) is None
    assert u.covering_generator("1101") == "11"


def test_additivity_of_exact_measures():
    report = check_additivity(LEBESGUE, 3)
    assert report.ok
    assert len(report.entries) == 7


def test_additivity_flags_a_broken_oracle():
    lopsided = MeasureOracle(
        lambda sigma, i: ONE if sigma == "" else Dyadic(1, 2 * len(sigma)), exact=True, name="bad"
    )
    report = check_additivity(lopsided, 2)
    assert not report.ok
    assert report.violations[0].sigma == ""
    assert report.render().endswith("# 3 violation(s)\n")


def test_additivity_tolerates_approximation_error():
    assert check_additivity(_noisy_lebesgue(), 3, i=4).ok


def test_atom_candidates_find_a_point_mass():
    atom = point_mass(Pattern.parse("1+0"))
    assert atom_candidates(atom, 4, Dyadic(1, 1)) == [("1000", ONE)]
    assert atom_candidates(LEBESGUE, 3, Dyadic(1, 3)) == [(s, Dyadic(1, 3)) for s in strings(3)]


def test_atom_candidates_need_enough_precision():
    with pytest.raises(PrecisionError):
        atom_candidates(_noisy_lebesgue(), 2, Dyadic(1, 2))
    with pytest.raises(PrecisionError):
        atom_candidates(_noisy_lebesgue(), 2, Dyadic(1, 2), i=1)
    with pytest.raises(ValueError):
        atom_candidates(LEBESGUE, 2, ZERO)


def test_render_measure_line():
    assert render_measure_line("", ONE, None) == "ε\t1\texact"
    assert render_measure_line("01", Dyadic(1, 2), 20) == "01\t1/4\t2^-20"
