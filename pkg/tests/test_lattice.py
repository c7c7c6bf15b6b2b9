import textwrap
from itertools import product
from pathlib import Path

import pytest
import yaml
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cantorlab.approximation import load_schedule
from cantorlab.dyadic import Dyadic
from cantorlab.errors import (
    GradingError,
    GuardExceeded,
    LatticeError,
    NotALattice,
    NotDistributive,
    ParseError,
)
from cantorlab.lattice import (
    FiniteLattice,
    Term,
    bind_recipe,
    boolean_algebra,
    build_set_system,
    canonical_form,
    chain,
    check_distributive,
    classify_meet_irreducible,
    compute_levels,
    downset_lattice,
    dump_recipe,
    emit_measure_recipe,
    level_groups,
    load_lattice,
    load_recipe,
    lr_profiles,
    parse_lattice,
    verify_set_system_iso,
)
from cantorlab.measures import measure_eval

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fig2() -> FiniteLattice:
    return load_lattice(FIXTURES / "fig2.lattice")


def test_meets_and_joins(fig2):
    assert (fig2.top, fig2.bottom) == ("1", "0")
    assert fig2.meet("a", "b") == "c"
    assert fig2.join("c", "d") == "a"
    assert fig2.meet_all([]) == "1"
    assert fig2.upper_covers("c") == ("a", "b")
    assert len(fig2) == 6


def test_redundant_covers_are_reduced():
    lattice = FiniteLattice(["0", "a", "1"], [("0", "a"), ("a", "1"), ("0", "1")])
    assert lattice.cover_pairs() == [("0", "a"), ("a", "1")]


def test_levels_and_classification(fig2):
    levels = compute_levels(fig2)
    assert level_groups(fig2, levels) == [["1"], ["a", "b"], ["c", "d"], ["0"]]
    cls = classify_meet_irreducible(fig2)
    assert cls.reducible == ("0", "c")
    assert cls.irreducible == ("a", "b", "d")


def test_set_system(fig2):
    system = build_set_system(fig2)
    assert system.origin == {0: "a", 1: "b", 2: "d"}
    assert system.level_two_basics == (0, 1)
    assert system.meet_irreducible_basics == (2,)
    assert system.assignment["0"] == {Term((0,)), Term((1,)), Term((0, 2))}
    assert system.render().splitlines()[1] == "1: {}"
    assert canonical_form(system)["d"] == {frozenset({"a"}), frozenset({"a", "d"})}


def test_set_system_is_an_anti_isomorphism(fig2):
    report = verify_set_system_iso(fig2, build_set_system(fig2))
    assert report.ok
    assert report.pairs == 36


def test_profiles(fig2):
    report = lr_profiles(fig2, build_set_system(fig2))
    assert report.ok
    assert len(report.profiles) == 8
    assert len(report.realized) == 6
    by_pattern = {(p.J, p.K): p for p in report.profiles}
    dropped = by_pattern[frozenset({1}), frozenset({2})]
    assert dropped.K_hat == frozenset()
    assert dropped.element == "b"


def test_profile_guard(fig2):
    with pytest.raises(GuardExceeded):
        lr_profiles(fig2, build_set_system(fig2), max_basics=2)


@pytest.mark.parametrize(
    "name, kind, members",
    [
        ("m3", "M3", ("0", "a", "b", "c", "1")),
        ("n5", "N5", ("0", "a", "b", "c", "1")),
    ],
)
def test_non_distributive_lattices(name, kind, members):
    lattice = load_lattice(FIXTURES / f"{name}.lattice")
    verdict = check_distributive(lattice)
    assert not verdict.ok
    assert verdict.triple is not None
    assert verdict.sublattice == (kind, members)
    with pytest.raises(NotDistributive):
        build_set_system(lattice)


def test_n5_is_not_graded():
    with pytest.raises(GradingError):
        compute_levels(load_lattice(FIXTURES / "n5.lattice"))


@pytest.mark.parametrize(
    "elements, covers",
    [
        (["a", "b"], [("a", "b"), ("b", "a")]),
        (["a"], [("a", "a")]),
        (["0", "a", "b"], [("0", "a"), ("0", "b")]),
        (
            ["0", "a", "b", "c", "d", "1"],
            [("0", "a"), ("0", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"),
             ("c", "1"), ("d", "1")],
        ),
    ],
)
def test_not_a_lattice(elements, covers):
    with pytest.raises(NotALattice) as info:
        FiniteLattice(elements, covers)
    assert info.value.witness


def test_missing_join_names_the_pair():
    with pytest.raises(NotALattice, match="no join") as info:
        FiniteLattice(
            ["0", "a", "b", "c", "d", "1"],
            [("0", "a"), ("0", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"),
             ("c", "1"), ("d", "1")],
        )
    assert info.value.witness == ("a", "b")


@pytest.mark.parametrize(
    "text, line",
    [
        ("graph g\n", 1),
        ("lattice g\nelements: 0 1\ncovers: 0-1\n", 3),
        ("lattice g\nelements: 0 1\nnodes: 0 1\n", 3),
    ],
)
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_lattice(text, source="g.lattice")
    assert info.value.line == line


def test_parse_needs_elements_that_exist():
    with pytest.raises(ParseError, match="elements"):
        parse_lattice("lattice g\ncovers: 0<1\n")
    with pytest.raises(ParseError, match="unknown element"):
        parse_lattice("lattice g\nelements: 0 1\ncovers: 0<2\n")


def test_to_text_parses_back(fig2):
    again = parse_lattice(fig2.to_text())
    assert again.elements == fig2.elements
    assert again.cover_pairs() == fig2.cover_pairs()


def test_chain():
    lattice = chain(3)
    system = build_set_system(lattice)
    assert system.level_two_basics == (0,)
    assert system.meet_irreducible_basics == (1,)
    assert system.assignment["0"] == {Term((0,)), Term((0, 1))}
    assert lr_profiles(lattice, system).ok
    with pytest.raises(ValueError):
        chain(0)


def test_boolean_algebra_element_names():
    lattice = boolean_algebra(2)
    assert lattice.elements == ("D", "D0", "D0_1", "D1")
    assert (lattice.top, lattice.bottom) == ("D", "D0_1")


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_boolean_algebras(n):
    lattice = boolean_algebra(n)
    system = build_set_system(lattice)
    assert len(system.basics) == n
    assert system.meet_irreducible_basics == ()
    assert verify_set_system_iso(lattice, system).ok
    report = lr_profiles(lattice, system)
    assert report.ok
    assert len(report.realized) == 2**n
    # more derandomized basics sit lower: element(J) <= element(J') iff J ⊇ J'
    for p, q in product(report.profiles, repeat=2):
        assert lattice.leq(p.element, q.element) == (p.J >= q.J)


@st.composite
def posets(draw):
    n = draw(st.integers(1, 6))
    pairs = [(p, q) for p in range(n) for q in range(p + 1, n)]
    relations = draw(st.lists(st.sampled_from(pairs), unique=True) if pairs else st.just([]))
    return list(range(n)), relations


@settings(max_examples=100, deadline=None)
@given(posets())
def test_downset_lattices_are_realized(poset):
    nodes, relations = poset
    lattice = downset_lattice(nodes, relations)
    assert check_distributive(lattice).ok
    system = build_set_system(lattice)
    assert len(system.basics) == len(classify_meet_irreducible(lattice).irreducible)
    assert verify_set_system_iso(lattice, system).ok
    report = lr_profiles(lattice, system)
    assert report.ok
    assert len(report.realized) == len(lattice)


def test_downset_relations_must_be_acyclic():
    with pytest.raises(LatticeError):
        downset_lattice([0, 1], [(0, 1), (1, 0)])


def test_emit_recipe_for_the_diamond():
    system = build_set_system(load_lattice(FIXTURES / "diamond.lattice"))
    recipe = emit_measure_recipe(system)
    assert recipe["k"] == 2
    assert recipe["weight"] == {"exact": "1/2", "dyadic": True, "precision": "i + 4"}
    assert [t["term"] for t in recipe["terms"]] == ["A0", "A1"]
    assert recipe["schedules"] == {"A0": None, "A1": None}
    assert yaml.safe_load(dump_recipe(recipe)) == recipe


def test_recipe_without_basics_is_rejected():
    with pytest.raises(LatticeError):
        emit_measure_recipe(build_set_system(chain(1)))


def test_bound_recipe_matches_the_file_binding():
    system = build_set_system(load_lattice(FIXTURES / "diamond.lattice"))
    schedules = {
        0: load_schedule(FIXTURES / "twostage.schedule"),
        1: load_schedule(FIXTURES / "still.schedule"),
    }
    in_memory = bind_recipe(emit_measure_recipe(system), schedules)
    from_file = bind_recipe(load_recipe(FIXTURES / "diamond-recipe.yaml"))
    assert in_memory.exact and from_file.exact
    for sigma in ("", "0", "00", "01", "010"):
        assert measure_eval(in_memory, sigma) == measure_eval(from_file, sigma)
    assert measure_eval(from_file, "00") == Dyadic(1, 1)


def test_unbound_recipe_terms_are_reported():
    recipe = emit_measure_recipe(build_set_system(load_lattice(FIXTURES / "diamond.lattice")))
    with pytest.raises(ParseError, match="A1"):
        bind_recipe(recipe, {0: load_schedule(FIXTURES / "still.schedule")})


def test_load_recipe_rejects_other_yaml(tmp_path: Path):
    path = tmp_path / "not-a-recipe.yaml"
    path.write_text(textwrap.dedent("""
        schedules:
          A0: still.schedule
    """))
    with pytest.raises(ParseError):
        load_recipe(path)


def distributes(lattice: FiniteLattice) -> bool:
    m, j = lattice.meet, lattice.join
    return all(
        m(a, j(b, c)) == j(m(a, b), m(a, c)) for a, b, c in product(lattice.elements, repeat=3)
    )


@st.composite
def closure_lattices(draw):
    """Intersection-closed families over {a, b, c, d} with the full set, ordered by ⊆."""
    family = {frozenset("abcd")}
    for members in draw(st.lists(st.frozensets(st.sampled_from("abcd")), max_size=6)):
        family |= {members & other for other in family}
    assume(len(family) <= 12)
    names = {s: "x" + "".join(sorted(s)) for s in family}
    covers = [(names[s], names[t]) for s in family for t in family if s < t]
    return FiniteLattice(list(names.values()), covers, name="closure")


@settings(max_examples=200, deadline=None)
@given(closure_lattices())
def test_distributivity_checks_agree_on_drawn_lattices(lattice):
    verdict = check_distributive(lattice)
    assert verdict.ok == distributes(lattice)
    if verdict.ok:
        assert verdict.sublattice is None
        assert verify_set_system_iso(lattice, build_set_system(lattice)).ok
        return
    kind, (bottom, x, y, z, top) = verdict.sublattice
    assert len({bottom, x, y, z, top}) == 5
    assert lattice.meet(x, z) == lattice.meet(y, z) == bottom
    assert lattice.join(x, z) == lattice.join(y, z) == top
    if kind == "N5":
        assert lattice.leq(x, y)
    else:
        assert kind == "M3"
        assert (lattice.meet(x, y), lattice.join(x, y)) == (bottom, top)
    with pytest.raises(NotDistributive):
        build_set_system(lattice)


@settings(max_examples=50, deadline=None)
@given(st.permutations(["p", "q", "r", "s", "t", "u"]))
def test_canonical_form_survives_renaming(names):
    original = load_lattice(FIXTURES / "fig2.lattice")
    rename = dict(zip(original.elements, names, strict=True))
    renamed = FiniteLattice(
        names, [(rename[a], rename[b]) for a, b in original.cover_pairs()], name="renamed"
    )
    expected = {
        rename[a]: frozenset(frozenset(rename[x] for x in term) for term in terms)
        for a, terms in canonical_form(build_set_system(original)).items()
    }
    assert canonical_form(build_set_system(renamed)) == expected
