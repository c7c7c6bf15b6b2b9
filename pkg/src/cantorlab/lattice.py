"""Finite distributive lattices and the set systems that realize them."""

from __future__ import annotations

import csv
import io
import logging
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from itertools import combinations, product
from pathlib import Path
from typing import Any

import networkx as nx
import yaml

from cantorlab.approximation import MutationSchedule, join_schedules, load_schedule
from cantorlab.errors import (
    GradingError,
    GuardExceeded,
    LatticeError,
    NotALattice,
    NotDistributive,
    ParseError,
    SetSystemError,
)
from cantorlab.measures import MeasureOracle, uniform_mixture

log = logging.getLogger(__name__)


def natural_key(name: str) -> tuple:
    """Sort key comparing digit runs as integers: x2 < x10."""
    return tuple(int(part) if part.isdigit() else part for part in re.split(r"(\d+)", name))


class FiniteLattice:
    """A finite poset, checked to have all meets and joins.

    `covers` are pairs (a, b) with a < b; redundant pairs are reduced away.
    """

    def __init__(
        self, elements: Sequence[str], covers: Iterable[tuple[str, str]], name: str = "lattice"
    ) -> None:
        self.name = name
        if len(set(elements)) != len(elements):
            raise ParseError("duplicate element identifiers")
        if not elements:
            raise NotALattice("a lattice needs at least one element")
        self.elements: tuple[str, ...] = tuple(sorted(elements, key=natural_key))
        graph = nx.DiGraph()
        graph.add_nodes_from(self.elements)
        for a, b in covers:
            for x in (a, b):
                if x not in graph:
                    raise ParseError(f"cover {a}<{b} names unknown element {x!r}")
            if a == b:
                raise NotALattice(f"{a}<{a} is not a strict order", witness=(a,))
            graph.add_edge(a, b)
        if not nx.is_directed_acyclic_graph(graph):
            cycle = tuple(u for u, _ in nx.find_cycle(graph))
            raise NotALattice("the cover relation has a cycle", witness=cycle)

        self._below = nx.transitive_closure_dag(graph)
        self.hasse = nx.transitive_reduction(graph)
        self.hasse.add_nodes_from(self.elements)

        maximal = tuple(x for x in self.elements if self.hasse.out_degree(x) == 0)
        minimal = tuple(x for x in self.elements if self.hasse.in_degree(x) == 0)
        if len(maximal) != 1:
            raise NotALattice(f"{len(maximal)} maximal elements, no top", witness=maximal)
        if len(minimal) != 1:
            raise NotALattice(f"{len(minimal)} minimal elements, no bottom", witness=minimal)
        self.top, self.bottom = maximal[0], minimal[0]

        self._down = {x: {y for y in self.elements if self.leq(y, x)} for x in self.elements}
        self._up = {x: {y for y in self.elements if self.leq(x, y)} for x in self.elements}
        self._meet: dict[tuple[str, str], str] = {}
        self._join: dict[tuple[str, str], str] = {}
        for a, b in product(self.elements, repeat=2):
            self._meet[a, b] = self._extreme(a, b, lower=True)
            self._join[a, b] = self._extreme(a, b, lower=False)
        log.info("lattice %s: %d elements", name, len(self.elements))

    def _extreme(self, a: str, b: str, lower: bool) -> str:
        cone = self._down if lower else self._up
        bounds = cone[a] & cone[b]
        if bounds:
            # the extreme bound, if any, is the one whose cone holds every bound
            best = max(bounds, key=lambda c: (len(cone[c]), natural_key(c)))
            if bounds <= cone[best]:
                return best
        what = "meet" if lower else "join"
        raise NotALattice(f"{a} and {b} have no {what}", witness=(a, b))

    def leq(self, a: str, b: str) -> bool:
        return a == b or self._below.has_edge(a, b)

    def meet(self, a: str, b: str) -> str:
        return self._meet[a, b]

    def join(self, a: str, b: str) -> str:
        return self._join[a, b]

    def meet_all(self, items: Iterable[str]) -> str:
        """The meet of a set of elements; the empty meet is the top."""
        result = self.top
        for x in items:
            result = self.meet(result, x)
        return result

    def upper_covers(self, a: str) -> tuple[str, ...]:
        return tuple(sorted(self.hasse.successors(a), key=natural_key))

    def lower_covers(self, a: str) -> tuple[str, ...]:
        return tuple(sorted(self.hasse.predecessors(a), key=natural_key))

    def cover_pairs(self) -> list[tuple[str, str]]:
        return sorted(self.hasse.edges, key=lambda e: (natural_key(e[0]), natural_key(e[1])))

    def to_text(self) -> str:
        covers = " ".join(f"{a}<{b}" for a, b in self.cover_pairs())
        return f"lattice {self.name}\nelements: {' '.join(self.elements)}\ncovers: {covers}\n"

    def __len__(self) -> int:
        return len(self.elements)

    def __repr__(self) -> str:
        return f"FiniteLattice({self.name!r}, {len(self.elements)} elements)"


def parse_lattice(text: str, source: str = "<lattice>") -> FiniteLattice:
    """Parse the lattice file format::

        lattice diamond
        elements: 0 a b 1
        covers: 0<a 0<b a<1 b<1
    """
    name = Path(source).stem if source != "<lattice>" else "lattice"
    elements: list[str] | None = None
    covers: list[tuple[str, str]] = []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not seen_header:
            words = line.split()
            if words[0] != "lattice":
                raise ParseError("expected header 'lattice <name>'", lineno, source)
            if len(words) > 1:
                name = words[1]
            seen_header = True
        elif line.startswith("elements:"):
            elements = line.removeprefix("elements:").split()
        elif line.startswith("covers:"):
            for token in line.removeprefix("covers:").split():
                a, lt, b = token.partition("<")
                if not lt or not a or not b:
                    raise ParseError(f"bad cover {token!r}, expected a<b", lineno, source)
                covers.append((a, b))
        else:
            raise ParseError(f"unexpected line {line!r}", lineno, source)
    if not seen_header:
        raise ParseError("empty lattice file", None, source)
    if elements is None:
        raise ParseError("missing 'elements:' line", None, source)
    return FiniteLattice(elements, covers, name=name)


def load_lattice(path: Path) -> FiniteLattice:
    return parse_lattice(path.read_text(), source=str(path))


# --- generators ---


def chain(n: int) -> FiniteLattice:
    if n < 1:
        raise ValueError("a chain needs at least one element")
    elements = [str(i) for i in range(n)]
    return FiniteLattice(elements, [(str(i), str(i + 1)) for i in range(n - 1)], name=f"chain{n}")


def _subset_name(prefix: str, members: Iterable[Any]) -> str:
    return prefix + "_".join(str(m) for m in sorted(members))


def downset_lattice(
    nodes: Sequence[Any], relations: Iterable[tuple[Any, Any]], name: str = "downsets"
) -> FiniteLattice:
    """Downsets of a finite poset, ordered by reverse inclusion (∅ on top).

    `relations` are pairs (p, q) with p < q in the poset.
    """
    poset = nx.DiGraph()
    poset.add_nodes_from(nodes)
    poset.add_edges_from(relations)
    if not nx.is_directed_acyclic_graph(poset):
        raise LatticeError("the poset relation has a cycle")
    below = {x: set(nx.ancestors(poset, x)) for x in poset}
    downsets = [
        frozenset(subset)
        for r in range(len(nodes) + 1)
        for subset in combinations(nodes, r)
        if all(below[x] <= set(subset) for x in subset)
    ]
    names = {d: _subset_name("D", d) for d in downsets}
    covers = [
        (names[d | {x}], names[d])
        for d in downsets
        for x in nodes
        if x not in d and below[x] <= d
    ]
    return FiniteLattice(list(names.values()), covers, name=name)


def boolean_algebra(n: int) -> FiniteLattice:
    """Subsets of {0..n-1} ordered so that J <= K iff J ⊇ K; the empty set is the top."""
    return downset_lattice(list(range(n)), [], name=f"boolean{n}")


# --- structure ---


@dataclass(frozen=True)
class DistributivityVerdict:
    ok: bool
    triple: tuple[str, str, str] | None = None
    sublattice: tuple[str, tuple[str, ...]] | None = None

    def render(self) -> str:
        if self.ok:
            return "distributive\n"
        lines = ["not distributive"]
        if self.triple is not None:
            a, b, c = self.triple
            lines.append(f"triple: {a} {b} {c}")
        if self.sublattice is not None:
            kind, members = self.sublattice
            lines.append(f"sublattice: {kind} {' '.join(members)}")
        return "\n".join(lines) + "\n"


def _failing_triple(lattice: FiniteLattice) -> tuple[str, str, str] | None:
    m, j = lattice.meet, lattice.join
    for a, b, c in product(lattice.elements, repeat=3):
        if m(a, j(b, c)) != j(m(a, b), m(a, c)):
            return a, b, c
    return None


def _forbidden_sublattice(lattice: FiniteLattice) -> tuple[str, tuple[str, ...]] | None:
    m, j, leq = lattice.meet, lattice.join, lattice.leq

    def incomparable(x: str, y: str) -> bool:
        return not leq(x, y) and not leq(y, x)

    for a, b, c in combinations(lattice.elements, 3):
        if incomparable(a, b) and incomparable(a, c) and incomparable(b, c):
            if m(a, b) == m(a, c) == m(b, c) and j(a, b) == j(a, c) == j(b, c):
                return "M3", (m(a, b), a, b, c, j(a, b))
    for a, b in product(lattice.elements, repeat=2):
        if a == b or not leq(a, b):
            continue
        for c in lattice.elements:
            if incomparable(a, c) and incomparable(b, c):
                if m(a, c) == m(b, c) and j(a, c) == j(b, c):
                    return "N5", (m(a, c), a, b, c, j(a, c))
    return None


def check_distributive(lattice: FiniteLattice) -> DistributivityVerdict:
    """Triple check, cross-checked against a search for M3 and N5 sublattices."""
    triple = _failing_triple(lattice)
    sublattice = _forbidden_sublattice(lattice)
    if (triple is None) != (sublattice is None):
        raise LatticeError(
            f"{lattice.name}: triple check says {triple}, sublattice search says {sublattice}"
        )
    return DistributivityVerdict(triple is None, triple, sublattice)


def compute_levels(lattice: FiniteLattice) -> dict[str, int]:
    """level(1) = 1 and level(a) = 1 + max over upper covers, checked to be graded."""
    levels: dict[str, int] = {}
    for a in reversed(list(nx.topological_sort(lattice.hasse))):
        covers = lattice.upper_covers(a)
        levels[a] = 1 + max((levels[b] for b in covers), default=0)
    for a in lattice.elements:
        for b in lattice.upper_covers(a):
            if levels[b] != levels[a] - 1:
                raise GradingError(
                    f"{a} (level {levels[a]}) is covered by {b} at level {levels[b]}"
                )
    return levels


def level_groups(lattice: FiniteLattice, levels: Mapping[str, int]) -> list[list[str]]:
    groups: list[list[str]] = [[] for _ in range(max(levels.values()))]
    for a in lattice.elements:
        groups[levels[a] - 1].append(a)
    return groups


@dataclass(frozen=True)
class MeetClassification:
    reducible: tuple[str, ...]
    irreducible: tuple[str, ...]


def classify_meet_irreducible(lattice: FiniteLattice) -> MeetClassification:
    """Brute force over pairs above each element, cross-checked against cover counts."""
    reducible, irreducible = [], []
    for a in lattice.elements:
        if a == lattice.top:
            continue
        above = [b for b in lattice.elements if b != a and lattice.leq(a, b)]
        by_pairs = any(lattice.meet(b, c) == a for b, c in combinations(above, 2))
        by_covers = len(lattice.upper_covers(a)) >= 2
        if by_pairs != by_covers:
            raise LatticeError(f"{a}: pair search and cover count disagree")
        (reducible if by_pairs else irreducible).append(a)
    return MeetClassification(tuple(reducible), tuple(irreducible))


# --- set systems ---


@dataclass(frozen=True)
class Term:
    """A basic sequence A_i, or the join of several."""

    components: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("a term needs at least one basic")
        object.__setattr__(self, "components", tuple(sorted(set(self.components))))

    @property
    def is_basic(self) -> bool:
        return len(self.components) == 1

    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        return len(self.components), self.components

    def __str__(self) -> str:
        return "+".join(f"A{i}" for i in self.components)


def render_terms(terms: Iterable[Term]) -> str:
    return "{" + ", ".join(str(t) for t in sorted(terms, key=Term.sort_key)) + "}"


@dataclass(frozen=True)
class SetSystem:
    lattice: str
    assignment: Mapping[str, frozenset[Term]]
    origin: Mapping[int, str]
    level_two_basics: tuple[int, ...]
    meet_irreducible_basics: tuple[int, ...]

    @property
    def basics(self) -> tuple[int, ...]:
        return tuple(sorted(self.origin))

    def render(self) -> str:
        names = sorted(self.assignment, key=natural_key)
        return "".join(f"{a}: {render_terms(self.assignment[a])}\n" for a in names)


def build_set_system(lattice: FiniteLattice) -> SetSystem:
    """S_a for every a, top down from S_top = ∅.

    A meet-reducible element takes the union over its upper covers; a
    meet-irreducible one adds a fresh term to its cover's set.
    """
    verdict = check_distributive(lattice)
    if not verdict.ok:
        raise NotDistributive(f"{lattice.name} is not distributive", witness=verdict.triple or ())
    levels = compute_levels(lattice)

    assignment: dict[str, frozenset[Term]] = {}
    origin: dict[int, str] = {}
    level_two: list[int] = []
    deeper: list[int] = []
    for group in level_groups(lattice, levels):
        for a in group:
            covers = lattice.upper_covers(a)
            if not covers:
                assignment[a] = frozenset()
            elif len(covers) >= 2:
                union = frozenset().union(*(assignment[b] for b in covers))
                for b, c in combinations(covers, 2):
                    if assignment[b] | assignment[c] != union:
                        raise SetSystemError(
                            f"{a}: S_{b} ∪ S_{c} differs from the union over all covers",
                            witness=(a, b, c),
                        )
                assignment[a] = union
            else:
                (b,) = covers
                fresh = len(origin)
                origin[fresh] = a
                seen = {i for term in assignment[b] for i in term.components}
                assignment[a] = assignment[b] | {Term((*seen, fresh))}
                (level_two if not seen else deeper).append(fresh)
    system = SetSystem(lattice.name, assignment, origin, tuple(level_two), tuple(deeper))
    log.info("%s: set system with %d basic(s)", lattice.name, len(origin))
    return system


@dataclass(frozen=True)
class IsoViolation:
    clause: str
    a: str
    b: str
    detail: str


@dataclass(frozen=True)
class IsoReport:
    lattice: str
    pairs: int
    violations: tuple[IsoViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def render(self) -> str:
        lines = [f"# iso {self.lattice}: {self.pairs} pair(s) checked"]
        lines += [f"{v.clause}\t{v.a}\t{v.b}\t{v.detail}" for v in self.violations]
        lines.append("pass" if self.ok else f"{len(self.violations)} violation(s)")
        return "\n".join(lines) + "\n"


def verify_set_system_iso(lattice: FiniteLattice, system: SetSystem) -> IsoReport:
    """Checks a <= b iff S_a ⊇ S_b, S_{a∧b} = S_a ∪ S_b and S_{a∨b} = S_a ∩ S_b.

    Distinct elements must also get distinct sets.
    """
    S = system.assignment
    violations = []
    pairs = 0
    for a, b in product(lattice.elements, repeat=2):
        pairs += 1
        if lattice.leq(a, b) != (S[a] >= S[b]):
            violations.append(IsoViolation(
                "order", a, b, f"a<=b is {lattice.leq(a, b)} but S_a ⊇ S_b is {S[a] >= S[b]}"
            ))
        if natural_key(a) > natural_key(b):
            continue
        m, j = lattice.meet(a, b), lattice.join(a, b)
        if S[m] != S[a] | S[b]:
            violations.append(IsoViolation(
                "meet", a, b, f"S_{m} = {render_terms(S[m])} != {render_terms(S[a] | S[b])}"
            ))
        if S[j] != S[a] & S[b]:
            violations.append(IsoViolation(
                "join", a, b, f"S_{j} = {render_terms(S[j])} != {render_terms(S[a] & S[b])}"
            ))
        if a != b and S[a] == S[b]:
            violations.append(IsoViolation("distinct", a, b, render_terms(S[a])))
    return IsoReport(lattice.name, pairs, tuple(violations))


def canonical_form(system: SetSystem) -> dict[str, frozenset[frozenset[str]]]:
    """The assignment with every basic replaced by the element where it first appears."""
    return {
        a: frozenset(frozenset(system.origin[i] for i in t.components) for t in terms)
        for a, terms in system.assignment.items()
    }


# --- profiles ---


@dataclass(frozen=True)
class LRProfile:
    J: frozenset[int]
    K: frozenset[int]
    K_hat: frozenset[int]
    element: str
    profile: frozenset[Term]


@dataclass(frozen=True)
class ProfileReport:
    lattice: str
    profiles: tuple[LRProfile, ...]
    verdicts: tuple[tuple[str, bool, str], ...]

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.verdicts)

    @property
    def realized(self) -> frozenset[frozenset[Term]]:
        return frozenset(p.profile for p in self.profiles)

    def render(self, fmt: str = "text") -> str:
        def indices(xs: frozenset[int]) -> str:
            return "{" + " ".join(str(i) for i in sorted(xs)) + "}"

        rows = [
            (indices(p.J), indices(p.K), indices(p.K_hat), p.element, render_terms(p.profile))
            for p in self.profiles
        ]
        out = io.StringIO()
        if fmt == "csv":
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["J", "K", "K_hat", "element", "profile"])
            writer.writerows(rows)
        else:
            out.write("# J\tK\tK_hat\telement\tprofile\n")
            for row in rows:
                out.write("\t".join(row) + "\n")
        for name, passed, detail in self.verdicts:
            note = f" ({detail})" if detail else ""
            out.write(f"# {name}: {'pass' if passed else 'FAIL'}{note}\n")
        out.write(f"# {len(self.realized)} distinct profile(s)\n")
        return out.getvalue()


def _subsets(items: Sequence[int]) -> list[frozenset[int]]:
    return [frozenset(c) for r in range(len(items) + 1) for c in combinations(items, r)]


def lr_profiles(lattice: FiniteLattice, system: SetSystem, max_basics: int = 20) -> ProfileReport:
    """Enumerate every (J, K) and the element its derandomization pattern lands on.

    K̂ drops i ∈ K when S_{a_i} ⊇ S_{a_l} for a level-two basic l outside J.
    """
    if len(system.origin) > max_basics:
        raise GuardExceeded(f"{len(system.origin)} basics exceed the guard of {max_basics}")
    S, origin = system.assignment, system.origin
    top = lattice.top

    def element_for(J: frozenset[int], K: frozenset[int]) -> tuple[frozenset[int], str]:
        outside = [ell for ell in system.level_two_basics if ell not in J]
        k_hat = frozenset(
            i for i in K if not any(S[origin[i]] >= S[origin[ell]] for ell in outside)
        )
        return k_hat, lattice.meet_all(origin[i] for i in sorted(J | k_hat))

    js = _subsets(system.level_two_basics)
    ks = _subsets(system.meet_irreducible_basics)
    profiles = []
    by_pattern: dict[tuple[frozenset[int], frozenset[int]], str] = {}
    for J in js:
        for K in ks:
            k_hat, element = element_for(J, K)
            by_pattern[J, K] = element
            profiles.append(LRProfile(J, K, k_hat, element, S[element]))

    missing = [a for a in lattice.elements if a not in set(by_pattern.values())]
    not_monotone = []
    for (J, K), element in by_pattern.items():
        for ell in system.level_two_basics:
            if ell not in J and not lattice.leq(by_pattern[J | {ell}, K], element):
                not_monotone.append(f"J+{ell}")
        for i in system.meet_irreducible_basics:
            if i not in K and not lattice.leq(by_pattern[J, K | {i}], element):
                not_monotone.append(f"K+{i}")
    empty_j = [by_pattern[frozenset(), K] for K in ks if by_pattern[frozenset(), K] != top]

    verdicts = (
        ("totality", len(by_pattern) == len(js) * len(ks), f"{len(by_pattern)} pattern(s)"),
        ("surjectivity", not missing, " ".join(missing)),
        ("monotonicity", not not_monotone, " ".join(sorted(set(not_monotone)))),
        ("empty J gives top", not empty_j, " ".join(empty_j)),
    )
    return ProfileReport(lattice.name, tuple(profiles), verdicts)


# --- measure recipes ---


def emit_measure_recipe(system: SetSystem) -> dict[str, Any]:
    """The mixture (1/k) Σ μ_{B_i} over the terms B_i at the bottom element."""
    bottom_terms = max(system.assignment.values(), key=len)
    terms = sorted(bottom_terms, key=Term.sort_key)
    k = len(terms)
    if k == 0:
        raise LatticeError(f"{system.lattice} has no basics; there is nothing to mix")
    return {
        "recipe": system.lattice,
        "k": k,
        "weight": {
            "exact": f"1/{k}",
            "dyadic": k & (k - 1) == 0,
            "precision": f"i + {2 + k.bit_length()}",
        },
        "terms": [
            {"term": str(t), "components": list(t.components)} for t in terms
        ],
        "schedules": {f"A{i}": None for i in system.basics},
    }


def dump_recipe(recipe: Mapping[str, Any]) -> str:
    return yaml.safe_dump(dict(recipe), sort_keys=False, allow_unicode=True)


def load_recipe(path: Path) -> dict[str, Any]:
    with path.open() as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict) or "terms" not in data:
        raise ParseError("not a measure recipe", None, str(path))
    data["_base_dir"] = str(path.parent)
    return data


def bind_recipe(
    recipe: Mapping[str, Any],
    schedules: Mapping[int, MutationSchedule] | None = None,
    mode: str = "phi",
    depth_guard: int = 40,
) -> MeasureOracle:
    """The uniform mixture of the tally-induced measures of each term's joined schedule.

    Schedules come from `schedules` or, failing that, from the recipe's
    `schedules:` paths.
    """
    from cantorlab.tally import tally_induced_measure

    bound: dict[int, MutationSchedule] = dict(schedules or {})
    base_dir = Path(recipe.get("_base_dir", "."))
    for key, value in (recipe.get("schedules") or {}).items():
        index = int(str(key).removeprefix("A"))
        if index not in bound and value is not None:
            path = Path(value)
            bound[index] = load_schedule(path if path.is_absolute() else base_dir / path)

    oracles = []
    for entry in recipe["terms"]:
        components = [int(c) for c in entry["components"]]
        missing = [f"A{c}" for c in components if c not in bound]
        if missing:
            raise ParseError(f"no schedule bound for {' '.join(missing)}")
        joined = join_schedules(*(bound[c] for c in components))
        oracles.append(tally_induced_measure(joined, mode, depth_guard).oracle)
    return uniform_mixture(oracles, name=f"recipe {recipe.get('recipe', '')}".strip())
