from __future__ import annotations

import logging
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from pathlib import Path

from cantorlab.approximation import Finite, TallyValue, Unknown
from cantorlab.dyadic import ZERO, Dyadic
from cantorlab.errors import InputTooShort, ParseError, PrecisionError
from cantorlab.measures import CylinderSet, MeasureOracle
from cantorlab.sequences import BitString, Source, check_bits, is_prefix, read_upto

log = logging.getLogger(__name__)

KINDS = ("ml", "schnorr", "generalized")


@dataclass(frozen=True)
class StagedTest:
    stage_fn: Callable[[int, int], CylinderSet] = field(repr=False)
    kind: str = "ml"
    horizon: int | None = None
    name: str = "test"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown test kind {self.kind!r}")

    def stage(self, i: int, s: int) -> CylinderSet:
        """U_{i,s}; stages past a finite horizon repeat the horizon stage."""
        if self.horizon is not None:
            s = min(s, self.horizon)
        return self.stage_fn(i, s)


# --- builtin families ---


def zeros() -> StagedTest:
    """U_{i,s} = ⟦0^i⟧ at every stage."""
    return StagedTest(lambda i, s: CylinderSet(["0" * i]), "ml", None, "zeros")


def inflated() -> StagedTest:
    """U_{i,s} = ⟦0^(i-1)⟧, twice too big from i = 1 on."""
    return StagedTest(lambda i, s: CylinderSet(["0" * max(i - 1, 0)]), "ml", None, "inflated")


def delayed() -> StagedTest:
    """U_{i,s} = ⟦0^(i+1)⟧ from stage i + 1 on, empty before."""

    def stage(i: int, s: int) -> CylinderSet:
        return CylinderSet(["0" * (i + 1)] if s >= i + 1 else [])

    return StagedTest(stage, "ml", None, "delayed")


def geometric() -> StagedTest:
    """U_{i,s} = ⋃_{j<s} ⟦0^(i+j) 1⟧, Lebesgue mass 2^-i (1 - 2^-s)."""

    def stage(i: int, s: int) -> CylinderSet:
        return CylinderSet("0" * (i + j) + "1" for j in range(s))

    return StagedTest(stage, "schnorr", None, "geometric")


BUILTINS: dict[str, Callable[[], StagedTest]] = {
    "zeros": zeros,
    "inflated": inflated,
    "delayed": delayed,
    "geometric": geometric,
}


def parse_test(text: str, source: str = "<test>") -> StagedTest:
    """Parse a test file::

        test sparse
        kind: ml
        horizon: 4
        0 0: ε
        1 2: 00 010

    The `test` header line is optional. Each `i s:` line adds generators to
    component i from stage s on.
    Without a horizon line the last listed stage is the horizon.
    """
    name = Path(source).stem if source != "<test>" else "test"
    kind = "ml"
    horizon: int | None = None
    open_horizon = False
    added: dict[int, list[tuple[int, list[BitString]]]] = {}
    last_stage = 0
    started = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            words = line.split()
            if words[0] == "test" and not started:
                if len(words) > 1:
                    name = words[1]
            elif line.startswith("kind:"):
                kind = line.removeprefix("kind:").strip()
                if kind not in KINDS:
                    raise ParseError(f"unknown kind {kind!r}")
            elif line.startswith("horizon:"):
                value = line.removeprefix("horizon:").strip()
                open_horizon = value == "open"
                horizon = None if open_horizon else int(value)
            else:
                head, colon, body = line.partition(":")
                if not colon or len(head.split()) != 2:
                    raise ParseError(f"expected 'i s: σ ...', got {line!r}")
                i, s = (int(tok) for tok in head.split())
                gens = ["" if tok == "ε" else check_bits(tok, "generator") for tok in body.split()]
                added.setdefault(i, []).append((s, gens))
                last_stage = max(last_stage, s)
            started = True
        except ParseError as exc:
            raise ParseError(str(exc), lineno, source) from None
        except ValueError as exc:
            raise ParseError(f"bad number: {exc}", lineno, source) from None
    if not started:
        raise ParseError("empty test file", None, source)
    if horizon is None and not open_horizon and added:
        horizon = last_stage

    def stage(i: int, s: int) -> CylinderSet:
        cylinders = CylinderSet()
        for at, batch in added.get(i, []):
            if at <= s:
                cylinders = cylinders.union(CylinderSet(batch))
        return cylinders

    return StagedTest(stage, kind, horizon, name)


def load_test(spec: str, base_dir: Path | None = None) -> StagedTest:
    if spec in BUILTINS:
        return BUILTINS[spec]()
    path = Path(spec)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.is_file():
        raise ParseError(f"unknown test {spec!r}")
    return parse_test(path.read_text(), source=str(path))


# --- bound audits ---


def _mass(cylinders: CylinderSet, mu: MeasureOracle, precision: int) -> tuple[Dyadic, Dyadic]:
    """(approximate mass, error bound)."""
    if mu.exact:
        return cylinders.measure(mu), ZERO
    return cylinders.measure(mu, precision), Dyadic(1, precision)


@dataclass(frozen=True)
class BoundVerdict:
    kind: str
    i: int
    s: int
    mass: Dyadic
    bound: Dyadic
    ok: bool
    gap: Dyadic | None = None
    trend: str | None = None
    sequence: tuple[Dyadic, ...] = ()

    def render(self) -> str:
        line = f"{self.i}\t{self.s}\t{self.mass}\t{self.bound}\t{'ok' if self.ok else 'FAIL'}"
        if self.gap is not None:
            line += f"\tgap={self.gap}\t{self.trend}"
        if self.sequence:
            line += "\t" + " ".join(str(m) for m in self.sequence)
        return line


def _decide_at_most(mass: Dyadic, error: Dyadic, bound: Dyadic, what: str) -> bool:
    if mass + error <= bound:
        return True
    if mass - error > bound:
        return False
    raise PrecisionError(f"cannot decide {what} <= {bound} at error {error}")


def check_bound(
    test: StagedTest,
    mu: MeasureOracle,
    i: int,
    s: int,
    precision: int = 20,
    epsilon: Dyadic | None = None,
) -> BoundVerdict:
    """Audit μ(U_{i,s}) against the test kind's contract.

    ml: μ(U_{i,s}) <= 2^-i. schnorr: the same plus the gap to 2^-i and its
    trend over stages 0..s. generalized: μ(U_{j,h}) for j <= i at the horizon h
    (stage s when open), nonincreasing and ending at or below ε (default 2^-i).
    """
    bound = Dyadic(1, i)
    if test.kind == "generalized":
        target = epsilon if epsilon is not None else bound
        at = test.horizon if test.horizon is not None else s
        masses = []
        for j in range(i + 1):
            mass, error = _mass(test.stage(j, at), mu, precision)
            if error:
                raise PrecisionError("generalized audits need an exact measure")
            masses.append(mass)
        steady = all(b <= a for a, b in zip(masses, masses[1:], strict=False))
        return BoundVerdict(
            test.kind, i, s, masses[-1], target, steady and masses[-1] <= target,
            sequence=tuple(masses),
        )

    mass, error = _mass(test.stage(i, s), mu, precision)
    ok = _decide_at_most(mass, error, bound, f"μ(U_{i},{s})")
    if test.kind == "ml":
        return BoundVerdict(test.kind, i, s, mass, bound, ok)

    gaps = []
    for t in range(s + 1):
        m, _ = _mass(test.stage(i, t), mu, precision)
        gaps.append(bound - m)
    if all(g == gaps[0] for g in gaps):
        trend = "steady"
    elif all(b <= a for a, b in zip(gaps, gaps[1:], strict=False)):
        trend = "closing"
    else:
        trend = "irregular"
    return BoundVerdict(test.kind, i, s, mass, bound, ok, gap=bound - mass, trend=trend)


@dataclass(frozen=True)
class BoundAudit:
    test: str
    verdicts: tuple[BoundVerdict, ...]

    @property
    def first_violation(self) -> BoundVerdict | None:
        return next((v for v in self.verdicts if not v.ok), None)

    @property
    def ok(self) -> bool:
        return self.first_violation is None

    def render(self) -> str:
        lines = [f"# bound {self.test}", "# i\ts\tmass\tbound\tverdict"]
        lines += [v.render() for v in self.verdicts]
        first = self.first_violation
        if first is None:
            lines.append("# clean")
        else:
            lines.append(f"# first violation at i={first.i} s={first.s}")
        return "\n".join(lines) + "\n"


def audit_bounds(
    test: StagedTest,
    mu: MeasureOracle,
    components: Iterable[int],
    stages: Iterable[int],
    precision: int = 20,
) -> BoundAudit:
    """Every verdict on the (i, s) grid, in (i, s) lexicographic order."""
    stage_list = list(stages)
    verdicts = [
        check_bound(test, mu, i, s, precision)
        for i in sorted(components)
        for s in sorted(stage_list)
    ]
    audit = BoundAudit(test.name, tuple(verdicts))
    if not audit.ok:
        log.info("%s: first bound violation at %s", test.name,
                 (audit.first_violation.i, audit.first_violation.s))  # type: ignore[union-attr]
    return audit


@dataclass(frozen=True)
class MonotoneReport:
    test: str
    violations: tuple[tuple[int, int, BitString], ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def render(self) -> str:
        lines = [f"# monotone {self.test}"]
        lines += [f"{i}\t{s}\t{g or 'ε'}\tdropped" for i, s, g in self.violations]
        lines.append("clean" if self.ok else f"{len(self.violations)} violation(s)")
        return "\n".join(lines) + "\n"


def check_monotone(test: StagedTest, components: Iterable[int], stages: int) -> MonotoneReport:
    """Every generator of U_{i,s} stays covered at stage s + 1, for s < `stages`."""
    violations = []
    for i in sorted(components):
        for s in range(stages):
            later = test.stage(i, s + 1)
            for g in test.stage(i, s).generators:
                if not later.covers(g):
                    violations.append((i, s, g))
    return MonotoneReport(test.name, tuple(violations))


# --- capture ---


def capture_stage(
    test: StagedTest, x: Source, n: int, budget: int, strict: bool = False
) -> TallyValue:
    """The least s <= budget at which some generator of U_{n,s} prefixes X.

    `strict` also requires the generator to be shorter than s, the form the
    capture predicate of a tally functional uses. A finite input only runs
    short when a generator it has not ruled out needs bits past its end.
    """
    for s in range(budget + 1):
        stage = test.stage(n, s)
        longest = max(map(len, stage.generators), default=0)
        if strict:
            longest = min(longest, s - 1)
        if longest < 0:
            continue
        bits = read_upto(x, longest)
        if stage.covering_generator(bits, max_length=longest) is not None:
            return Finite(s)
        needs = [
            g for g in stage.generators if len(bits) < len(g) <= longest and is_prefix(bits, g)
        ]
        if needs:
            raise InputTooShort(f"input has {len(bits)} bits, generator {needs[0]!r} needs more")
    return Unknown(budget)


@dataclass(frozen=True)
class CaptureProfile:
    test: str
    values: tuple[TallyValue, ...]

    def render(self) -> str:
        lines = [f"# capture {self.test}"]
        lines += [f"{n}\t{value}" for n, value in enumerate(self.values)]
        return "\n".join(lines) + "\n"


def capture_profile(
    test: StagedTest, x: Source, n_max: int, budget: int, strict: bool = False
) -> CaptureProfile:
    """n ↦ capture stage for n < n_max."""
    return CaptureProfile(
        test.name, tuple(capture_stage(test, x, n, budget, strict) for n in range(n_max))
    )
