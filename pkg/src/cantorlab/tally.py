"""Tally functionals: block n of the output is 1^θ(X, n), closed by a 0."""

from __future__ import annotations

import logging
import threading
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from itertools import product
from typing import TYPE_CHECKING

from cantorlab.approximation import Finite, Infinite, MutationSchedule, TallyValue, Unknown, theta
from cantorlab.dyadic import ONE, ZERO, Dyadic
from cantorlab.errors import GammaInconsistency, GuardExceeded, InputTooShort
from cantorlab.functionals import TTFunctional
from cantorlab.measures import MeasureOracle
from cantorlab.sequences import (
    BitString,
    FiniteSource,
    Pattern,
    Source,
    is_prefix,
    read_upto,
    unjoin,
)

if TYPE_CHECKING:
    from cantorlab.mltests import StagedTest

log = logging.getLogger(__name__)

MAX_INPUT_BITS = 1 << 16


class Verdict(Enum):
    HOLDS = "holds"
    FAILS = "fails"
    NEEDS_INPUT = "needs-input"


@dataclass(frozen=True)
class ThetaPredicate:
    """Θ(X, n, s) evaluated on a finite prefix of X.

    `horizon` None means the stage set is open: a search that finds nothing
    ends in `Unknown`, never in `Infinite`.
    """

    eval: Callable[[BitString, int, int], Verdict] = field(repr=False)
    horizon: int | None = None
    name: str = "theta"


def least_stage(predicate: ThetaPredicate, x: Source, n: int, budget: int) -> TallyValue:
    """θ(X, n): the least s with Θ(X, n, s).

    Finite-horizon predicates are searched to the horizon; open ones to `budget`.
    """
    last = predicate.horizon if predicate.horizon is not None else budget
    length = n
    prefix = read_upto(x, length)
    for s in range(last + 1):
        verdict = predicate.eval(prefix, n, s)
        while verdict is Verdict.NEEDS_INPUT:
            length = max(2 * length, length + 1)
            if length > MAX_INPUT_BITS:
                raise GuardExceeded(f"{predicate.name} keeps asking for input at n={n}, s={s}")
            longer = read_upto(x, length)
            if len(longer) == len(prefix):
                raise InputTooShort(
                    f"{predicate.name} needs more than {len(prefix)} input bit(s) at n={n}, s={s}"
                )
            prefix = longer
            verdict = predicate.eval(prefix, n, s)
        if verdict is Verdict.HOLDS:
            return Finite(s)
    if predicate.horizon is not None:
        return Infinite()
    return Unknown(budget)


# --- schedule-driven functionals ---


class TallyFunctional(TTFunctional):
    def __init__(
        self,
        step: Callable[[BitString], BitString],
        use_bound: Callable[[int], int] | None,
        name: str,
        predicate: ThetaPredicate,
        mode: str,
        schedule: MutationSchedule | None = None,
    ) -> None:
        super().__init__(step, use_bound, name)
        self.predicate = predicate
        self.mode = mode
        self.schedule = schedule


def schedule_predicate(schedule: MutationSchedule) -> ThetaPredicate:
    """Θ(X, n, s) iff X↾n = A_s↾n."""

    def evaluate(prefix: BitString, n: int, s: int) -> Verdict:
        if len(prefix) < n:
            return Verdict.NEEDS_INPUT
        if schedule.approximant(s).take(n) == prefix[:n]:
            return Verdict.HOLDS
        return Verdict.FAILS

    return ThetaPredicate(evaluate, schedule.T, name=f"schedule {schedule.name}")


def make_phi_A(schedule: MutationSchedule) -> TallyFunctional:
    """Φ_A(X) = 1^θ(X,0) 0 1^θ(X,1) 0 ...

    Block n reads X↾n, so an input of length m - 1 settles m blocks and at
    least m output bits: use(m) = max(m - 1, 0).
    """

    def step(rho: BitString) -> BitString:
        x = FiniteSource(rho)
        out = []
        for n in range(len(rho) + 1):
            value = theta(schedule, x, n)
            if isinstance(value, Infinite):
                sigma = "".join(out)
                return sigma + "1" * max(0, len(rho) + 1 - len(sigma))
            out.append("1" * value.stage + "0")
        return "".join(out)

    return TallyFunctional(
        step,
        lambda m: max(m - 1, 0),
        f"phi {schedule.name}",
        schedule_predicate(schedule),
        "phi",
        schedule,
    )


def make_psi(schedule: MutationSchedule) -> TallyFunctional:
    """Ψ(X ⊕ Y) = y_0^t_0 y_1^t_1 ... with t_i = θ(X, i); an Infinite t_i gives y_i^ω.

    Ψ outputs nothing on A_0 ⊕ Y, so it has no use bound.
    """

    def step(rho: BitString) -> BitString:
        xs, ys = rho[0::2], rho[1::2]
        x = FiniteSource(xs)
        out = []
        for i in range(len(ys)):
            value = theta(schedule, x, i)
            if isinstance(value, Infinite):
                return "".join(out) + ys[i] * len(rho)
            out.append(ys[i] * value.stage)
        return "".join(out)

    return TallyFunctional(
        step, None, f"psi {schedule.name}", schedule_predicate(schedule), "psi", schedule
    )


# --- Γ agreement and test capture ---

GammaValue = str | None | Verdict
GammaOracle = Callable[[BitString, int, int], GammaValue]


def identity_read(prefix: BitString, k: int, s: int) -> GammaValue:
    """Γ_s(X)(k) = X(k) once s >= k + 1."""
    if s < k + 1:
        return None
    if len(prefix) <= k:
        return Verdict.NEEDS_INPUT
    return prefix[k]


def diverging_at(position: int) -> GammaOracle:
    def read(prefix: BitString, k: int, s: int) -> GammaValue:
        if k == position:
            return None
        return identity_read(prefix, k, s)

    return read


def make_theta_gamma(
    gamma: GammaOracle,
    b_schedule: MutationSchedule,
    horizon: int | None = None,
    name: str = "gamma",
) -> ThetaPredicate:
    """Θ(X, n, s) iff Γ_s(X)(k) has converged to B_s(k) for every k < n.

    A Γ value that changes, or disappears, after converging raises
    `GammaInconsistency`.
    """
    converged: dict[tuple[BitString, int], tuple[int, str]] = {}
    lock = threading.Lock()

    def read(prefix: BitString, k: int, s: int) -> GammaValue:
        value = gamma(prefix, k, s)
        if value is Verdict.NEEDS_INPUT:
            return value
        if value not in (None, "0", "1"):
            raise GammaInconsistency(f"{name}: Γ({prefix!r})({k}) at stage {s} gave {value!r}")
        key = (prefix, k)
        with lock:
            seen = converged.get(key)
            if seen is not None:
                s0, v0 = seen
                if (s >= s0 and value != v0) or (value is not None and value != v0):
                    raise GammaInconsistency(
                        f"{name}: Γ({prefix!r})({k}) converged to {v0} at stage {s0}, "
                        f"then gave {value} at stage {s}"
                    )
                if value is not None and s < s0:
                    converged[key] = (s, value)
            elif value is not None:
                converged[key] = (s, value)
        return value

    def evaluate(prefix: BitString, n: int, s: int) -> Verdict:
        b = b_schedule.approximant(s)
        for k in range(n):
            value = read(prefix, k, s)
            if value is Verdict.NEEDS_INPUT:
                return value
            if value is None or value != b.bit(k):
                return Verdict.FAILS
        return Verdict.HOLDS

    return ThetaPredicate(evaluate, horizon, name=name)


def make_theta_test(test: StagedTest) -> ThetaPredicate:
    """Θ(X, n, s) iff some generator g of U_{n,s} with |g| < s is a prefix of X."""

    def evaluate(prefix: BitString, n: int, s: int) -> Verdict:
        short = [g for g in test.stage(n, s).generators if len(g) < s]
        if any(is_prefix(g, prefix) for g in short):
            return Verdict.HOLDS
        if any(len(g) > len(prefix) and is_prefix(prefix, g) for g in short):
            return Verdict.NEEDS_INPUT
        return Verdict.FAILS

    return ThetaPredicate(evaluate, None, name=f"test {test.name}")


# --- output ---


@dataclass(frozen=True)
class TallyOutput:
    blocks: tuple[TallyValue, ...]
    rendered: BitString
    tail: str | None = None
    unknown: bool = False

    @property
    def pattern(self) -> Pattern | None:
        """The whole output when an Infinite block closed it."""
        return Pattern(self.rendered, self.tail) if self.tail is not None else None

    def bits(self, width: int) -> BitString:
        if self.tail is None:
            return self.rendered[:width]
        return self.rendered + self.tail * max(0, width - len(self.rendered))

    def text(self) -> str:
        if self.pattern is not None:
            return str(self.pattern)
        return self.rendered + ("?" if self.unknown else "")


def render_blocks(blocks: list[TallyValue], fill: Source | None = None) -> TallyOutput:
    """Φ rendering (`1^t 0` per block) or, with a fill source, Ψ rendering (`y_i^t`)."""
    parts: list[str] = []
    tail = None
    unknown = False
    for i, value in enumerate(blocks):
        bit = "1" if fill is None else fill.take(i + 1)[i]
        if isinstance(value, Finite):
            parts.append(bit * value.stage + ("0" if fill is None else ""))
        elif isinstance(value, Infinite):
            tail = bit
            break
        else:
            # the block is at least budget + 1 long, whatever θ turns out to be
            parts.append(bit * (value.budget + 1))
            unknown = True
            break
    return TallyOutput(tuple(blocks), "".join(parts), tail, unknown)


def tally_output(
    target: TallyFunctional | ThetaPredicate, x: Source, n_blocks: int, budget: int
) -> TallyOutput:
    """The first `n_blocks` blocks, stopping at the first block that is not Finite."""
    if isinstance(target, ThetaPredicate):
        predicate, mode = target, "phi"
    else:
        predicate, mode = target.predicate, target.mode
    fill = None
    if mode == "psi":
        x, fill = unjoin(x, 2, 0), unjoin(x, 2, 1)
    blocks: list[TallyValue] = []
    for n in range(n_blocks):
        value = least_stage(predicate, x, n, budget)
        blocks.append(value)
        if not isinstance(value, Finite):
            break
    output = render_blocks(blocks, fill)
    if output.unknown:
        log.info("%s: block %d undecided within budget %d", predicate.name, len(blocks) - 1, budget)
    return output


# --- exact induced measures ---


@dataclass(frozen=True)
class Escape:
    """Inputs whose first Infinite block comes right after `blocks`."""

    blocks: tuple[int, ...]
    mass: Dyadic


@dataclass(frozen=True)
class TrackFamily:
    """Inputs below a node at which every matching stage denotes the same sequence.

    An input that first leaves that sequence at position k >= depth escapes
    after blocks + (stage,) * (k - depth), with mass 2^-(k+1).
    """

    depth: int
    blocks: tuple[int, ...]  # θ(X, n) for n = 0..depth

    @property
    def stage(self) -> int:
        return self.blocks[-1]

    @property
    def mass(self) -> Dyadic:
        return Dyadic(1, self.depth)

    def member(self, k: int) -> Escape:
        return Escape(self.blocks + (self.stage,) * (k - self.depth), Dyadic(1, k + 1))


def _render_phi(blocks: tuple[int, ...]) -> BitString:
    return "".join("1" * t + "0" for t in blocks)


def _finite_length(mode: str, blocks: tuple[int, ...]) -> int:
    return sum(t + 1 for t in blocks) if mode == "phi" else sum(blocks)


def _hit(mode: str, blocks: tuple[int, ...], sigma: BitString) -> Dyadic:
    """Probability that σ prefixes the output of an escape with these blocks."""
    if mode == "phi":
        out = _render_phi(blocks)
        k = min(len(out), len(sigma))
        if out[:k] != sigma[:k] or sigma[len(out):].strip("1"):
            return ZERO
        return ONE
    # each non-empty block, and the endless last one, is one fair fill bit
    prob, pos = ONE, 0
    for t in [t for t in blocks if t] + [None]:
        if pos >= len(sigma):
            break
        part = sigma[pos:] if t is None else sigma[pos : pos + t]
        if len(set(part)) > 1:
            return ZERO
        prob = prob.halve()
        if t is None:
            break
        pos += t
    return prob


def _atoms_of(mode: str, escape: Escape, min_mass: Dyadic) -> list[tuple[Pattern, Dyadic]]:
    if mode == "phi":
        if escape.mass < min_mass:
            return []
        return [(Pattern(_render_phi(escape.blocks), "1"), escape.mass)]
    runs = [t for t in escape.blocks if t]
    share = escape.mass.halve(len(runs) + 1)
    if share < min_mass:
        return []
    atoms = []
    for fills in product("01", repeat=len(runs) + 1):
        head = "".join(y * t for y, t in zip(fills, runs, strict=False))
        atoms.append((Pattern(head, fills[-1]), share))
    return atoms


class TallyDecomposition:
    """The induced measure of Φ_A (or Ψ) as finitely many escapes and tracking families."""

    def __init__(
        self,
        schedule: MutationSchedule,
        mode: str,
        escapes: tuple[Escape, ...],
        families: tuple[TrackFamily, ...],
    ) -> None:
        self.schedule = schedule
        self.mode = mode
        self.escapes = escapes
        self.families = families

    @cached_property
    def total_mass(self) -> Dyadic:
        total = ZERO
        for escape in self.escapes:
            total += escape.mass
        for family in self.families:
            total += family.mass
        return total

    @property
    def is_trivial(self) -> bool:
        """Atoms carry all the mass; every piece of the decomposition is atomic."""
        return self.total_mass == ONE

    def probability(self, sigma: BitString) -> Dyadic:
        total = ZERO
        for escape in self.escapes:
            total += escape.mass * _hit(self.mode, escape.blocks, sigma)
        for family in self.families:
            width = family.stage + 1 if self.mode == "phi" else family.stage
            covered = _finite_length(self.mode, family.blocks)
            if width == 0:
                settled = family.depth
            else:
                settled = family.depth + max(0, -(-(len(sigma) - covered) // width))
            for k in range(family.depth, settled):
                member = family.member(k)
                total += member.mass * _hit(self.mode, member.blocks, sigma)
            # members from `settled` on all agree with σ; their masses sum to 2^-settled
            total += Dyadic(1, settled) * _hit(self.mode, family.member(settled).blocks, sigma)
        return total

    def atoms(self, min_mass: Dyadic) -> list[tuple[Pattern, Dyadic]]:
        """Atoms with a contribution of at least `min_mass`, merged and sorted by pattern."""
        if min_mass <= 0:
            raise ValueError("min_mass must be positive")
        merged: dict[Pattern, Dyadic] = {}

        def add(pairs: list[tuple[Pattern, Dyadic]]) -> None:
            for pattern, mass in pairs:
                merged[pattern] = merged.get(pattern, ZERO) + mass

        for escape in self.escapes:
            add(_atoms_of(self.mode, escape, min_mass))
        for family in self.families:
            if self.mode == "psi" and family.stage == 0:
                # zero-length blocks add no fill bits: every member has the same output law
                add(_atoms_of(self.mode, Escape(family.blocks, family.mass), min_mass))
                continue
            k = family.depth
            while Dyadic(1, k + 1) >= min_mass:
                add(_atoms_of(self.mode, family.member(k), min_mass))
                k += 1
        return sorted(merged.items(), key=lambda item: str(item[0]))

    @cached_property
    def oracle(self) -> MeasureOracle:
        value = lru_cache(maxsize=4096)(self.probability)
        return MeasureOracle(
            lambda sigma, i: value(sigma),
            exact=True,
            name=f"tally {self.mode} {self.schedule.name}",
        )


def tally_induced_measure(
    schedule: MutationSchedule, mode: str = "phi", depth_guard: int = 40
) -> TallyDecomposition:
    """Decompose the input tree by the set of stages still matching each node.

    No stage matches: every input below escapes here. All matching stages
    denote one sequence: a tracking family. Otherwise the node splits.
    """
    if mode not in ("phi", "psi"):
        raise ValueError(f"unknown mode {mode!r}")
    approximants = schedule.approximants
    escapes: list[Escape] = []
    families: list[TrackFamily] = []

    def blocks(rho: BitString, count: int) -> tuple[int, ...]:
        return tuple(
            next(s for s, a in enumerate(approximants) if a.take(n) == rho[:n])
            for n in range(count)
        )

    def explore(rho: BitString) -> None:
        d = len(rho)
        if d > depth_guard:
            raise GuardExceeded(f"decomposition of {schedule.name} deeper than {depth_guard}")
        matching = [s for s, a in enumerate(approximants) if a.take(d) == rho]
        if not matching:
            escapes.append(Escape(blocks(rho, d), Dyadic(1, d)))
        elif len({approximants[s] for s in matching}) == 1:
            families.append(TrackFamily(d, blocks(rho, d + 1)))
        else:
            log.debug("%s: split at %r, stages %s", schedule.name, rho, matching)
            explore(rho + "0")
            explore(rho + "1")

    explore("")
    decomposition = TallyDecomposition(schedule, mode, tuple(escapes), tuple(families))
    log.info(
        "%s (%s): %d escape(s), %d family(ies)",
        schedule.name, mode, len(escapes), len(families),
    )
    return decomposition
