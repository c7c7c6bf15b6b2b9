from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from cantorlab.dyadic import ONE, ZERO, Dyadic
from cantorlab.errors import CantorlabError, OracleError, PrecisionError
from cantorlab.sequences import BitString, Pattern, is_prefix, strings_upto

log = logging.getLogger(__name__)

Approximation = Callable[[BitString, int], Dyadic]


@dataclass(frozen=True)
class MeasureOracle:
    """`approx(σ, i)` is within 2^-i of μ(⟦σ⟧); exact oracles ignore i."""

    approx: Approximation = field(repr=False)
    exact: bool = False
    name: str = "measure"

    def __str__(self) -> str:
        return self.name


def measure_eval(mu: MeasureOracle, sigma: BitString, i: int = 0) -> Dyadic:
    """A dyadic within 2^-i of μ(σ), exact when the oracle is.

    A valid approximation of a tiny mass may be negative; it is clamped to 0.
    """
    if i < 0:
        raise ValueError(f"precision must be >= 0, got {i}")
    try:
        value = mu.approx(sigma, i)
    except CantorlabError:
        raise
    except Exception as exc:
        raise OracleError(f"{mu.name} failed on ({sigma!r}, {i}): {exc}") from exc
    if not isinstance(value, Dyadic):
        raise OracleError(f"{mu.name} returned {value!r} for {sigma!r}, not a dyadic")
    if value < 0:
        log.warning("%s(%r, %d) = %s clamped to 0", mu.name, sigma, i, value)
        return ZERO
    return value


def lebesgue(sigma: BitString) -> Dyadic:
    return Dyadic(1, len(sigma))


LEBESGUE = MeasureOracle(lambda sigma, i: lebesgue(sigma), exact=True, name="lebesgue")


def point_mass(atom: Pattern) -> MeasureOracle:
    def approx(sigma: BitString, i: int) -> Dyadic:
        return ONE if atom.take(len(sigma)) == sigma else ZERO

    return MeasureOracle(approx, exact=True, name=f"point {atom}")


def convex_sum(mu: MeasureOracle, nu: MeasureOracle, alpha: Dyadic) -> MeasureOracle:
    """ρ = α·μ + (1−α)·ν, operands queried at precision i+2."""
    if alpha < 0 or alpha > 1:
        raise ValueError(f"weight {alpha} outside [0, 1]")
    beta = ONE - alpha

    def approx(sigma: BitString, i: int) -> Dyadic:
        return alpha * measure_eval(mu, sigma, i + 2) + beta * measure_eval(nu, sigma, i + 2)

    return MeasureOracle(
        approx, exact=mu.exact and nu.exact, name=f"{alpha}*({mu.name}) + {beta}*({nu.name})"
    )


def uniform_mixture(oracles: Sequence[MeasureOracle], name: str | None = None) -> MeasureOracle:
    """(1/k) Σ μ_j with 1/k rounded at a precision that keeps the total error <= 2^-i.

    With p = i + 2 + bitlen(k): weight error k·2^-p and operand error
    (1 + k·2^-p)·2^-p each stay below 2^-(i+2).
    """
    k = len(oracles)
    if k == 0:
        raise ValueError("mixture of no measures")
    weight = Fraction(1, k)
    dyadic_weight = k & (k - 1) == 0
    exact = dyadic_weight and all(o.exact for o in oracles)

    def approx(sigma: BitString, i: int) -> Dyadic:
        p = i + 2 + k.bit_length()
        w = Dyadic.from_fraction(weight) if dyadic_weight else Dyadic.round_down(weight, p)
        total = ZERO
        for oracle in oracles:
            total += w * measure_eval(oracle, sigma, p)
        return total

    label = name or "uniform(" + ", ".join(o.name for o in oracles) + ")"
    return MeasureOracle(approx, exact=exact, name=label)


class CylinderSet:
    """A finite union of cylinders ⟦g⟧, stored as a prefix-free generator set."""

    def __init__(self, generators: Iterable[BitString] = ()) -> None:
        kept: list[BitString] = []
        for g in sorted(set(generators), key=lambda s: (len(s), s)):
            if not any(is_prefix(h, g) for h in kept):
                kept.append(g)
        self.generators: tuple[BitString, ...] = tuple(sorted(kept))

    def union(self, other: CylinderSet) -> CylinderSet:
        return CylinderSet(self.generators + other.generators)

    def covers(self, sigma: BitString) -> bool:
        """⟦σ⟧ ⊆ this set, decided exactly from the generators."""
        return any(is_prefix(g, sigma) for g in self.generators)

    def covering_generator(
        self, bits: BitString, max_length: int | None = None
    ) -> BitString | None:
        for g in self.generators:
            if (max_length is None or len(g) <= max_length) and is_prefix(g, bits):
                return g
        return None

    def measure(self, mu: MeasureOracle, i: int = 0) -> Dyadic:
        """μ of the union; with n generators queried at i + bitlen(n), error <= 2^-i."""
        p = i + len(self.generators).bit_length()
        total = ZERO
        for g in self.generators:
            total += measure_eval(mu, g, p)
        return total

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CylinderSet) and self.generators == other.generators

    def __hash__(self) -> int:
        return hash(self.generators)

    def __len__(self) -> int:
        return len(self.generators)

    def __repr__(self) -> str:
        return f"CylinderSet({list(self.generators)!r})"


# --- audits ---


@dataclass(frozen=True)
class AdditivityEntry:
    sigma: BitString
    deviation: Dyadic
    flagged: bool


@dataclass(frozen=True)
class AdditivityReport:
    measure: str
    depth: int
    precision: int | None
    entries: tuple[AdditivityEntry, ...]

    @property
    def violations(self) -> tuple[AdditivityEntry, ...]:
        return tuple(e for e in self.entries if e.flagged)

    @property
    def ok(self) -> bool:
        return not self.violations

    def render(self) -> str:
        lines = [f"# additivity {self.measure} depth={self.depth}"]
        for e in self.entries:
            lines.append(f"{e.sigma or 'ε'}\t{e.deviation}\t{'FLAG' if e.flagged else 'ok'}")
        lines.append(f"# {len(self.violations)} violation(s)")
        return "\n".join(lines) + "\n"


def check_additivity(mu: MeasureOracle, depth: int, i: int = 0) -> AdditivityReport:
    """|μ̂(σ) − μ̂(σ0) − μ̂(σ1)| for every |σ| < depth, queried at precision i+2."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    tolerance = ZERO if mu.exact else Dyadic(3, i + 2)
    entries = []
    for sigma in strings_upto(depth - 1):
        parent = measure_eval(mu, sigma, i + 2)
        children = measure_eval(mu, sigma + "0", i + 2) + measure_eval(mu, sigma + "1", i + 2)
        deviation = abs(parent - children)
        entries.append(AdditivityEntry(sigma, deviation, deviation > tolerance))
    report = AdditivityReport(mu.name, depth, None if mu.exact else i, tuple(entries))
    if not report.ok:
        log.info("%s: %d additivity violation(s)", mu.name, len(report.violations))
    return report


def atom_candidates(
    mu: MeasureOracle, depth: int, delta: Dyadic, i: int | None = None
) -> list[tuple[BitString, Dyadic]]:
    """Every σ of length `depth` with μ(σ) >= δ, with its (approximate) mass.

    Every atom of mass >= δ lies in one of the returned cylinders.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if mu.exact:
        error, precision = ZERO, 0
    else:
        if i is None:
            raise PrecisionError(f"{mu.name} is inexact; a precision is required")
        error, precision = Dyadic(1, i), i
        if error * 2 >= delta:
            raise PrecisionError(f"2^-{i} is not below δ/2 = {delta.halve()}")

    frontier: list[tuple[BitString, Dyadic]] = [("", measure_eval(mu, "", precision))]
    for _ in range(depth):
        grown = []
        for sigma, _value in frontier:
            for child in (sigma + "0", sigma + "1"):
                value = measure_eval(mu, child, precision)
                if value + error >= delta:
                    grown.append((child, value))
        frontier = grown

    result = []
    for sigma, value in frontier:
        if value - error >= delta:
            result.append((sigma, value))
        elif value + error >= delta and error:
            raise PrecisionError(f"cannot decide μ({sigma}) >= {delta} at precision 2^-{i}")
    return result


def render_measure_line(sigma: BitString, value: Dyadic, precision: int | None) -> str:
    """The measure report line `σ<TAB>value<TAB>precision`."""
    where = "exact" if precision is None else f"2^-{precision}"
    return f"{sigma or 'ε'}\t{value}\t{where}"
