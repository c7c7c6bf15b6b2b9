from __future__ import annotations

import logging
import threading
from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from cantorlab.dyadic import Dyadic
from cantorlab.errors import FunctionalError, GuardExceeded, MonotonicityError, ParseError
from cantorlab.measures import MeasureOracle
from cantorlab.sequences import BitString, Pattern, check_bits, compatible, is_prefix, strings

log = logging.getLogger(__name__)

Step = Callable[[BitString], BitString]
UseBound = Callable[[int], int]

DEFAULT_GUARD_BITS = 24
CACHE_SIZE = 4096


class TTFunctional:
    def __init__(
        self,
        step: Step,
        use_bound: UseBound | None,
        name: str = "functional",
        cache_size: int = CACHE_SIZE,
    ) -> None:
        self.step = step
        self.use_bound = use_bound
        self.name = name
        self.cache_size = cache_size
        # insertion ordered; the oldest entry goes first when full
        self._cache: dict[BitString, BitString] = {}
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"TTFunctional({self.name!r})"


def tt_apply(phi: TTFunctional, rho: BitString) -> BitString:
    """The output prefix determined by ρ, checked against the shorter inputs still cached."""
    with phi._lock:
        cached = phi._cache.get(rho)
    if cached is not None:
        return cached
    out = phi.step(rho)
    with phi._lock:
        for k in range(len(rho)):
            earlier = phi._cache.get(rho[:k])
            if earlier is not None and not is_prefix(earlier, out):
                log.warning("%s: step(%r)=%r does not extend step(%r)=%r",
                            phi.name, rho, out, rho[:k], earlier)
                raise MonotonicityError(
                    f"{phi.name}: output {out!r} on {rho!r} "
                    f"does not extend {earlier!r} on {rho[:k]!r}"
                )
        if len(phi._cache) >= phi.cache_size:
            del phi._cache[next(iter(phi._cache))]
        phi._cache[rho] = out
    return out


# --- builtins ---


def identity() -> TTFunctional:
    return TTFunctional(lambda rho: rho, lambda n: n, name="identity")


def constant(pattern: Pattern) -> TTFunctional:
    return TTFunctional(lambda rho: pattern.take(len(rho)), lambda n: n, name=f"constant {pattern}")


def project_even() -> TTFunctional:
    """Φ(X)(n) = X(2n)."""
    return TTFunctional(lambda rho: rho[::2], lambda n: 2 * n, name="project-even")


def compose(first: TTFunctional, second: TTFunctional) -> TTFunctional:
    """`second` applied to the output of `first`; use(n) = u_first(u_second(n))."""

    def step(rho: BitString) -> BitString:
        return tt_apply(second, tt_apply(first, rho))

    use = None
    if first.use_bound is not None and second.use_bound is not None:
        u1, u2 = first.use_bound, second.use_bound

        def use(n: int) -> int:
            return u1(u2(n))

    return TTFunctional(step, use, name=f"{second.name} . {first.name}")


def from_table(
    table: dict[BitString, BitString], uses: list[int], name: str = "table"
) -> TTFunctional:
    """A functional answering with the row of the longest key that prefixes the input.

    `uses[n]` is the use bound for `n` output bits; the bound is undefined past
    the end of the list.
    """
    keys = sorted(table, key=len, reverse=True)

    def step(rho: BitString) -> BitString:
        for key in keys:
            if is_prefix(key, rho):
                return table[key]
        return ""

    def use(n: int) -> int:
        if n >= len(uses):
            raise FunctionalError(f"{name}: use bound undefined for {n} output bits")
        return uses[n]

    return TTFunctional(step, use, name=name)


def _word(token: str) -> BitString:
    return "" if token in ("ε", "-") else check_bits(token)


def parse_table(text: str, source: str = "<table>") -> TTFunctional:
    """Parse a truth-table file::

        table:
        use: 0 1 2
        0 -> 0
        1 -> 11

    `functional table` is accepted as the header too.
    """
    rows = _content_lines(text)
    if not rows or not _is_table_header(rows[0][1]):
        raise ParseError("expected header 'table:'", 1, source)
    uses: list[int] | None = None
    table: dict[BitString, BitString] = {}
    for lineno, line in rows[1:]:
        try:
            if line.startswith("use:"):
                uses = [int(tok) for tok in line.removeprefix("use:").split()]
                continue
            left, arrow, right = line.partition("->")
            if not arrow:
                raise ParseError("expected 'ρ -> τ'")
            rho, tau = _word(left.strip()), _word(right.strip())
        except ParseError as exc:
            raise ParseError(str(exc), lineno, source) from None
        except ValueError:
            raise ParseError(f"bad use line {line!r}", lineno, source) from None
        if rho in table:
            raise ParseError(f"duplicate row for {rho or 'ε'!r}", lineno, source)
        table[rho] = tau
    if uses is None:
        raise ParseError("missing 'use:' line", None, source)
    return from_table(table, uses, name=Path(source).stem)


def _is_table_header(line: str) -> bool:
    return line == "table:" or line.split() == ["functional", "table"]


def _content_lines(text: str) -> list[tuple[int, str]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((lineno, line))
    return out


def load_functional(spec: str, base_dir: Path | None = None) -> TTFunctional:
    """Resolve a builtin (`identity`, `constant <pattern>`, `project-even`,
    `tally <schedule-file>`) or a functional file holding either form."""
    words = spec.split()
    if not words:
        raise ParseError("empty functional spec")
    head, rest = words[0], words[1:]
    if head == "identity" and not rest:
        return identity()
    if head == "project-even" and not rest:
        return project_even()
    if head == "constant" and len(rest) == 1:
        return constant(Pattern.parse(rest[0]))
    if head == "tally" and len(rest) == 1:
        from cantorlab.approximation import load_schedule
        from cantorlab.tally import make_phi_A

        path = Path(rest[0])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return make_phi_A(load_schedule(path))

    path = Path(spec)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.is_file():
        raise ParseError(f"unknown functional {spec!r}")
    text = path.read_text()
    rows = _content_lines(text)
    if rows and _is_table_header(rows[0][1]):
        return parse_table(text, source=str(path))
    if len(rows) == 1:
        return load_functional(rows[0][1], base_dir=path.parent)
    raise ParseError("expected a builtin line or a 'table:'", None, str(path))


# --- induced measure ---


def induced_measure(
    phi: TTFunctional,
    sigma: BitString,
    guard_bits: int = DEFAULT_GUARD_BITS,
    exhaustive: bool = False,
) -> Dyadic:
    """λ_Φ(σ) = |{ρ ∈ 2^u : σ ⪯ Φ(ρ)}| · 2^-u with u = use(|σ|).

    The default walk prunes subtrees whose output already decides σ; the
    exhaustive walk visits every input of length u and gives the same count.
    """
    if phi.use_bound is None:
        raise FunctionalError(f"{phi.name} has no use bound; its induced measure is not enumerable")
    u = phi.use_bound(len(sigma))
    if u > guard_bits:
        raise GuardExceeded(
            f"use bound {u} for |σ|={len(sigma)} exceeds guard of {guard_bits} bits"
        )

    if exhaustive:
        count = sum(1 for rho in strings(u) if is_prefix(sigma, tt_apply(phi, rho)))
        return Dyadic(count, u)

    def walk(rho: BitString) -> int:
        out = tt_apply(phi, rho)
        if is_prefix(sigma, out):
            return 1 << (u - len(rho))
        if not compatible(sigma, out):
            return 0
        if len(rho) >= u:
            raise FunctionalError(
                f"{phi.name}: {len(out)} output bits on {rho!r}, use bound promised {len(sigma)}"
            )
        return walk(rho + "0") + walk(rho + "1")

    count = walk("")
    log.debug("%s: λ_Φ(%s) = %d/2^%d", phi.name, sigma or "ε", count, u)
    return Dyadic(count, u)


def induced_oracle(phi: TTFunctional, guard_bits: int = DEFAULT_GUARD_BITS) -> MeasureOracle:
    @lru_cache(maxsize=4096)
    def value(sigma: BitString) -> Dyadic:
        return induced_measure(phi, sigma, guard_bits)

    return MeasureOracle(lambda sigma, i: value(sigma), exact=True, name=f"induced {phi.name}")


# --- verification ---


@dataclass(frozen=True)
class Violation:
    kind: str  # "monotone" | "use" | "use-order"
    witness: BitString | int
    detail: str


@dataclass(frozen=True)
class VerifyReport:
    functional: str
    depth: int
    violations: tuple[Violation, ...]
    notes: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def render(self) -> str:
        lines = [f"# verify {self.functional} depth={self.depth}"]
        lines += [f"# note: {note}" for note in self.notes]
        for v in self.violations:
            witness = v.witness if isinstance(v.witness, int) else (v.witness or "ε")
            lines.append(f"{v.kind}\t{witness}\t{v.detail}")
        lines.append("clean" if self.ok else f"{len(self.violations)} violation(s)")
        return "\n".join(lines) + "\n"


def _use_or_none(use: UseBound, n: int) -> int | None:
    try:
        return use(n)
    except FunctionalError:
        return None


def tt_verify(phi: TTFunctional, depth: int) -> VerifyReport:
    """Audit monotonicity on parent/child pairs and the use bound on every input to `depth`.

    The use check is per input: with n = |Φ(ρ)| + 1 output bits missing at ρ,
    the bound must demand more than |ρ| input bits.
    """
    violations: list[Violation] = []
    notes: list[str] = []
    outputs: dict[BitString, BitString] = {}
    for length in range(depth + 1):
        for rho in strings(length):
            outputs[rho] = phi.step(rho)
            if rho:
                parent = outputs[rho[:-1]]
                if not is_prefix(parent, outputs[rho]):
                    violations.append(Violation(
                        "monotone", rho, f"{outputs[rho] or 'ε'} does not extend {parent or 'ε'}"
                    ))

    if phi.use_bound is None:
        notes.append("no use bound; totality not audited")
    else:
        for rho, out in outputs.items():
            n = len(out) + 1
            u = _use_or_none(phi.use_bound, n)
            if u is not None and u <= len(rho):
                violations.append(Violation(
                    "use", rho, f"use({n})={u} but only {len(out)} output bit(s)"
                ))
        bounds = []
        for n in range(max(len(out) for out in outputs.values()) + 2):
            u = _use_or_none(phi.use_bound, n)
            if u is None:
                break
            bounds.append(u)
        for n in range(1, len(bounds)):
            if bounds[n] < bounds[n - 1]:
                violations.append(Violation(
                    "use-order", n, f"use({n})={bounds[n]} < use({n - 1})={bounds[n - 1]}"
                ))

    report = VerifyReport(phi.name, depth, tuple(violations), tuple(notes))
    log.info("%s: verified to depth %d, %d violation(s)", phi.name, depth, len(violations))
    return report
