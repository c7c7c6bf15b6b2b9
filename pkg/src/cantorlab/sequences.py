from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass
from itertools import product

from cantorlab.errors import InputTooShort, ParseError

BitString = str


def check_bits(text: str, what: str = "bit string") -> BitString:
    if text.strip("01"):
        raise ParseError(f"{what} may only contain 0 and 1: {text!r}")
    return text


def is_prefix(sigma: BitString, tau: BitString) -> bool:
    """σ ⪯ τ."""
    return tau.startswith(sigma)


def compatible(sigma: BitString, tau: BitString) -> bool:
    return sigma.startswith(tau) or tau.startswith(sigma)


def strings(length: int) -> Iterator[BitString]:
    """All strings of the given length in lexicographic order."""
    for bits in product("01", repeat=length):
        yield "".join(bits)


def strings_upto(depth: int) -> Iterator[BitString]:
    for length in range(depth + 1):
        yield from strings(length)


def _primitive_root(word: str) -> str:
    n = len(word)
    for d in range(1, n + 1):
        if n % d == 0 and word[:d] * (n // d) == word:
            return word[:d]
    return word


@dataclass(frozen=True)
class Pattern:
    """prefix followed by tail forever, kept canonical so equal sequences compare equal."""

    prefix: BitString
    tail: BitString

    def __post_init__(self) -> None:
        check_bits(self.prefix, "pattern prefix")
        check_bits(self.tail, "pattern tail")
        if not self.tail:
            raise ParseError("pattern tail must be non-empty")
        prefix, tail = self.prefix, _primitive_root(self.tail)
        while prefix and prefix[-1] == tail[-1]:
            prefix, tail = prefix[:-1], tail[-1] + tail[:-1]
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "tail", tail)

    @classmethod
    def parse(cls, text: str) -> Pattern:
        """`prefix+tail`, e.g. `+0` (all zeros) or `101+10`; a bare word `w` means `+w`."""
        text = text.strip()
        if "+" in text:
            prefix, _, tail = text.partition("+")
        else:
            prefix, tail = "", text
        return cls(prefix, tail)

    @classmethod
    def constant(cls, bit: str) -> Pattern:
        return cls("", bit)

    def bit(self, k: int) -> str:
        if k < len(self.prefix):
            return self.prefix[k]
        return self.tail[(k - len(self.prefix)) % len(self.tail)]

    def take(self, n: int) -> BitString:
        if n <= len(self.prefix):
            return self.prefix[:n]
        rest = n - len(self.prefix)
        reps = -(-rest // len(self.tail))
        return self.prefix + (self.tail * reps)[:rest]

    def agreement_bound(self, other: Pattern) -> int:
        """A length past which two patterns agree everywhere iff they agree up to it."""
        return max(len(self.prefix), len(other.prefix)) + math.lcm(len(self.tail), len(other.tail))

    def first_difference(self, other: Pattern) -> int | None:
        bound = self.agreement_bound(other)
        a, b = self.take(bound), other.take(bound)
        for k in range(bound):
            if a[k] != b[k]:
                return k
        return None

    def flip(self, positions: frozenset[int] | set[int]) -> Pattern:
        if not positions:
            return self
        width = max(positions) + 1
        bits = list(self.take(max(width, len(self.prefix))))
        for p in positions:
            bits[p] = "1" if bits[p] == "0" else "0"
        # the tail must resume where the expanded prefix stops
        offset = (len(bits) - len(self.prefix)) % len(self.tail)
        tail = self.tail[offset:] + self.tail[:offset]
        return Pattern("".join(bits), tail)

    def __str__(self) -> str:
        return f"{self.prefix}+{self.tail}"


def join(*patterns: Pattern) -> Pattern:
    """The interleaving ⊕: bit ℓ·m + j of the join is bit m of the j-th pattern."""
    if not patterns:
        raise ValueError("join of no sequences")
    width = len(patterns)
    head = max(len(p.prefix) for p in patterns)
    period = math.lcm(*(len(p.tail) for p in patterns))
    columns = [p.take(head + period) for p in patterns]
    bits = "".join(columns[j][m] for m in range(head + period) for j in range(width))
    return Pattern(bits[: head * width], bits[head * width :])


def split(bits: BitString, width: int, column: int) -> BitString:
    """Column `column` of a finite prefix of a `width`-fold join."""
    return bits[column::width]


def column(pattern: Pattern, width: int, j: int) -> Pattern:
    """The j-th component of a `width`-fold join, as a pattern."""
    # bit m of the column is bit width*m + j, periodic once width*m + j >= len(prefix)
    start = max(0, -(-(len(pattern.prefix) - j) // width))
    period = len(pattern.tail)
    bits = pattern.take(width * (start + period) + j + 1)
    col = bits[j::width]
    return Pattern(col[:start], col[start : start + period])


def unjoin(source: Pattern | FiniteSource, width: int, j: int) -> Pattern | FiniteSource:
    if isinstance(source, Pattern):
        return column(source, width, j)
    return FiniteSource(split(source.bits, width, j))


class FiniteSource:
    """A finite input that raises `InputTooShort` past its end."""

    def __init__(self, bits: BitString) -> None:
        self.bits = check_bits(bits)

    def take(self, n: int) -> BitString:
        if n > len(self.bits):
            raise InputTooShort(f"input has {len(self.bits)} bits, {n} needed")
        return self.bits[:n]

    def __str__(self) -> str:
        return self.bits


Source = Pattern | FiniteSource


def read_upto(source: Source, n: int) -> BitString:
    """Up to n bits; a finite input gives what it has."""
    if isinstance(source, FiniteSource):
        return source.bits[:n]
    return source.take(n)


def as_source(value: Pattern | FiniteSource | str) -> Source:
    if isinstance(value, (Pattern, FiniteSource)):
        return value
    return FiniteSource(value)
