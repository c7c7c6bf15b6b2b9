"""Exact dyadic rationals n/2^e."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from cantorlab.errors import ParseError

_FORMAT = re.compile(
    r"""
    \A\s*
    (?P<sign>[-+]?)
    (?:
        (?P<num>\d+)\s*/\s*(?:2\s*\^\s*(?P<exp>\d+)|(?P<den>\d+))
      | (?P<int>\d*)(?:\.(?P<frac>\d*))?
    )
    \s*\Z
    """,
    re.VERBOSE,
)


def _trailing_zeros(n: int) -> int:
    return (n & -n).bit_length() - 1


@dataclass(frozen=True)
class Dyadic:
    numerator: int
    exponent: int = 0

    def __post_init__(self) -> None:
        if self.exponent < 0:
            raise ValueError(f"negative exponent {self.exponent}")
        if self.numerator == 0:
            object.__setattr__(self, "exponent", 0)
            return
        shift = min(_trailing_zeros(self.numerator), self.exponent)
        if shift:
            object.__setattr__(self, "numerator", self.numerator >> shift)
            object.__setattr__(self, "exponent", self.exponent - shift)

    # --- construction ---

    @classmethod
    def pow2(cls, k: int) -> Dyadic:
        """2^k for any integer k (negative k gives 1/2^-k)."""
        return cls(1 << k, 0) if k >= 0 else cls(1, -k)

    @classmethod
    def coerce(cls, value: Dyadic | int) -> Dyadic:
        if isinstance(value, Dyadic):
            return value
        if isinstance(value, int) and not isinstance(value, bool):
            return cls(value, 0)
        raise TypeError(f"not a dyadic rational: {value!r}")

    @classmethod
    def from_fraction(cls, value: Fraction) -> Dyadic:
        den = value.denominator
        if den & (den - 1):
            raise ValueError(f"{value} is not dyadic")
        return cls(value.numerator, den.bit_length() - 1)

    @classmethod
    def round_down(cls, value: Fraction, precision: int) -> Dyadic:
        """Largest multiple of 2^-precision that is <= value; error < 2^-precision."""
        return cls((value.numerator << precision) // value.denominator, precision)

    @classmethod
    def parse(cls, text: str) -> Dyadic:
        """Accepts `n/2^e`, `n/d` with d a power of two, integers and exact decimals."""
        m = _FORMAT.match(text)
        if m is None or (m["num"] is None and not (m["int"] or m["frac"])):
            raise ParseError(f"not a dyadic rational: {text!r}")
        sign = -1 if m["sign"] == "-" else 1
        if m["num"] is not None:
            if m["exp"] is not None:
                return cls(sign * int(m["num"]), int(m["exp"]))
            den = int(m["den"])
            if den == 0:
                raise ParseError(f"zero denominator: {text!r}")
            value = Fraction(sign * int(m["num"]), den)
        else:
            digits = m["frac"] or ""
            value = Fraction(sign * int((m["int"] or "0") + digits), 10 ** len(digits))
        try:
            return cls.from_fraction(value)
        except ValueError:
            raise ParseError(f"not a dyadic rational: {text!r}") from None

    # --- arithmetic ---

    def _aligned(self, other: Dyadic) -> tuple[int, int, int]:
        e = max(self.exponent, other.exponent)
        return (
            self.numerator << (e - self.exponent),
            other.numerator << (e - other.exponent),
            e,
        )

    def __add__(self, other: Dyadic | int) -> Dyadic:
        a, b, e = self._aligned(Dyadic.coerce(other))
        return Dyadic(a + b, e)

    __radd__ = __add__

    def __sub__(self, other: Dyadic | int) -> Dyadic:
        a, b, e = self._aligned(Dyadic.coerce(other))
        return Dyadic(a - b, e)

    def __rsub__(self, other: Dyadic | int) -> Dyadic:
        return Dyadic.coerce(other) - self

    def __mul__(self, other: Dyadic | int) -> Dyadic:
        o = Dyadic.coerce(other)
        return Dyadic(self.numerator * o.numerator, self.exponent + o.exponent)

    __rmul__ = __mul__

    def __neg__(self) -> Dyadic:
        return Dyadic(-self.numerator, self.exponent)

    def __abs__(self) -> Dyadic:
        return Dyadic(abs(self.numerator), self.exponent)

    def halve(self, times: int = 1) -> Dyadic:
        return Dyadic(self.numerator, self.exponent + times)

    def compare(self, other: Dyadic | int) -> int:
        a, b, _ = self._aligned(Dyadic.coerce(other))
        return (a > b) - (a < b)

    def __lt__(self, other: Dyadic | int) -> bool:
        return self.compare(other) < 0

    def __le__(self, other: Dyadic | int) -> bool:
        return self.compare(other) <= 0

    def __gt__(self, other: Dyadic | int) -> bool:
        return self.compare(other) > 0

    def __ge__(self, other: Dyadic | int) -> bool:
        return self.compare(other) >= 0

    def __bool__(self) -> bool:
        return self.numerator != 0

    # --- conversion and rendering ---

    def to_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    def to_power(self) -> str:
        return f"{self.numerator}/2^{self.exponent}"

    def to_decimal(self) -> str:
        if self.exponent == 0:
            return str(self.numerator)
        sign = "-" if self.numerator < 0 else ""
        digits = str(abs(self.numerator) * 5**self.exponent).rjust(self.exponent + 1, "0")
        return f"{sign}{digits[:-self.exponent]}.{digits[-self.exponent:]}"

    def __str__(self) -> str:
        if self.exponent == 0:
            return str(self.numerator)
        return f"{self.numerator}/{1 << self.exponent}"

    def __repr__(self) -> str:
        return f"Dyadic({self.to_power()})"


ZERO = Dyadic(0)
ONE = Dyadic(1)
