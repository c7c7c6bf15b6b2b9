from __future__ import annotations


class CantorlabError(Exception):
    """Base for every error the CLI reports as a usage/parse failure (exit 2)."""


class ParseError(CantorlabError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None) -> None:
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where = f"{where}{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.source = source


class GuardExceeded(CantorlabError):
    pass


class OracleError(CantorlabError):
    pass


class PrecisionError(CantorlabError):
    pass


class FunctionalError(CantorlabError):
    pass


class MonotonicityError(FunctionalError):
    pass


class ScheduleError(CantorlabError):
    pass


class InputTooShort(CantorlabError):
    pass


class GammaInconsistency(CantorlabError):
    pass


class LatticeError(CantorlabError):
    pass


class NotALattice(LatticeError):
    def __init__(self, message: str, witness: tuple[str, ...] = ()) -> None:
        super().__init__(message)
        self.witness = witness


class GradingError(LatticeError):
    pass


class SetSystemError(LatticeError):
    def __init__(self, message: str, witness: tuple[str, ...] = ()) -> None:
        super().__init__(message)
        self.witness = witness


class NotDistributive(LatticeError):
    def __init__(self, message: str, witness: tuple[str, ...] = ()) -> None:
        super().__init__(message)
        self.witness = witness
