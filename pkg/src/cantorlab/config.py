from __future__ import annotations

import tomllib
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class GuardsConfig:
    enumeration_bits: int = 24     # largest use bound induced_measure enumerates
    max_basics: int = 20           # lr_profiles walks 2^basics patterns
    stage_budget: int = 64         # search budget for open-horizon predicates
    decomposition_depth: int = 40  # deepest input node tally_induced_measure visits


@dataclass(frozen=True)
class AuditConfig:
    precision: int = 20  # i for inexact oracles
    depth: int = 8


@dataclass(frozen=True)
class OutputConfig:
    format: str = "text"  # "text" or "csv"

    def __post_init__(self) -> None:
        if self.format not in ("text", "csv"):
            raise ValueError(f"output format must be text or csv, got {self.format!r}")


@dataclass(frozen=True)
class Config:
    guards: GuardsConfig = field(default_factory=GuardsConfig)
    audit: AuditConfig = field(default_factory=AuditConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


DEFAULT_PATH = Path.home() / ".config" / "cantorlab" / "config.toml"


def load(path: Path | None = None) -> Config:
    path = path or DEFAULT_PATH
    if not path.exists():
        return Config()
    with path.open("rb") as f:
        data = tomllib.load(f)
    return Config(
        guards=GuardsConfig(**data.get("guards", {})),
        audit=AuditConfig(**data.get("audit", {})),
        output=OutputConfig(**data.get("output", {})),
    )
