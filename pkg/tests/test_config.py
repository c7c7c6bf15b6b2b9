import textwrap
from pathlib import Path

import pytest

from cantorlab.config import Config, load


def test_load_config(tmp_path: Path) -> None:
    cfg_file = tmp_path / "config.toml"
    cfg_file.write_text(
        textwrap.dedent("""
            [guards]
            enumeration_bits = 16
            stage_budget = 128

            [audit]
            precision = 30
            depth = 4

            [output]
            format = "csv"
        """)
    )

    cfg = load(cfg_file)

    assert isinstance(cfg, Config)
    assert cfg.guards.enumeration_bits == 16
    assert cfg.guards.stage_budget == 128
    assert cfg.guards.max_basics == 20
    assert cfg.audit.precision == 30
    assert cfg.audit.depth == 4
    assert cfg.output.format == "csv"


def test_load_uses_defaults_when_file_missing(tmp_path: Path) -> None:
    cfg = load(tmp_path / "nope.toml")
    assert cfg == Config()
    assert cfg.guards.decomposition_depth == 40
    assert cfg.audit.precision == 20
    assert cfg.output.format == "text"


def test_unknown_format_is_rejected(tmp_path: Path) -> None:
    cfg_file = tmp_path / "config.toml"
    cfg_file.write_text('[output]\nformat = "json"\n')
    with pytest.raises(ValueError, match="text or csv"):
        load(cfg_file)


def test_unknown_key_is_rejected(tmp_path: Path) -> None:
    cfg_file = tmp_path / "config.toml"
    cfg_file.write_text("[guards]\nbudget = 3\n")
    with pytest.raises(TypeError):
        load(cfg_file)
