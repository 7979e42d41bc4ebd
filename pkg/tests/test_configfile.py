"""Tests for key=value run configuration files"""

import pytest
from stnlab_common.errors import ConfigParseError
from stnlab_cli.configfile import (
    format_config,
    load_train_config,
    parse_config_text,
    train_config_from_text,
)

VALID = """\
# glyph smoke run
seed = 3
model = stn_sl1
epochs = 2
batch_size = 16
learning_rate = 0.001   # adam default
optimizer = adam
dataset = glyphs
augmentation = rotation
augmentation_range =
canvas = 32
"""


def test_parse_valid_config():
    """Test comments, blank values and defaults"""
    cfg = train_config_from_text(VALID)
    assert cfg.seed == 3
    assert cfg.model == "stn_sl1"
    assert cfg.learning_rate == 0.001
    assert cfg.augmentation_range is None
    assert cfg.canvas == 32
    assert cfg.backbone == "default"


def test_entries_keep_line_numbers():
    """Test parse_config_text remembers where each key was set"""
    entries = parse_config_text("\n# comment\nseed = 1\n")
    assert entries == {"seed": ("1", 3)}


def test_missing_required_key_named():
    """Test a missing seed is reported by name"""
    text = VALID.replace("seed = 3\n", "")
    with pytest.raises(ConfigParseError, match="missing required key 'seed'") as info:
        train_config_from_text(text)
    assert info.value.key == "seed"


def test_unknown_key_reports_line():
    """Test unknown keys carry their line number"""
    with pytest.raises(ConfigParseError, match="line 12: unknown key 'dropout'") as info:
        train_config_from_text(VALID + "dropout = 0.5\n")
    assert info.value.line == 12


def test_bad_value_reports_line():
    """Test invalid values point at their line"""
    with pytest.raises(ConfigParseError) as info:
        train_config_from_text(VALID.replace("epochs = 2", "epochs = -1"))
    assert info.value.line == 4
    assert info.value.key == "epochs"


def test_duplicate_and_malformed_lines():
    """Test duplicate keys and lines without '='"""
    with pytest.raises(ConfigParseError, match="duplicate key 'seed'"):
        parse_config_text("seed=1\nseed=2\n")
    with pytest.raises(ConfigParseError, match="line 2: expected key=value"):
        parse_config_text("seed=1\nepochs\n")


def test_formatted_config_reparses(tmp_path):
    """Test the canonical rendering loads back to the same configuration"""
    cfg = train_config_from_text(VALID)
    path = tmp_path / "config.txt"
    path.write_text(format_config(cfg), encoding="utf-8")
    assert load_train_config(path) == cfg
    assert format_config(cfg).splitlines()[0].startswith("augmentation=")


def test_unreadable_file(tmp_path):
    """Test a missing file is a configuration error"""
    with pytest.raises(ConfigParseError, match="cannot read config"):
        load_train_config(tmp_path / "absent.txt")
