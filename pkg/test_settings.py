import pytest
from pydantic import ValidationError

from config.settings import (
    DEFAULT_GROUP_LEVEL_CAP,
    DEFAULT_LEVEL_CAP,
    get_log_level,
    load_config,
)


def test_defaults():
    config = load_config()
    assert config.level_cap == DEFAULT_LEVEL_CAP
    assert config.group_level_cap == DEFAULT_GROUP_LEVEL_CAP
    assert config.seed == 0
    assert config.output_format == "json"
    assert not config.timings


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("TREEMONO_LEVEL_CAP", "6")
    monkeypatch.setenv("TREEMONO_SEED", "42")
    monkeypatch.setenv("TREEMONO_LOG_LEVEL", "debug")
    config = load_config()
    assert config.level_cap == 6
    assert config.seed == 42
    assert get_log_level() == "DEBUG"


def test_explicit_values_win_and_none_is_ignored(monkeypatch):
    monkeypatch.setenv("TREEMONO_SEED", "42")
    assert load_config(seed=7).seed == 7
    assert load_config(seed=None).seed == 42


def test_group_cap_cannot_exceed_level_cap():
    with pytest.raises(ValidationError):
        load_config(level_cap=3, group_level_cap=4)


def test_bad_values(monkeypatch):
    with pytest.raises(ValidationError):
        load_config(output_format="yaml")
    with pytest.raises(ValidationError):
        load_config(seed=-1)
    monkeypatch.setenv("TREEMONO_LEVEL_CAP", "deep")
    with pytest.raises(ValueError):
        load_config()
