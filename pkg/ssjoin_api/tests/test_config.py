"""
Tests for the engine configuration.
"""

import pytest

from ssjoin_api.config import Config, is_power_of_two, parse_byte_size


def test_parse_byte_size() -> None:
    """Test byte sizes with binary suffixes."""
    assert parse_byte_size("4096") == 4096
    assert parse_byte_size("64K") == 65536
    assert parse_byte_size("64kb") == 65536
    assert parse_byte_size(" 1M ") == 1 << 20
    assert parse_byte_size("2G") == 2 << 30


def test_parse_byte_size_unbounded() -> None:
    """Test the spellings of an unbounded budget."""
    assert parse_byte_size("inf") is None
    assert parse_byte_size("Unbounded") is None


@pytest.mark.parametrize("value", ["", "abc", "0", "-1", "1.5M", "K"])
def test_parse_byte_size_invalid(value: str) -> None:
    """Test that malformed or non-positive sizes are rejected."""
    with pytest.raises(ValueError):
        parse_byte_size(value)


def test_is_power_of_two() -> None:
    """Test the power of two check used for group sizes."""
    assert all(is_power_of_two(value) for value in (1, 2, 32, 1024))
    assert not any(is_power_of_two(value) for value in (0, 3, 12, -4))


def test_config_from_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test that settings are read from the environment."""
    monkeypatch.setenv("SSJOIN_CHUNK_BUDGET", "1M")
    monkeypatch.setenv("SSJOIN_WORKERS", " 4 ")
    monkeypatch.setenv("SSJOIN_GROUP_SIZE", "64")
    monkeypatch.setenv("SSJOIN_STRATEGY", "C")
    monkeypatch.setenv("SSJOIN_EXECUTOR", "process")

    settings = Config()

    assert settings.as_dict() == {
        "chunk_budget": 1 << 20,
        "workers": 4,
        "group_size": 64,
        "strategy": "c",
        "executor": "process",
    }
    settings.validate()


def test_config_defaults(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test the defaults when nothing is set."""
    for name in ("SSJOIN_CHUNK_BUDGET", "SSJOIN_GROUP_SIZE", "SSJOIN_STRATEGY", "SSJOIN_EXECUTOR"):
        monkeypatch.delenv(name, raising=False)

    settings = Config()

    assert settings.chunk_budget == 64 << 20
    assert settings.group_size == 32
    assert settings.strategy == "auto"
    assert settings.executor == "thread"


def test_config_update_ignores_none() -> None:
    """Test that update skips None values and normalizes strings."""
    settings = Config()
    settings.update(workers=None, strategy=" B ")

    assert settings.strategy == "b"
    assert settings.workers >= 1


def test_config_validate_reports_every_problem() -> None:
    """Test that validation lists all invalid settings at once."""
    settings = Config()
    settings.update(workers=0, group_size=3, strategy="z", chunk_budget=8)

    with pytest.raises(ValueError) as excinfo:
        settings.validate()

    message = str(excinfo.value)
    assert "workers" in message
    assert "group size" in message
    assert "strategy" in message
    assert "chunk budget" in message


def test_config_invalid_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test that malformed environment values are reported by validate, not at load time."""
    monkeypatch.setenv("SSJOIN_WORKERS", "abc")
    monkeypatch.setenv("SSJOIN_GROUP_SIZE", "lots")
    monkeypatch.setenv("SSJOIN_CHUNK_BUDGET", "1.5M")

    settings = Config()

    assert settings.group_size == 32
    assert settings.chunk_budget == 64 << 20
    with pytest.raises(ValueError) as excinfo:
        settings.validate()
    message = str(excinfo.value)
    assert "SSJOIN_WORKERS" in message
    assert "SSJOIN_GROUP_SIZE" in message
    assert "SSJOIN_CHUNK_BUDGET" in message


def test_config_override_clears_environment_problem(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test that explicit settings replace malformed environment values."""
    monkeypatch.setenv("SSJOIN_WORKERS", "abc")
    monkeypatch.setenv("SSJOIN_CHUNK_BUDGET", "huge")

    settings = Config()
    settings.update(workers=2)
    settings.set_chunk_budget("inf")

    settings.validate()
    assert settings.workers == 2
    assert settings.chunk_budget is None
