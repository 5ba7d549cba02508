"""
Configuration handling for the set similarity join engine.

This module provides functionality to load and manage engine settings
from environment variables, .env files, and command-line arguments.
"""

import os
import logging
from typing import Any, Callable, Dict, List, Optional
from dotenv import load_dotenv

# Load environment variables from .env file if it exists
load_dotenv()

# Set up logging
logging.basicConfig(level=os.getenv("SSJOIN_LOG_LEVEL", "WARNING").strip().upper())
logger = logging.getLogger(__name__)

# Defaults
DEFAULT_CHUNK_BUDGET = "64M"
DEFAULT_GROUP_SIZE = 32
DEFAULT_STRATEGY = "auto"
DEFAULT_EXECUTOR = "thread"
MAX_GROUP_SIZE = 1024
# One C_O entry (probe id, end offset) plus one candidate id, 4 bytes each
MIN_CHUNK_BUDGET = 12

STRATEGIES = ("a", "b", "c", "auto")
EXECUTORS = ("thread", "process")

_SIZE_SUFFIXES = {"K": 1 << 10, "M": 1 << 20, "G": 1 << 30}
_UNBOUNDED = ("inf", "unbounded", "none")


def parse_byte_size(value: str) -> Optional[int]:
    """
    Parse a byte size such as ``64K``, ``1M`` or ``4096``.

    Args:
        value: Decimal byte count with an optional binary K/M/G suffix,
            or ``inf`` for an unbounded budget.

    Returns:
        The number of bytes, or None when the size is unbounded.

    Raises:
        ValueError: If the value cannot be parsed or is not positive.
    """
    text = value.strip().upper()
    if text.lower() in _UNBOUNDED:
        return None
    multiplier = 1
    if text and text[-1] in _SIZE_SUFFIXES:
        multiplier = _SIZE_SUFFIXES[text[-1]]
        text = text[:-1]
    # Accept a trailing "B" as in "64KB"
    elif text.endswith("B") and len(text) > 1 and text[-2] in _SIZE_SUFFIXES:
        multiplier = _SIZE_SUFFIXES[text[-2]]
        text = text[:-2]
    if not text.isdigit():
        error_msg = f"Invalid byte size: {value!r}"
        logger.error(error_msg)
        raise ValueError(error_msg)
    size = int(text) * multiplier
    if size <= 0:
        error_msg = f"Byte size must be positive: {value!r}"
        logger.error(error_msg)
        raise ValueError(error_msg)
    return size


def is_power_of_two(value: int) -> bool:
    """Return True when value is a positive power of two."""
    return value >= 1 and value & (value - 1) == 0


def _parse_int(value: str) -> int:
    return int(value.strip())


class Config:
    """Configuration manager for the join engine."""

    def __init__(self) -> None:
        """Initialize the configuration from the environment."""
        # Malformed values fall back to the default and are reported by validate()
        self.env_problems: Dict[str, str] = {}
        self.chunk_budget: Optional[int] = self._from_env(
            "chunk_budget", "SSJOIN_CHUNK_BUDGET", DEFAULT_CHUNK_BUDGET, parse_byte_size
        )
        self.workers: int = self._from_env(
            "workers", "SSJOIN_WORKERS", str(os.cpu_count() or 1), _parse_int
        )
        self.group_size: int = self._from_env(
            "group_size", "SSJOIN_GROUP_SIZE", str(DEFAULT_GROUP_SIZE), _parse_int
        )
        self.strategy: str = os.getenv("SSJOIN_STRATEGY", DEFAULT_STRATEGY).strip().lower()
        self.executor: str = os.getenv("SSJOIN_EXECUTOR", DEFAULT_EXECUTOR).strip().lower()

        logger.info("Configuration initialized:")
        logger.info(f"Chunk budget: {self.chunk_budget if self.chunk_budget else 'unbounded'}")
        logger.info(f"Workers: {self.workers}")
        logger.info(f"Group size: {self.group_size}")
        logger.info(f"Strategy: {self.strategy}")
        logger.info(f"Executor: {self.executor}")

    def _from_env(self, key: str, name: str, default: str, parse: Callable[[str], Any]) -> Any:
        raw = os.getenv(name, default)
        try:
            return parse(raw)
        except ValueError:
            logger.warning(f"Ignoring invalid {name}={raw!r}, using {default}")
            self.env_problems = {**self.env_problems, key: f"{name} is invalid (got {raw!r})"}
            return parse(default)

    def _clear_env_problem(self, key: str) -> None:
        if key in self.env_problems:
            self.env_problems = {k: v for k, v in self.env_problems.items() if k != key}

    def update(self, **kwargs: Any) -> None:
        """
        Update configuration with provided values.

        Args:
            **kwargs: Configuration key-value pairs to update. None values are ignored.
        """
        for key, value in kwargs.items():
            if hasattr(self, key) and value is not None:
                if isinstance(value, str):
                    value = value.strip().lower()
                logger.info(f"Updating config: {key} = {value}")
                setattr(self, key, value)
                self._clear_env_problem(key)

    def set_chunk_budget(self, value: str) -> None:
        """
        Set the chunk budget from a byte size string; ``inf`` removes the limit.

        Raises:
            ValueError: If the size cannot be parsed.
        """
        self.chunk_budget = parse_byte_size(value)
        self._clear_env_problem("chunk_budget")
        logger.info(f"Updating config: chunk_budget = {self.chunk_budget}")

    def validate(self) -> None:
        """
        Validate the configuration.

        Raises:
            ValueError: If any configuration value is out of range.
        """
        logger.info("Validating configuration...")

        problems: List[str] = list(self.env_problems.values())
        if self.workers < 1:
            problems.append(f"workers must be >= 1 (got {self.workers})")
        if not is_power_of_two(self.group_size) or self.group_size > MAX_GROUP_SIZE:
            problems.append(
                f"group size must be a power of two <= {MAX_GROUP_SIZE} (got {self.group_size})"
            )
        if self.strategy not in STRATEGIES:
            problems.append(f"strategy must be one of {', '.join(STRATEGIES)} (got {self.strategy})")
        if self.executor not in EXECUTORS:
            problems.append(f"executor must be one of {', '.join(EXECUTORS)} (got {self.executor})")
        if self.chunk_budget is not None and self.chunk_budget < MIN_CHUNK_BUDGET:
            problems.append(
                f"chunk budget must hold one candidate record of {MIN_CHUNK_BUDGET} bytes "
                f"(got {self.chunk_budget})"
            )

        if problems:
            error_msg = f"Invalid configuration: {'; '.join(problems)}"
            logger.error(error_msg)
            raise ValueError(error_msg)

        logger.info("Configuration validation successful")

    def as_dict(self) -> Dict[str, Any]:
        """Return the settings as a plain dictionary."""
        return {
            "chunk_budget": self.chunk_budget,
            "workers": self.workers,
            "group_size": self.group_size,
            "strategy": self.strategy,
            "executor": self.executor,
        }


# Global configuration instance
config = Config()
