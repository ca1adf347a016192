"""Operator vocabularies, search configuration and experiment presets."""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import ConfigurationError
from .expr import BINARY_OPS, UNARY_OPS

DEFAULT_FIT_EPSILON = 2.0**-30
DEFAULT_CONST_GRAIN = 2.0**-10
MAX_NODES_LIMIT = 25


@dataclass(frozen=True)
class OperatorVocabulary:
    name: str
    binary: frozenset[str]
    unary: frozenset[str]
    allows_constants: bool = True

    def __post_init__(self) -> None:
        if not (self.binary or self.unary):
            raise ConfigurationError("vocabulary has no operators")
        unknown = (self.binary - set(BINARY_OPS)) | (self.unary - set(UNARY_OPS))
        if unknown:
            raise ConfigurationError(f"unknown operators {sorted(unknown)}")

    @property
    def size(self) -> int:
        return len(self.binary) + len(self.unary)

    def has(self, *ops: str) -> bool:
        return all(op in self.binary or op in self.unary for op in ops)


FULL = OperatorVocabulary("FULL", frozenset(BINARY_OPS), frozenset(UNARY_OPS))
TRIG = OperatorVocabulary(
    "TRIG", frozenset({"add", "sub", "mul"}), frozenset({"neg", "sin", "cos", "arctan"})
)
VOCABULARIES = {"FULL": FULL, "TRIG": TRIG}


@dataclass(frozen=True)
class SearchConfig:
    vocabulary: OperatorVocabulary
    max_nodes: int
    inputs: tuple[str, ...]
    target: str = "residual"
    fit_epsilon: float = DEFAULT_FIT_EPSILON
    const_grain: float = DEFAULT_CONST_GRAIN
    max_constants: int = 3
    name: str = "custom"
    harmonics: int = 0
    harmonic_source: str = "M"

    def __post_init__(self) -> None:
        if not 1 <= self.max_nodes <= MAX_NODES_LIMIT:
            raise ConfigurationError(f"max_nodes must lie in [1, {MAX_NODES_LIMIT}]")
        if not self.inputs:
            raise ConfigurationError("at least one input column is required")
        if self.target in self.inputs:
            raise ConfigurationError("target column cannot also be an input")
        if not (self.fit_epsilon > 0 and self.const_grain > 0):
            raise ConfigurationError("fit epsilon and constant grain must be positive")
        if self.max_constants < 0:
            raise ConfigurationError("max_constants must be non-negative")

    def check_columns(self, columns) -> None:
        missing = [c for c in (*self.inputs, self.target) if c not in columns]
        if missing:
            raise ConfigurationError(f"dataset lacks columns {missing}")

    def with_overrides(self, **changes) -> "SearchConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def experiment_preset(number: int) -> SearchConfig:
    """The three lunar experiments: raw M with FULL or TRIG, then sin(kM) inputs."""
    if number == 1:
        return SearchConfig(FULL, 6, ("M",), name="experiment-1")
    if number == 2:
        return SearchConfig(TRIG, 9, ("M",), name="experiment-2")
    if number == 3:
        return SearchConfig(
            TRIG, 7, ("sin_1", "sin_2", "sin_3"), name="experiment-3", harmonics=3, harmonic_source="M"
        )
    raise ConfigurationError(f"unknown experiment preset {number!r}; choose 1, 2 or 3")
