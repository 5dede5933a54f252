"""Shared domain types: streaming examples, label conventions, error classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Binary class labels. NEG is also the deterministic tie-break everywhere a
# two-way argmax can tie.
NEG = 0
POS = 1
LABELS = (NEG, POS)


class MarlineError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(MarlineError):
    """A spec, config file, or parameter value is invalid."""


class DataError(MarlineError):
    """An input data file is malformed or inconsistent."""


class DimensionMismatchError(MarlineError, ValueError):
    """A feature vector does not match the configured dimensionality."""


@dataclass(frozen=True, eq=False)
class Example:
    """One streaming observation: a feature vector and its binary label."""

    features: np.ndarray
    label: int

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "features", np.asarray(self.features, dtype=float)
        )
        if self.label not in LABELS:
            raise ValueError(f"label must be {NEG} or {POS}, got {self.label!r}")

    @property
    def n_features(self) -> int:
        return int(self.features.shape[0])


def check_dims(features: np.ndarray, expected: int, context: str) -> None:
    """Raise DimensionMismatchError unless ``features`` has length ``expected``."""
    if features.shape != (expected,):
        raise DimensionMismatchError(
            f"{context}: expected {expected} features, got shape {features.shape}"
        )


def uniform_distribution() -> np.ndarray:
    """Uninformed prior over the two classes."""
    return np.array([0.5, 0.5])


def argmax_label(scores: np.ndarray) -> int:
    """Class with the higher score; ties resolve to NEG."""
    return POS if scores[POS] > scores[NEG] else NEG
