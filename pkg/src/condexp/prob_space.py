"""Finite probability spaces, random variables and events.

All integrals are weighted sums accumulated with :func:`math.fsum`, so the
result is the correctly rounded value of the sum of the (rounded) products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    EmptySpaceError,
    EventIndexError,
    NegativeWeightError,
    SizeMismatchError,
    ValidationError,
    ZeroMassError,
)

# Per-value tolerance for "almost sure" comparisons in floating point.
AS_TOL = 1e-9


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProbabilitySpace:
    """A finite outcome set with a normalized probability vector.

    Build through :func:`new_space`, which validates and normalizes.
    """

    weights: np.ndarray
    outcome_labels: tuple = ()

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def null_mask(self) -> np.ndarray:
        return self.weights == 0.0

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"ProbabilitySpace(size={self.size}, weights={self.weights.tolist()})"


@dataclass(frozen=True, eq=False)
class RandomVariable:
    """A real value per outcome."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("random variable values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __repr__(self) -> str:
        return f"RandomVariable({self.values.tolist()})"


@dataclass(frozen=True)
class Event:
    """A set of outcome indices."""

    members: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        members = frozenset(int(i) for i in self.members)
        if any(i < 0 for i in members):
            raise EventIndexError("event indices must be non-negative")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, *indices: int) -> "Event":
        return cls(frozenset(indices))

    def validate(self, size: int) -> "Event":
        bad = [i for i in self.members if i >= size]
        if bad:
            raise EventIndexError(f"event indices {sorted(bad)} out of range for {size} outcomes")
        return self

    def complement(self, size: int) -> "Event":
        return Event(frozenset(range(size)) - self.validate(size).members)

    def __iter__(self):
        return iter(sorted(self.members))

    def __len__(self) -> int:
        return len(self.members)


def new_space(weights: Sequence[float], labels: Optional[Sequence[str]] = None) -> ProbabilitySpace:
    """Validate ``weights`` and divide them by their total."""
    w = np.array(weights, dtype=float).reshape(-1)
    if w.size == 0:
        raise EmptySpaceError("a probability space needs at least one outcome")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    if np.any(w < 0):
        raise NegativeWeightError(f"negative weight at outcomes {np.flatnonzero(w < 0).tolist()}")
    total = math.fsum(w)
    if total <= 0:
        raise ZeroMassError("weights have zero total mass")
    if labels is None:
        labels = [str(i) for i in range(w.size)]
    elif len(labels) != w.size:
        raise SizeMismatchError(f"{len(labels)} labels for {w.size} outcomes")
    return ProbabilitySpace(_frozen_array(w / total), tuple(str(s) for s in labels))


def as_variable(space: ProbabilitySpace, X) -> RandomVariable:
    """Coerce ``X`` to a :class:`RandomVariable` checked against ``space``."""
    if not isinstance(X, RandomVariable):
        X = RandomVariable(X)
    if len(X) != space.size:
        raise SizeMismatchError(f"variable has {len(X)} values, space has {space.size} outcomes")
    return X


def as_event(space_size: int, B) -> Event:
    if not isinstance(B, Event):
        B = Event(frozenset(B))
    return B.validate(space_size)


def expectation(space: ProbabilitySpace, X) -> float:
    x = as_variable(space, X).values
    return math.fsum(space.weights * x)


def inner_product(space: ProbabilitySpace, X, Y) -> float:
    x = as_variable(space, X).values
    y = as_variable(space, Y).values
    return math.fsum(space.weights * x * y)


def norm2(space: ProbabilitySpace, X) -> float:
    return math.sqrt(max(inner_product(space, X, X), 0.0))


def norm1(space: ProbabilitySpace, X) -> float:
    x = as_variable(space, X).values
    return math.fsum(space.weights * np.abs(x))


def probability(space: ProbabilitySpace, B) -> float:
    idx = sorted(as_event(space.size, B).members)
    return math.fsum(space.weights[idx])


def integrate_over(space: ProbabilitySpace, X, B) -> float:
    """Integral of ``X`` over the event ``B``."""
    x = as_variable(space, X).values
    idx = sorted(as_event(space.size, B).members)
    return math.fsum(space.weights[idx] * x[idx])


def almost_surely_equal(space: ProbabilitySpace, X, Y, tol: float = AS_TOL) -> bool:
    """Equal on every outcome of positive probability, within ``tol`` per value."""
    x = as_variable(space, X).values
    y = as_variable(space, Y).values
    live = ~space.null_mask
    return bool(np.all(np.abs(x[live] - y[live]) <= tol))


def combine(space: ProbabilitySpace, terms: Iterable[tuple]) -> RandomVariable:
    """Linear combination ``sum(a * X)`` over ``(a, X)`` pairs."""
    out = np.zeros(space.size)
    for a, X in terms:
        out = out + a * as_variable(space, X).values
    return RandomVariable(out)
