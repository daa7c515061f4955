"""Sub-sigma-algebras of a finite space, stored as their atom partitions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import MeasurabilityError, SizeMismatchError, ValidationError
from .prob_space import AS_TOL, Event, ProbabilitySpace, RandomVariable, as_event, as_variable


@dataclass(frozen=True)
class SigmaAlgebra:
    """Partition of ``range(space_size)`` into atoms.

    Atoms are kept sorted internally and ordered by their smallest member,
    so two equal partitions always compare equal.
    """

    atoms: tuple
    space_size: int

    def __post_init__(self):
        atoms = [tuple(sorted(int(i) for i in a)) for a in self.atoms]
        if any(len(a) == 0 for a in atoms):
            raise ValidationError("atoms must be nonempty")
        seen = [i for a in atoms for i in a]
        if len(seen) != len(set(seen)):
            raise ValidationError("atoms must be pairwise disjoint")
        if set(seen) != set(range(self.space_size)):
            raise ValidationError(f"atoms must cover exactly the outcomes 0..{self.space_size - 1}")
        atoms.sort(key=lambda a: a[0])
        object.__setattr__(self, "atoms", tuple(atoms))

    @classmethod
    def from_labels(cls, labels: Sequence) -> "SigmaAlgebra":
        """Atoms are the level sets of ``labels`` (one label per outcome)."""
        groups: dict = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        return cls(tuple(groups.values()), len(labels))

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def atom_index(self) -> np.ndarray:
        """Position of the containing atom, per outcome."""
        out = np.empty(self.space_size, dtype=int)
        for j, a in enumerate(self.atoms):
            out[list(a)] = j
        return out

    def atom_events(self) -> list:
        return [Event(frozenset(a)) for a in self.atoms]

    def atom_probabilities(self, space: ProbabilitySpace) -> np.ndarray:
        _check_space(space, self)
        return np.array([math.fsum(space.weights[list(a)]) for a in self.atoms])

    def union(self, atom_positions: Iterable[int]) -> Event:
        """The event of G formed by the listed atoms."""
        return Event(frozenset(i for j in atom_positions for i in self.atoms[j]))

    def lift(self, atom_values: Sequence[float]) -> RandomVariable:
        """Random variable equal to ``atom_values[j]`` on atom ``j``."""
        vals = np.asarray(atom_values, dtype=float)
        if vals.shape != (self.n_atoms,):
            raise SizeMismatchError(f"{vals.size} atom values for {self.n_atoms} atoms")
        return RandomVariable(vals[self.atom_index()])

    def __str__(self) -> str:
        return "[" + ", ".join("{" + ",".join(map(str, a)) + "}" for a in self.atoms) + "]"


def _check_space(space: ProbabilitySpace, G: SigmaAlgebra):
    if space.size != G.space_size:
        raise SizeMismatchError(f"sigma-algebra on {G.space_size} outcomes, space has {space.size}")


def generate(space_size: int, generators: Sequence) -> SigmaAlgebra:
    """Smallest sigma-algebra containing every generator event.

    Outcomes share an atom iff they have the same membership pattern across
    all generators.
    """
    if space_size < 1:
        raise ValidationError("space_size must be positive")
    events = [as_event(space_size, B) for B in generators]
    signatures = [tuple(i in B.members for B in events) for i in range(space_size)]
    return SigmaAlgebra.from_labels(signatures)


def discrete(space_size: int) -> SigmaAlgebra:
    if space_size < 1:
        raise ValidationError("space_size must be positive")
    return SigmaAlgebra(tuple((i,) for i in range(space_size)), space_size)


def trivial(space_size: int) -> SigmaAlgebra:
    return generate(space_size, [])


def refines(fine: SigmaAlgebra, coarse: SigmaAlgebra) -> bool:
    """True iff every atom of ``fine`` sits inside an atom of ``coarse``."""
    if fine.space_size != coarse.space_size:
        raise SizeMismatchError("sigma-algebras live on different spaces")
    owner = coarse.atom_index()
    return all(len({owner[i] for i in a}) == 1 for a in fine.atoms)


def is_measurable(space: ProbabilitySpace, G: SigmaAlgebra, X, tol: float = AS_TOL) -> bool:
    """Whether ``X`` is almost surely constant on every atom of ``G``."""
    _check_space(space, G)
    x = as_variable(space, X).values
    live = ~space.null_mask
    for a in G.atoms:
        vals = x[[i for i in a if live[i]]]
        if vals.size and vals.max() - vals.min() > tol:
            return False
    return True


def require_measurable(space, G, X, what="variable", tol: float = AS_TOL) -> RandomVariable:
    X = as_variable(space, X)
    if not is_measurable(space, G, X, tol):
        raise MeasurabilityError(f"{what} is not measurable with respect to {G}")
    return X


def atom_values_of(space: ProbabilitySpace, G: SigmaAlgebra, X) -> np.ndarray:
    """Per-atom value of a measurable ``X``, read off its first non-null outcome.

    Atoms of probability zero get 0.
    """
    x = as_variable(space, X).values
    live = ~space.null_mask
    out = np.zeros(G.n_atoms)
    for j, a in enumerate(G.atoms):
        members = [i for i in a if live[i]]
        if members:
            out[j] = x[members[0]]
    return out


def indicator(space_size: int, B) -> RandomVariable:
    """The 0/1 variable of the event ``B``."""
    members = sorted(as_event(space_size, B).members)
    vals = np.zeros(space_size)
    vals[members] = 1.0
    return RandomVariable(vals)
