"""JSON problem files.

A problem file is one UTF-8 JSON document::

    {
      "outcomes": ["a", "b", "c", "d"],          # optional labels
      "probabilities": [1, 1, 1, 1],             # unnormalized weights are fine
      "variables": {"X": [1, 2, 3, 4]},
      "sigma_algebras": {
        "G": {"atoms": [[0, 1], [2, 3]]},
        "H": {"generators": [[0, 1], [1, 2]]}
      }
    }

Index lists are 0-based. A machine-readable report written by the CLI embeds
its problem under ``"problem"`` and can be loaded back with :func:`load`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

from .errors import ValidationError
from .prob_space import ProbabilitySpace, RandomVariable, new_space
from .sigma_algebra import SigmaAlgebra, generate

BUNDLED_PREFIX = "bundled:"


class ProblemFileError(ValidationError):
    """Unreadable, malformed or inconsistent problem file."""


@dataclass
class ProblemFile:
    probabilities: List[float]
    variables: Dict[str, List[float]] = field(default_factory=dict)
    sigma_algebras: Dict[str, dict] = field(default_factory=dict)
    outcomes: Optional[List[str]] = None

    def __post_init__(self):
        n = len(self.probabilities)
        if self.outcomes is not None and len(self.outcomes) != n:
            raise ProblemFileError(f"{len(self.outcomes)} outcome labels for {n} probabilities")
        for name, vals in self.variables.items():
            if len(vals) != n:
                raise ProblemFileError(f"variable {name!r} has {len(vals)} values, expected {n}")
        for name, spec in self.sigma_algebras.items():
            if not isinstance(spec, dict) or len(spec.keys() & {"atoms", "generators"}) != 1:
                raise ProblemFileError(
                    f"sigma-algebra {name!r} needs exactly one of 'atoms' or 'generators'"
                )

    @property
    def size(self) -> int:
        return len(self.probabilities)

    def space(self) -> ProbabilitySpace:
        return new_space(self.probabilities, self.outcomes)

    def variable(self, name: str) -> RandomVariable:
        if name not in self.variables:
            raise ProblemFileError(f"unknown variable {name!r}; have {sorted(self.variables)}")
        return RandomVariable(self.variables[name])

    def sigma(self, name: str) -> SigmaAlgebra:
        if name not in self.sigma_algebras:
            raise ProblemFileError(f"unknown sigma-algebra {name!r}; have {sorted(self.sigma_algebras)}")
        spec = self.sigma_algebras[name]
        if "atoms" in spec:
            return SigmaAlgebra(tuple(tuple(a) for a in spec["atoms"]), self.size)
        return generate(self.size, [set(g) for g in spec["generators"]])

    def to_dict(self) -> dict:
        out = {
            "probabilities": list(self.probabilities),
            "variables": {k: list(v) for k, v in self.variables.items()},
            "sigma_algebras": {k: dict(v) for k, v in self.sigma_algebras.items()},
        }
        if self.outcomes is not None:
            out["outcomes"] = list(self.outcomes)
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "ProblemFile":
        if not isinstance(doc, dict):
            raise ProblemFileError("problem file must be a JSON object")
        if "problem" in doc:
            doc = doc["problem"]
        if "probabilities" not in doc:
            raise ProblemFileError("problem file is missing 'probabilities'")
        try:
            return cls(
                probabilities=[float(p) for p in doc["probabilities"]],
                variables={
                    str(k): [float(x) for x in v] for k, v in doc.get("variables", {}).items()
                },
                sigma_algebras={
                    str(k): {kk: [[int(i) for i in s] for s in vv] for kk, vv in v.items()}
                    for k, v in doc.get("sigma_algebras", {}).items()
                },
                outcomes=None if doc.get("outcomes") is None else [str(s) for s in doc["outcomes"]],
            )
        except (TypeError, ValueError, AttributeError) as exc:
            if isinstance(exc, ProblemFileError):
                raise
            raise ProblemFileError(f"malformed problem file: {exc}") from exc


def bundled_names() -> List[str]:
    root = resources.files("condexp") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def read_text(path: str) -> str:
    if path.startswith(BUNDLED_PREFIX):
        name = path[len(BUNDLED_PREFIX):]
        res = resources.files("condexp") / "data" / f"{name}.json"
        if not res.is_file():
            raise ProblemFileError(f"no bundled example {name!r}; have {bundled_names()}")
        return res.read_text(encoding="utf-8")
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc}") from exc


def load(path: str) -> ProblemFile:
    """Load a problem file, a CLI report, or ``bundled:<name>``."""
    try:
        doc = json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: invalid JSON ({exc})") from exc
    return ProblemFile.from_dict(doc)
