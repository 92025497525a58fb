"""Finite measure spaces: weighted atoms, self-maps on ``range(n)``, preimages.

Everything here is exact bookkeeping on dense integer state ids; no
approximation happens at this level.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ValidationError

__all__ = [
    "PointMassMeasure",
    "DiscreteSystem",
    "SetIndicator",
    "measure_of",
    "preimage",
    "orbit_decomposition",
    "is_invariant",
    "load_system",
    "load_measure",
    "system_to_json",
]


@dataclass(frozen=True)
class PointMassMeasure:
    """Finite measure sum_i w_i * delta_{s_i}. Weights need not sum to one."""

    atoms: tuple[tuple[int, float], ...]
    total_mass: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        atoms = tuple((int(s), float(w)) for s, w in self.atoms)
        ids = [s for s, _ in atoms]
        if len(set(ids)) != len(ids):
            raise ValidationError("state ids of atoms must be distinct", "measure")
        for s, w in atoms:
            if s < 0:
                raise ValidationError(f"negative state id {s}", "measure")
            if not math.isfinite(w) or w < 0:
                raise ValidationError(f"weight of state {s} must be finite and >= 0", "measure")
        total = math.fsum(w for _, w in atoms)
        if self.total_mass is not None:
            if abs(self.total_mass - total) > 1e-12 * max(1.0, abs(total)):
                raise ValidationError("total_mass disagrees with the sum of weights", "measure")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "total_mass", total)

    @classmethod
    def uniform(cls, states: Iterable[int], mass: float = 1.0) -> "PointMassMeasure":
        states = list(states)
        return cls(tuple((s, mass / len(states)) for s in states))

    @classmethod
    def dirac(cls, state: int, mass: float = 1.0) -> "PointMassMeasure":
        return cls(((state, mass),))

    @property
    def states(self) -> np.ndarray:
        return np.array([s for s, _ in self.atoms], dtype=np.int64)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms], dtype=float)

    def positive_atoms(self) -> list[tuple[int, float]]:
        return [(s, w) for s, w in self.atoms if w > 0]

    def dense(self, n_states: int) -> np.ndarray:
        """Weight vector of length ``n_states``."""
        out = np.zeros(n_states)
        for s, w in self.atoms:
            if s >= n_states:
                raise ValidationError(f"atom state {s} outside 0..{n_states - 1}", "measure")
            out[s] += w
        return out

    def integrate(self, values: np.ndarray) -> float:
        """Atom-weighted sum of ``values[state]`` (zero-weight atoms skipped)."""
        terms = [w * float(values[s]) for s, w in self.atoms if w > 0]
        return math.fsum(terms)


@dataclass(frozen=True)
class SetIndicator:
    """Subset of ``range(n)`` stored as a boolean mask."""

    members: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.members, dtype=bool).copy()
        m.setflags(write=False)
        object.__setattr__(self, "members", m)

    @classmethod
    def from_states(cls, n_states: int, states: Iterable[int]) -> "SetIndicator":
        mask = np.zeros(n_states, dtype=bool)
        for s in states:
            if not 0 <= s < n_states:
                raise ValidationError(f"state {s} outside 0..{n_states - 1}", "set")
            mask[s] = True
        return cls(mask)

    @classmethod
    def full(cls, n_states: int) -> "SetIndicator":
        return cls(np.ones(n_states, dtype=bool))

    @classmethod
    def empty(cls, n_states: int) -> "SetIndicator":
        return cls(np.zeros(n_states, dtype=bool))

    @property
    def n_states(self) -> int:
        return int(self.members.size)

    def __contains__(self, state: int) -> bool:
        return bool(self.members[state])

    def __len__(self) -> int:
        return int(self.members.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, SetIndicator) and np.array_equal(self.members, other.members)

    def __hash__(self):
        return hash(self.members.tobytes())

    def __repr__(self) -> str:
        return f"SetIndicator({self.states()})"

    def states(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.members)]

    def complement(self) -> "SetIndicator":
        return SetIndicator(~self.members)

    def __or__(self, other: "SetIndicator") -> "SetIndicator":
        return SetIndicator(self.members | other.members)

    def __and__(self, other: "SetIndicator") -> "SetIndicator":
        return SetIndicator(self.members & other.members)

    def issubset(self, other: "SetIndicator") -> bool:
        return not np.any(self.members & ~other.members)

    def is_full(self) -> bool:
        return bool(self.members.all())

    def is_empty(self) -> bool:
        return not self.members.any()


@dataclass(frozen=True)
class DiscreteSystem:
    """Self-map of ``range(n_states)`` given by ``map_table`` plus named observables."""

    n_states: int
    map_table: np.ndarray
    observables: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = int(self.n_states)
        if n < 1:
            raise ValidationError("n_states must be a positive integer", "n_states")
        table = np.asarray(self.map_table)
        if table.shape != (n,):
            raise ValidationError(f"map must have length {n}", "map")
        if not np.issubdtype(table.dtype, np.integer):
            if not np.all(np.equal(np.mod(table, 1), 0)):
                raise ValidationError("map entries must be integers", "map")
        table = table.astype(np.int64)
        bad = np.flatnonzero((table < 0) | (table >= n))
        if bad.size:
            raise ValidationError(f"entry {int(table[bad[0]])} is not a state index", f"map[{bad[0]}]")
        table.setflags(write=False)
        obs = {}
        for name, values in dict(self.observables).items():
            if not name:
                raise ValidationError("observable names must be non-empty", "observables")
            arr = np.asarray(values, dtype=float)
            if arr.shape != (n,):
                raise ValidationError(f"observable must have length {n}", f"observables.{name}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError("observable values must be finite", f"observables.{name}")
            arr = arr.copy()
            arr.setflags(write=False)
            obs[name] = arr
        object.__setattr__(self, "n_states", n)
        object.__setattr__(self, "map_table", table)
        object.__setattr__(self, "observables", obs)

    def __call__(self, x: int) -> int:
        return int(self.map_table[x])

    def iterate(self, x: int, n: int) -> int:
        for _ in range(n):
            x = int(self.map_table[x])
        return x

    def orbit(self, x: int, length: int) -> np.ndarray:
        out = np.empty(length, dtype=np.int64)
        for j in range(length):
            out[j] = x
            x = int(self.map_table[x])
        return out

    def observable(self, name: str) -> np.ndarray:
        if name not in self.observables:
            raise ValidationError(f"unknown observable {name!r}", "observable")
        return self.observables[name]

    def with_observable(self, name: str, values) -> "DiscreteSystem":
        obs = dict(self.observables)
        obs[name] = values
        return DiscreteSystem(self.n_states, self.map_table, obs)


def _check_set(sys_or_n, s: SetIndicator) -> None:
    n = sys_or_n if isinstance(sys_or_n, int) else sys_or_n.n_states
    if s.n_states != n:
        raise ValidationError(f"set is over {s.n_states} states, expected {n}", "set")


def measure_of(mu: PointMassMeasure, s: SetIndicator) -> float:
    """mu(s): sum of the weights of atoms lying in ``s``."""
    terms = []
    for state, w in mu.atoms:
        if not 0 <= state < s.n_states:
            raise ValidationError(f"atom state {state} outside 0..{s.n_states - 1}", "measure")
        if s.members[state]:
            terms.append(w)
    return math.fsum(terms)


def preimage(sys: DiscreteSystem, s: SetIndicator, i: int = 1) -> SetIndicator:
    """{x : f^i(x) in s}."""
    if i < 0:
        raise ValidationError("preimage order must be >= 0", "i")
    _check_set(sys, s)
    members = s.members
    for _ in range(i):
        members = members[sys.map_table]
    return SetIndicator(members)


def orbit_decomposition(sys: DiscreteSystem, x: int) -> tuple[list[int], list[int]]:
    """Split the forward orbit of ``x`` into (preperiod, cycle)."""
    if not 0 <= x < sys.n_states:
        raise ValidationError(f"state {x} outside 0..{sys.n_states - 1}", "x")
    seen: dict[int, int] = {}
    path: list[int] = []
    while x not in seen:
        seen[x] = len(path)
        path.append(x)
        x = int(sys.map_table[x])
    start = seen[x]
    return path[:start], path[start:]


def is_invariant(sys: DiscreteSystem, mu: PointMassMeasure, atol: float = 1e-12) -> bool:
    """mu(f^{-1}{x}) == mu({x}) for every singleton."""
    w = mu.dense(sys.n_states)
    pushed = np.zeros(sys.n_states)
    np.add.at(pushed, sys.map_table, w)
    return bool(np.allclose(pushed, w, rtol=0.0, atol=atol))


# --- JSON --------------------------------------------------------------------

def _read_json(source) -> dict:
    if isinstance(source, Mapping):
        return dict(source)
    path = Path(source)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON ({exc.msg} at line {exc.lineno})", str(path)) from exc
    except OSError as exc:
        raise ValidationError(f"cannot read file: {exc.strerror}", str(path)) from exc


def load_measure(source, n_states: int | None = None) -> PointMassMeasure:
    """Parse ``{"measure": [[state, weight], ...]}`` (or the bare list)."""
    doc = source if isinstance(source, list) else _read_json(source)
    raw = doc if isinstance(doc, list) else doc.get("measure")
    if raw is None:
        raise ValidationError("missing field", "measure")
    try:
        atoms = tuple((int(a[0]), float(a[1])) for a in raw)
    except (TypeError, ValueError, IndexError) as exc:
        raise ValidationError("atoms must be [state, weight] pairs", "measure") from exc
    mu = PointMassMeasure(atoms)
    if n_states is not None:
        mu.dense(n_states)
    return mu


def load_system(source) -> tuple[DiscreteSystem, PointMassMeasure | None]:
    """Parse the system document.

    Format: ``{"n_states": int, "map": [...], "observables": {name: [...]},
    "measure": [[state, weight], ...]}``; ``observables`` and ``measure`` are
    optional.
    """
    doc = _read_json(source)
    for key in ("n_states", "map"):
        if key not in doc:
            raise ValidationError("missing field", key)
    try:
        n = int(doc["n_states"])
        table = np.asarray(doc["map"])
    except (TypeError, ValueError) as exc:
        raise ValidationError("n_states must be an integer", "n_states") from exc
    obs = doc.get("observables", {}) or {}
    if not isinstance(obs, Mapping):
        raise ValidationError("must be an object of name -> values", "observables")
    sys = DiscreteSystem(n, table, obs)
    mu = load_measure(doc, n) if "measure" in doc else None
    return sys, mu


def system_to_json(sys: DiscreteSystem, mu: PointMassMeasure | None = None) -> dict:
    doc = {
        "n_states": sys.n_states,
        "map": [int(v) for v in sys.map_table],
        "observables": {k: [float(v) for v in arr] for k, arr in sys.observables.items()},
    }
    if mu is not None:
        doc["measure"] = [[s, w] for s, w in mu.atoms]
    return doc
