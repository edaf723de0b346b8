"""Sequence-space semimartingales and their duals.

The test space is the set of finitely supported real sequences; its dual
is the space of all real sequences, truncated here to d tracked
coordinates.  A sequence semimartingale is a d-tuple of scalar cadlag
paths Z^1 ... Z^d on one shared grid, acting on a finitely supported
sequence phi by X(phi) = sum_j phi_j Z^j.  The node-indexed dual view
(Z^1_t, ..., Z^d_t) is the regular cadlag version; no separate
regularization step exists or is needed on a grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .grid_paths import (
    Ensemble,
    ScalarPath,
    StoppingTime,
    TimeGrid,
    combine,
    stop_path,
)
from .noise import NoiseSpec, build_coordinate_paths


class FiniteSeq:
    """Finitely supported sequence phi = sum_j a_j e_j, stored sparsely.

    Zero entries are dropped at construction; indices are 0-based."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[int, float] | Iterable[tuple[int, float]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        clean: dict[int, float] = {}
        for j, a in items:
            j = int(j)
            if j < 0:
                raise ValueError("coordinate indices must be nonnegative")
            a = float(a)
            if a != 0.0:
                clean[j] = clean.get(j, 0.0) + a
                if clean[j] == 0.0:
                    del clean[j]
        self._entries = dict(sorted(clean.items()))

    @classmethod
    def basis(cls, j: int) -> "FiniteSeq":
        return cls({j: 1.0})

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(self._entries)

    def items(self) -> tuple[tuple[int, float], ...]:
        return tuple(self._entries.items())

    def __getitem__(self, j: int) -> float:
        return self._entries.get(int(j), 0.0)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, FiniteSeq) and self._entries == other._entries

    def __hash__(self):
        return hash(tuple(self._entries.items()))

    def __repr__(self):
        body = " + ".join(f"{a:g}*e{j}" for j, a in self._entries.items()) or "0"
        return f"FiniteSeq({body})"

    def scaled(self, c: float) -> "FiniteSeq":
        return FiniteSeq({j: c * a for j, a in self._entries.items()})

    def plus(self, other: "FiniteSeq") -> "FiniteSeq":
        out = dict(self._entries)
        for j, a in other._entries.items():
            out[j] = out.get(j, 0.0) + a
        return FiniteSeq(out)

    def as_dense(self, dim: int) -> np.ndarray:
        if self._entries and max(self._entries) >= dim:
            raise ValueError(f"sequence touches coordinate {max(self._entries)} outside dimension {dim}")
        v = np.zeros(dim)
        for j, a in self._entries.items():
            v[j] = a
        return v


@dataclass(frozen=True)
class DualVec:
    """Dense element of the dual truncation: one real per tracked coordinate."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("dual vector must be one-dimensional")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return int(self.values.size)


def pair(x: "DualVec | np.ndarray", phi: FiniteSeq) -> "float | np.ndarray":
    """Duality pairing <x, phi> = sum_j phi_j x_j.

    x may be a DualVec or any array whose last axis indexes coordinates;
    the pairing maps over leading axes."""
    vals = x.values if isinstance(x, DualVec) else np.asarray(x, dtype=float)
    dim = vals.shape[-1]
    out = np.zeros(vals.shape[:-1])
    for j, a in phi.items():
        if j >= dim:
            raise ValueError(f"pairing touches coordinate {j} outside dimension {dim}")
        out = out + a * vals[..., j]
    return float(out) if out.ndim == 0 else out


class CoordinatePaths:
    """d scalar cadlag paths on one shared grid, one per tracked coordinate."""

    __slots__ = ("grid", "coords")

    def __init__(self, coords: Sequence[ScalarPath]):
        if not coords:
            raise ValueError("need at least one coordinate path")
        grid = coords[0].grid
        S = coords[0].scenario_count
        for p in coords[1:]:
            if not grid.same_as(p.grid):
                raise ValueError("coordinate paths must share one grid")
            if p.scenario_count != S:
                raise ValueError("coordinate paths must share the scenario count")
        self.grid = grid
        self.coords = list(coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def scenario_count(self) -> int:
        return self.coords[0].scenario_count

    def dual_values(self, side: str = "right") -> np.ndarray:
        """Node-indexed dual view, shape (scenarios, nodes, dim)."""
        mats = [getattr(p, side) for p in self.coords]
        return np.stack(mats, axis=-1)

    def initial(self) -> np.ndarray:
        """Initial dual values, shape (scenarios, dim)."""
        return np.stack([p.right[:, 0] for p in self.coords], axis=-1)

    def jump_at(self, t: float) -> np.ndarray:
        """Jump vector right - left at node t, shape (scenarios, dim)."""
        j = self.grid.index_of(t)
        return np.stack([p.right[:, j] - p.left[:, j] for p in self.coords], axis=-1)


def _zero_like(template: ScalarPath) -> ScalarPath:
    return ScalarPath(template.grid, np.zeros_like(template.right))


class SeqSemimartingale(CoordinatePaths):
    """Integrator side: X(phi) = sum_j phi_j Z^j for finitely supported phi."""

    def evaluate(self, phi: FiniteSeq) -> ScalarPath:
        """The scalar semimartingale X(phi); decomposition inherited part-wise."""
        terms = []
        for j, a in phi.items():
            if j >= self.dim:
                raise ValueError(f"evaluation touches coordinate {j} outside dimension {self.dim}")
            terms.append((a, self.coords[j]))
        if not terms:
            return _zero_like(self.coords[0])
        return combine(terms)

    def stopped(self, tau: StoppingTime) -> "SeqSemimartingale":
        return SeqSemimartingale([stop_path(p, tau) for p in self.coords])

    def continuous_mart_part(self) -> "SeqSemimartingale":
        """Coordinate-wise continuous local-martingale part X^c (started at 0)."""
        parts = []
        for k, p in enumerate(self.coords):
            if p.parts is None:
                raise ValueError(f"coordinate {k} carries no decomposition")
            parts.append(p.parts.mart_cont)
        return SeqSemimartingale(parts)

    def add(self, other: "SeqSemimartingale") -> "SeqSemimartingale":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return SeqSemimartingale(
            [combine([(1.0, a), (1.0, b)]) for a, b in zip(self.coords, other.coords)]
        )

    def scaled(self, c: float) -> "SeqSemimartingale":
        return SeqSemimartingale([p.scaled(c) for p in self.coords])


class SeqPathPrimal(CoordinatePaths):
    """Integrand side: a cadlag path with finitely many active coordinates.

    Active coordinates default to all of them; inactive coordinates must be
    identically zero."""

    __slots__ = ("active",)

    def __init__(self, coords: Sequence[ScalarPath], active: Optional[Sequence[int]] = None):
        super().__init__(coords)
        if active is None:
            active = range(len(coords))
        act = tuple(sorted(int(a) for a in active))
        for k, p in enumerate(coords):
            if k not in act and (np.any(p.right != 0.0) or np.any(p.left != 0.0)):
                raise ValueError(f"coordinate {k} is inactive but not identically zero")
        self.active = act

    def value_seq(self, scenario: int, node: int) -> FiniteSeq:
        return FiniteSeq({k: self.coords[k].right[scenario, node] for k in self.active})

    def stopped(self, tau: StoppingTime) -> "SeqPathPrimal":
        return SeqPathPrimal([stop_path(p, tau) for p in self.coords], self.active)


def pairing_path(X: CoordinatePaths, Y: CoordinatePaths) -> ScalarPath:
    """The scalar path t -> <X_t, Y_t> with truthful left limits
    <X_{t-}, Y_{t-}>."""
    if X.dim != Y.dim:
        raise ValueError("pairing needs equal dimensions")
    if not X.grid.same_as(Y.grid):
        raise ValueError("pairing needs a shared grid")
    right = sum(x.right * y.right for x, y in zip(X.coords, Y.coords))
    left = sum(x.left * y.left for x, y in zip(X.coords, Y.coords))
    left[:, 0] = right[:, 0]
    return ScalarPath(X.grid, right, left)


def sequence_from_specs(
    horizon: float,
    base_steps: int,
    specs: Sequence[NoiseSpec],
    ensemble: Ensemble,
    extra_times: Sequence[float] = (),
    max_jumps: int = 4096,
) -> tuple[SeqSemimartingale, dict[int, list[np.ndarray]]]:
    """Build the integrator X with one coordinate per noise spec."""
    _, paths, jumps = build_coordinate_paths(
        horizon, base_steps, specs, ensemble, extra_times, max_jumps
    )
    return SeqSemimartingale(paths), jumps


def primal_from_dual(X: SeqSemimartingale, active: Optional[Sequence[int]] = None) -> SeqPathPrimal:
    """Reuse X's coordinate paths as a primal-side integrand path (the
    mirrored pair used in bracket checks)."""
    return SeqPathPrimal(list(X.coords), active)
