"""Predictable integrands on the sequence space and their discretizations.

The workhorse is the grid integrand: a per-cell coefficient table whose
entry at (scenario, j) is the finitely supported sequence the left-point
sum uses on the cell (t_j, t_{j+1}].  A left-continuous step process is
constant on exactly such cells, so its value AT a node is the coefficient
of the cell ending there; that convention is what later makes the jump
and stopping identities of the integral exact on the grid rather than
merely O(mesh).

Simple predictable integrands keep their own stopping-time breakpoints
and per-interval coefficient sequences; sampling a grid integrand along a
random partition produces one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .cylsemi import CoordinatePaths, FiniteSeq, SeqPathPrimal
from .grid_paths import Ensemble, StoppingTime, TimeGrid

__all__ = [
    "ElementaryIntegrand",
    "GridIntegrand",
    "RandomPartition",
    "SimplePredictableIntegrand",
    "StoppingTime",
    "as_grid",
    "elementary_to_grid",
    "full_grid_partition",
    "hitting_time",
    "left_limit_integrand",
    "localize",
    "partition_sequence",
    "sample_at",
    "sup_seminorm",
]

_DOM_JITTER = 20


def _weight_vector(dim: int, weights: Optional[Mapping[int, float]]) -> np.ndarray:
    w = np.ones(dim)
    if weights:
        for j, v in weights.items():
            if v <= 0:
                raise ValueError("seminorm weights must be positive")
            if 0 <= int(j) < dim:
                w[int(j)] = float(v)
    return w


@dataclass(frozen=True)
class ElementaryIntegrand:
    """Finite sum of products h_k(t, omega) e_{j_k} with scalar step h_k.

    An empty sum is legal and integrates to zero."""

    terms: tuple  # of (StepScalarProcess, FiniteSeq)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))


class GridIntegrand:
    """Cell-coefficient table for left-point sums.

    cells[s, j] is the coefficient vector on (t_j, t_{j+1}]; atom[s] the
    value on {0} (it never enters pathwise sums and is reported as a
    separate pairing with the initial dual value).  tail[s] is the value
    at the horizon node, which starts no cell; it defaults to the last
    cell coefficient (the step-process convention) and only seminorm
    evaluation reads it."""

    __slots__ = ("grid", "cells", "atom", "tail", "support")

    def __init__(
        self,
        grid: TimeGrid,
        cells: np.ndarray,
        atom: np.ndarray,
        support: Optional[Sequence[int]] = None,
        tail: Optional[np.ndarray] = None,
    ):
        self.grid = grid
        cells = np.asarray(cells, dtype=float)
        atom = np.asarray(atom, dtype=float)
        if cells.ndim != 3 or cells.shape[1] != grid.size - 1:
            raise ValueError("cells must have shape (scenarios, nodes-1, dim)")
        if atom.shape != (cells.shape[0], cells.shape[2]):
            raise ValueError("atom must have shape (scenarios, dim)")
        self.cells = cells
        self.atom = atom
        if tail is None:
            tail = cells[:, -1, :].copy()
        else:
            tail = np.asarray(tail, dtype=float)
            if tail.shape != atom.shape:
                raise ValueError("tail must have shape (scenarios, dim)")
        self.tail = tail
        if support is None:
            touched = (
                np.any(cells != 0.0, axis=(0, 1))
                | np.any(atom != 0.0, axis=0)
                | np.any(tail != 0.0, axis=0)
            )
            support = tuple(int(k) for k in np.where(touched)[0])
        self.support = tuple(support)

    @property
    def dim(self) -> int:
        return self.cells.shape[2]

    @property
    def scenario_count(self) -> int:
        return self.cells.shape[0]

    def value_at_node(self, j: int) -> np.ndarray:
        """The integrand's value at t_j: the coefficient of the cell ending
        there (left continuity), the atom at j = 0."""
        if j == 0:
            return self.atom
        return self.cells[:, j - 1, :]

    def truncated(self, tau: StoppingTime) -> "GridIntegrand":
        """H * 1_[0, tau]: keeps exactly the cells contained in [0, tau]."""
        idx = tau.index
        if idx.size != self.scenario_count:
            idx = np.broadcast_to(idx, (self.scenario_count,))
        keep = (np.arange(self.grid.size - 1)[None, :] + 1) <= idx[:, None]
        cells = np.where(keep[:, :, None], self.cells, 0.0)
        tail = np.where((idx >= self.grid.size - 1)[:, None], self.tail, 0.0)
        return GridIntegrand(self.grid, cells, self.atom, self.support, tail)

    def scaled(self, c: float) -> "GridIntegrand":
        return GridIntegrand(self.grid, c * self.cells, c * self.atom, self.support, c * self.tail)

    def plus(self, other: "GridIntegrand") -> "GridIntegrand":
        if other.dim != self.dim or not self.grid.same_as(other.grid):
            raise ValueError("grid integrands must share grid and dimension")
        return GridIntegrand(
            self.grid, self.cells + other.cells, self.atom + other.atom, None, self.tail + other.tail
        )

    def mul_step(self, g) -> "GridIntegrand":
        """Pointwise product (g H) for a scalar step process g; the atom is
        scaled by g's value at 0 and the tail by g's last cell value."""
        C = g.cell_coefficients()
        if C.shape[0] == 1 and self.scenario_count > 1:
            C = np.broadcast_to(C, (self.scenario_count, C.shape[1]))
        cells = self.cells * C[:, :, None]
        atom = self.atom * np.asarray(g.value_at_zero)[:, None]
        tail = self.tail * C[:, -1][:, None]
        return GridIntegrand(self.grid, cells, atom, self.support, tail)

    def scale_scenarios(self, xi: np.ndarray) -> "GridIntegrand":
        """Scenario-wise scaling by a time-0-measurable random variable."""
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.size != self.scenario_count:
            raise ValueError("need one factor per scenario")
        return GridIntegrand(
            self.grid,
            self.cells * xi[:, None, None],
            self.atom * xi[:, None],
            self.support,
            self.tail * xi[:, None],
        )

    # constructors -----------------------------------------------------

    @classmethod
    def constant(cls, grid: TimeGrid, phi: FiniteSeq, dim: int, scenario_count: int = 1) -> "GridIntegrand":
        v = phi.as_dense(dim)
        cells = np.tile(v, (scenario_count, grid.size - 1, 1))
        atom = np.tile(v, (scenario_count, 1))
        return cls(grid, cells, atom, phi.support)

    @classmethod
    def linear_t(cls, grid: TimeGrid, phi: FiniteSeq, dim: int, scenario_count: int = 1) -> "GridIntegrand":
        """H_t = t * phi: cell coefficients at left endpoints, H_0 = 0, and
        the horizon value T * phi carried in the tail."""
        v = phi.as_dense(dim)
        cells = grid.nodes[:-1][None, :, None] * v[None, None, :]
        cells = np.tile(cells, (scenario_count, 1, 1))
        atom = np.zeros((scenario_count, dim))
        tail = np.tile(grid.horizon * v, (scenario_count, 1))
        return cls(grid, cells, atom, phi.support, tail)

    @classmethod
    def from_function(
        cls,
        grid: TimeGrid,
        f: Callable[[float], FiniteSeq],
        dim: int,
        scenario_count: int = 1,
    ) -> "GridIntegrand":
        """Deterministic time-dependent integrand, sampled at cell left
        endpoints; the atom is f(0) and the tail f(horizon)."""
        rows = np.stack([f(float(t)).as_dense(dim) for t in grid.nodes[:-1]])
        cells = np.tile(rows[None, :, :], (scenario_count, 1, 1))
        atom = np.tile(f(0.0).as_dense(dim), (scenario_count, 1))
        tail = np.tile(f(float(grid.horizon)).as_dense(dim), (scenario_count, 1))
        return cls(grid, cells, atom, None, tail)


def left_limit_integrand(Y: SeqPathPrimal) -> GridIntegrand:
    """The predictable integrand Y_- as a grid integrand.

    On (t_j, t_{j+1}] the left-limit process of a path that moves only at
    nodes equals Y_{t_j} (the post-jump value), so the cell table holds
    Y's right values at cell left endpoints; the value at a node t_{j+1}
    is then the pre-jump value Y.left there, the atom is Y_0, and the
    tail is Y's left value at the horizon."""
    S, M, d = Y.scenario_count, Y.grid.size, Y.dim
    cells = np.zeros((S, M - 1, d))
    atom = np.zeros((S, d))
    tail = np.zeros((S, d))
    for k in Y.active:
        cells[:, :, k] = Y.coords[k].right[:, :-1]
        atom[:, k] = Y.coords[k].right[:, 0]
        tail[:, k] = Y.coords[k].left[:, -1]
    return GridIntegrand(Y.grid, cells, atom, Y.active, tail)


class SimplePredictableIntegrand:
    """A_0 1_{{0}} + sum_k A_k 1_{(tau_k, tau_{k+1}]} with grid-snapped,
    nondecreasing per-scenario stopping nodes and bounded coefficients.

    Measurability of A_k at tau_k holds by construction: coefficients are
    produced either by sampling an adapted table at tau_k or from explicit
    deterministic data."""

    __slots__ = ("grid", "stop_idx", "coeffs", "atom", "bound")

    def __init__(self, grid: TimeGrid, stop_idx, coeffs, atom, bound: Optional[float] = None):
        self.grid = grid
        si = np.asarray(stop_idx, dtype=int)
        if si.ndim == 1:
            si = si[None, :]
        co = np.asarray(coeffs, dtype=float)
        if co.ndim == 2:
            co = co[None, :, :]
        at = np.asarray(atom, dtype=float)
        if at.ndim == 1:
            at = at[None, :]
        S = max(si.shape[0], co.shape[0], at.shape[0])
        if si.shape[0] == 1 and S > 1:
            si = np.broadcast_to(si, (S, si.shape[1])).copy()
        if co.shape[0] == 1 and S > 1:
            co = np.broadcast_to(co, (S,) + co.shape[1:]).copy()
        if at.shape[0] == 1 and S > 1:
            at = np.broadcast_to(at, (S, at.shape[1])).copy()
        if co.shape[1] != si.shape[1] - 1:
            raise ValueError("need one coefficient block per stop interval")
        if at.shape[1] != co.shape[2]:
            raise ValueError("atom dimension mismatch")
        if np.any(si[:, 0] != 0):
            raise ValueError("stop times must start at 0")
        if np.any(np.diff(si, axis=1) < 0):
            raise ValueError("stop times must be nondecreasing")
        if np.any(si > grid.size - 1):
            raise ValueError("stop times must be grid nodes")
        self.stop_idx, self.coeffs, self.atom = si, co, at
        declared = float(bound) if bound is not None else float(np.max(np.abs(co), initial=0.0))
        if np.any(np.abs(co) > declared + 1e-12):
            raise ValueError("coefficients exceed the declared bound")
        self.bound = declared

    @property
    def dim(self) -> int:
        return self.coeffs.shape[2]

    @property
    def scenario_count(self) -> int:
        return self.stop_idx.shape[0]

    def truncated(self, tau: StoppingTime) -> "SimplePredictableIntegrand":
        cap = np.minimum(tau.index, self.grid.size - 1)
        if cap.size != self.scenario_count:
            cap = np.broadcast_to(cap, (self.scenario_count,))
        capped = np.minimum(self.stop_idx, cap[:, None])
        return SimplePredictableIntegrand(self.grid, capped, self.coeffs, self.atom, self.bound)

    def cell_table(self) -> np.ndarray:
        """Per-cell coefficients, shape (scenarios, nodes-1, dim), built by
        exact repetition."""
        S, M, d = self.scenario_count, self.grid.size, self.dim
        C = np.zeros((S, M - 1, d))
        for s in range(S):
            b = self.stop_idx[s]
            reps = np.diff(b)
            if b[-1] > 0:
                C[s, : b[-1], :] = np.repeat(self.coeffs[s], reps, axis=0)
        return C


def as_grid(H: SimplePredictableIntegrand) -> GridIntegrand:
    """The same process as a grid integrand (independent expansion path)."""
    return GridIntegrand(H.grid, H.cell_table(), H.atom.copy())


def elementary_to_grid(E: ElementaryIntegrand, dim: int, scenario_count: int) -> GridIntegrand:
    """Cell table of sum_k h_k e_{j_k}; used for cross-route checks."""
    if not E.terms:
        raise ValueError("cannot infer a grid from an empty term list")
    grid = E.terms[0][0].grid
    cells = np.zeros((scenario_count, grid.size - 1, dim))
    atom = np.zeros((scenario_count, dim))
    for h, phi in E.terms:
        C = h.cell_coefficients()
        if C.shape[0] == 1 and scenario_count > 1:
            C = np.broadcast_to(C, (scenario_count, C.shape[1]))
        vz = np.asarray(h.value_at_zero)
        if vz.size == 1 and scenario_count > 1:
            vz = np.broadcast_to(vz, (scenario_count,))
        for j, a in phi.items():
            if j >= dim:
                raise ValueError(f"term touches coordinate {j} outside dimension {dim}")
            cells[:, :, j] += a * C
            atom[:, j] += a * vz
    return GridIntegrand(grid, cells, atom)


@dataclass(frozen=True)
class RandomPartition:
    """Per-scenario nondecreasing grid nodes 0 = tau_0 <= ... <= tau_{m+1}."""

    grid: TimeGrid
    idx: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.idx, dtype=int)
        if idx.ndim == 1:
            idx = idx[None, :]
        object.__setattr__(self, "idx", idx)
        if np.any(idx[:, 0] != 0):
            raise ValueError("partitions must start at node 0")
        if np.any(np.diff(idx, axis=1) < 0):
            raise ValueError("partition nodes must be nondecreasing")
        if np.any(idx > self.grid.size - 1):
            raise ValueError("partition points must be grid nodes")

    @property
    def scenario_count(self) -> int:
        return self.idx.shape[0]

    def mesh(self) -> float:
        """Largest gap between consecutive points, horizon end included."""
        times = self.grid.nodes[self.idx]
        gaps = np.diff(times, axis=1)
        tail = self.grid.horizon - times[:, -1]
        return float(max(np.max(gaps, initial=0.0), np.max(tail, initial=0.0)))


def full_grid_partition(grid: TimeGrid, scenario_count: int = 1) -> RandomPartition:
    return RandomPartition(grid, np.tile(np.arange(grid.size), (scenario_count, 1)))


def partition_sequence(
    grid: TimeGrid,
    kind: str,
    n_levels: int,
    ensemble: Optional[Ensemble] = None,
    scenario_count: int = 1,
) -> list[RandomPartition]:
    """Refining partitions tending to the identity.

    Level k subdivides [0, horizon] into 2^k dyadic pieces snapped up to
    grid nodes; the jittered variant perturbs interior points by less than
    half a spacing (per scenario, from the jitter stream) before snapping.
    Meshes shrink to the grid spacing and the horizon is always the last
    point."""
    if kind not in ("dyadic", "jittered"):
        raise ValueError(f"unknown partition kind {kind!r}")
    if kind == "jittered" and ensemble is None:
        raise ValueError("jittered partitions need an ensemble for the jitter stream")
    T = grid.horizon
    out = []
    for level in range(1, n_levels + 1):
        pieces = 2**level
        spacing = T / pieces
        interior = np.arange(1, pieces) * spacing
        if kind == "dyadic":
            idx_row = [0] + [grid.snap_up(t) for t in interior] + [grid.size - 1]
            idx = np.tile(np.asarray(idx_row, dtype=int), (scenario_count, 1))
        else:
            assert ensemble is not None
            S = ensemble.scenario_count
            rows = np.zeros((S, pieces + 1), dtype=int)
            rows[:, -1] = grid.size - 1
            for s in range(S):
                rng = ensemble.rng(_DOM_JITTER, s, level)
                shifted = interior + rng.uniform(-0.45, 0.45, size=interior.size) * spacing
                rows[s, 1:-1] = [grid.snap_up(min(max(t, 0.0), T)) for t in shifted]
            idx = rows
        out.append(RandomPartition(grid, idx))
    return out


def sample_at(H: GridIntegrand, sigma: RandomPartition) -> SimplePredictableIntegrand:
    """The sampled process H^sigma: on (tau_k, tau_{k+1}] the coefficient the
    left-point sum uses at tau_k, i.e. the table value of the cell starting
    there; zero beyond the last point; the atom is H's value on {0}."""
    if not H.grid.same_as(sigma.grid):
        raise ValueError("partition lives on a different grid")
    idx = sigma.idx
    if idx.shape[0] == 1 and H.scenario_count > 1:
        idx = np.broadcast_to(idx, (H.scenario_count, idx.shape[1]))
    elif idx.shape[0] != H.scenario_count:
        raise ValueError("partition scenario count mismatch")
    take = np.minimum(idx[:, :-1], H.grid.size - 2)
    coeffs = np.take_along_axis(H.cells, take[:, :, None], axis=1)
    # a partition point on the horizon starts no cell: its coefficient is dead
    dead = idx[:, :-1] >= H.grid.size - 1
    coeffs = np.where(dead[:, :, None], 0.0, coeffs)
    return SimplePredictableIntegrand(H.grid, idx, coeffs, H.atom.copy())


def sup_seminorm(
    H: "GridIntegrand | SimplePredictableIntegrand",
    weights: Optional[Mapping[int, float]] = None,
) -> float:
    """Exact max over scenarios and nodes of max_j w_j |a_j| (atom and, for
    grid integrands, the horizon value included)."""
    w = _weight_vector(H.dim, weights)
    if isinstance(H, GridIntegrand):
        body = np.max(np.abs(H.cells) * w[None, None, :], initial=0.0)
        body = max(body, np.max(np.abs(H.tail) * w[None, :], initial=0.0))
    else:
        body = np.max(np.abs(H.coeffs) * w[None, None, :], initial=0.0)
    return float(max(body, np.max(np.abs(H.atom) * w[None, :], initial=0.0)))


def localize(
    H: GridIntegrand,
    levels: Sequence[float],
    weights: Optional[Mapping[int, float]] = None,
) -> list[StoppingTime]:
    """Stopping times tau_n at the first node whose upcoming-cell coefficient
    exceeds the n-th level in the weighted sup-seminorm, or where t >= n
    (the sequence index, so the caps march to infinity regardless of the
    thresholds chosen).

    Truncating at tau_n keeps only cells before the exceeding one, so
    sup_seminorm(H * 1_[0, tau_n]) <= level n holds exactly (the atom
    survives truncation and must be within the level)."""
    w = _weight_vector(H.dim, weights)
    p = np.max(np.abs(H.cells) * w[None, None, :], axis=2)  # (S, M-1)
    M = H.grid.size
    prev = None
    out = []
    for n, level in enumerate(levels, start=1):
        if prev is not None and level < prev:
            raise ValueError("levels must be nondecreasing")
        prev = level
        exceed = p > float(level)
        first = np.where(exceed.any(axis=1), exceed.argmax(axis=1), M)
        try:
            cap = H.grid.snap_up(float(n))
        except ValueError:
            cap = M
        tau = np.minimum(first, cap)
        out.append(StoppingTime(H.grid, tau, kind="hitting"))
    return out


def hitting_time(
    X: CoordinatePaths,
    level: float,
    weights: Optional[Mapping[int, float]] = None,
) -> StoppingTime:
    """First node where max_j w_j |X^j_t| exceeds the level (never otherwise).

    Uses node values only, so the time is determined by the path history up
    to itself."""
    w = _weight_vector(X.dim, weights)
    vals = X.dual_values("right")
    p = np.max(np.abs(vals) * w[None, None, :], axis=2)  # (S, M)
    exceed = p > float(level)
    idx = np.where(exceed.any(axis=1), exceed.argmax(axis=1), X.grid.size)
    return StoppingTime(X.grid, idx, kind="hitting")
