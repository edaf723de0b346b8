"""Event grids and cadlag scalar paths sampled on them.

Everything downstream works on a shared event grid: a strictly increasing
set of times starting at 0, where every jump of every attached path sits
exactly on a node.  A path stores two values per node, the left limit
z_{t-} and the value z_t, so jumps are representable without any implicit
interpolation.  Ensembles of scenarios are stored as rows of a single
(scenarios x nodes) matrix pair; scenario randomness is always derived
from a 64-bit master seed so regeneration is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

NODE_MERGE_TOL = 1e-12


def _as_matrix(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("path values must be a (scenarios, nodes) matrix")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing event times t_0 = 0 < ... < t_{M-1} = horizon."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("grid needs at least the nodes {0, horizon}")
        if abs(nodes[0]) > NODE_MERGE_TOL:
            raise ValueError("grid must start at time 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @cached_property
    def widths(self) -> np.ndarray:
        """Cell widths t_{j+1} - t_j, length size - 1."""
        return np.diff(self.nodes)

    def index_of(self, t: float, tol: float = NODE_MERGE_TOL) -> int:
        """Node index of time t; raises if t is not a node."""
        j = int(np.searchsorted(self.nodes, t - tol))
        if j >= self.nodes.size or abs(self.nodes[j] - t) > tol:
            raise ValueError(f"time {t} is not a grid node")
        return j

    def snap_up(self, t: float, tol: float = NODE_MERGE_TOL) -> int:
        """Index of the first node >= t (stopping times round up to nodes)."""
        if t > self.horizon + tol:
            raise ValueError(f"time {t} lies beyond the horizon {self.horizon}")
        return int(np.searchsorted(self.nodes, t - tol))

    def last_node_before(self, t: float, tol: float = NODE_MERGE_TOL) -> int:
        """Index of the last node <= t (window ends for running suprema)."""
        return int(np.searchsorted(self.nodes, t + tol)) - 1

    def same_as(self, other: "TimeGrid") -> bool:
        return self.nodes.size == other.nodes.size and bool(
            np.all(np.abs(self.nodes - other.nodes) <= NODE_MERGE_TOL)
        )


def build_grid(horizon: float, base_steps: int, extra_times: Sequence[float] = ()) -> TimeGrid:
    """Uniform grid of base_steps cells merged with extra event times.

    Extra times inside (0, horizon) become nodes; times closer than 1e-12
    to an existing node are merged into it.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if base_steps < 1:
        raise ValueError("base_steps must be at least 1")
    nodes = np.linspace(0.0, horizon, base_steps + 1)
    extras = np.asarray(sorted(extra_times), dtype=float)
    if extras.size:
        if extras[0] < -NODE_MERGE_TOL or extras[-1] > horizon + NODE_MERGE_TOL:
            raise ValueError("extra times must lie inside [0, horizon]")
        merged = np.sort(np.concatenate([nodes, extras]))
        keep = np.concatenate([[True], np.diff(merged) > NODE_MERGE_TOL])
        nodes = merged[keep]
        # the horizon node always survives merging
        nodes[-1] = horizon
    return TimeGrid(nodes)


@dataclass(frozen=True)
class Ensemble:
    """Scenario bookkeeping: count plus the master seed all streams derive from."""

    scenario_count: int
    master_seed: int

    def __post_init__(self):
        if self.scenario_count < 1:
            raise ValueError("ensemble needs at least one scenario")
        if not (0 <= int(self.master_seed) < 2**64):
            raise ValueError("master seed must be a 64-bit unsigned integer")

    def seed_seq(self, domain: int, scenario: int, *extra: int) -> np.random.SeedSequence:
        return np.random.SeedSequence((int(self.master_seed), int(domain), int(scenario)) + tuple(int(e) for e in extra))

    def rng(self, domain: int, scenario: int, *extra: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_seq(domain, scenario, *extra)))

    def scenario_fingerprints(self) -> list[int]:
        """One derived word per scenario, echoed into manifests."""
        return [int(self.seed_seq(0, s).generate_state(1)[0]) for s in range(self.scenario_count)]


@dataclass(frozen=True)
class PathParts:
    """Decomposition of z - z_0 into continuous-martingale, jump-martingale
    and finite-variation parts, each a path starting at 0.

    The classical pair view is recovered through martingale_part (the sum of
    the first two) and fv_part; the martingale part counts as continuous
    exactly when the jump-martingale component vanishes identically.
    """

    mart_cont: "ScalarPath"
    mart_jump: "ScalarPath"
    fv: "ScalarPath"

    def __post_init__(self):
        for p in (self.mart_cont, self.mart_jump, self.fv):
            if p.parts is not None:
                raise ValueError("decomposition parts must not carry nested parts")
            if np.max(np.abs(p.right[:, 0])) > 1e-12:
                raise ValueError("decomposition parts must start at 0")

    @property
    def martingale_continuous(self) -> bool:
        mj = self.mart_jump
        return bool(np.max(np.abs(mj.right)) == 0.0 and np.max(np.abs(mj.left)) == 0.0)

    def scaled(self, c: float) -> "PathParts":
        return PathParts(self.mart_cont.scaled(c), self.mart_jump.scaled(c), self.fv.scaled(c))


class ScalarPath:
    """A cadlag scalar path ensemble on a shared grid.

    left[s, j] is the left limit at t_j (by convention equal to the value
    at t_0) and right[s, j] the value at t_j.  Nodes with left != right are
    the jump times; they must be grid nodes by construction.  parts, when
    present, decomposes z - z_0 (see PathParts)."""

    __slots__ = ("grid", "left", "right", "parts")

    def __init__(self, grid: TimeGrid, right, left=None, parts: Optional[PathParts] = None):
        self.grid = grid
        self.right = _as_matrix(right)
        self.left = self.right.copy() if left is None else _as_matrix(left)
        if self.right.shape != self.left.shape:
            raise ValueError("left and right value matrices must share a shape")
        if self.right.shape[1] != grid.size:
            raise ValueError("value matrix does not match the grid size")
        if self.right.shape[0] < 1:
            raise ValueError("path ensemble must contain at least one scenario")
        if np.max(np.abs(self.left[:, 0] - self.right[:, 0])) > 0:
            raise ValueError("left value at t_0 is the initial value by convention")
        self.parts = parts
        if parts is not None:
            self._check_parts()

    def _check_parts(self):
        assert self.parts is not None
        recon = self.right[:, :1] + self.parts.mart_cont.right + self.parts.mart_jump.right + self.parts.fv.right
        if np.max(np.abs(recon - self.right)) > 1e-9:
            raise ValueError("decomposition parts do not sum back to the path")

    @property
    def scenario_count(self) -> int:
        return self.right.shape[0]

    @property
    def initial(self) -> np.ndarray:
        return self.right[:, 0]

    def jumps(self) -> np.ndarray:
        """right - left per node; nonzero only at jump nodes."""
        return self.right - self.left

    def has_jumps(self) -> bool:
        return bool(np.any(self.right != self.left))

    def scaled(self, c: float) -> "ScalarPath":
        parts = self.parts.scaled(c) if self.parts is not None else None
        return ScalarPath(self.grid, c * self.right, c * self.left, parts)

    def without_parts(self) -> "ScalarPath":
        return ScalarPath(self.grid, self.right, self.left, None)

    def restrict_to(self, grid: TimeGrid, node_index: np.ndarray) -> "ScalarPath":
        """Path restricted to a sub-grid given by node indices into self.grid.

        Every jump node of the path must be kept, otherwise the restricted
        object would jump off-grid."""
        node_index = np.asarray(node_index, dtype=int)
        jump_nodes = np.where(np.any(self.right != self.left, axis=0))[0]
        if jump_nodes.size and not np.all(np.isin(jump_nodes, node_index)):
            raise ValueError("restriction would drop a jump node")
        parts = None
        if self.parts is not None:
            parts = PathParts(
                self.parts.mart_cont.restrict_to(grid, node_index),
                self.parts.mart_jump.restrict_to(grid, node_index),
                self.parts.fv.restrict_to(grid, node_index),
            )
        return ScalarPath(grid, self.right[:, node_index], self.left[:, node_index], parts)


def combine(terms: Sequence[tuple[float, ScalarPath]]) -> ScalarPath:
    """Node-wise linear combination sum_i c_i * z_i on one shared grid.

    Decompositions are combined part-wise when every term carries one and
    dropped otherwise."""
    if not terms:
        raise ValueError("combine needs at least one term")
    grid = terms[0][1].grid
    shape = terms[0][1].right.shape
    for _, p in terms[1:]:
        if not grid.same_as(p.grid):
            raise ValueError("combine requires a shared grid")
        if p.right.shape != shape:
            raise ValueError("combine requires equal scenario counts")
    right = sum(c * p.right for c, p in terms)
    left = sum(c * p.left for c, p in terms)
    parts = None
    if all(p.parts is not None for _, p in terms):
        parts = PathParts(
            combine([(c, p.parts.mart_cont) for c, p in terms]),
            combine([(c, p.parts.mart_jump) for c, p in terms]),
            combine([(c, p.parts.fv) for c, p in terms]),
        )
    return ScalarPath(grid, right, left, parts)


def constant_path(grid: TimeGrid, values, scenario_count: Optional[int] = None) -> ScalarPath:
    """Scenario-wise constant path z_t = c (no parts: the constant is z_0)."""
    vals = np.atleast_1d(np.asarray(values, dtype=float))
    if scenario_count is not None and vals.size == 1:
        vals = np.full(scenario_count, vals[0])
    mat = np.repeat(vals[:, None], grid.size, axis=1)
    zero = np.zeros_like(mat)
    parts = PathParts(
        ScalarPath(grid, zero), ScalarPath(grid, zero.copy()), ScalarPath(grid, zero.copy())
    )
    return ScalarPath(grid, mat, None, parts)


@dataclass(frozen=True)
class StoppingTime:
    """Per-scenario stopping node; index == grid.size encodes "never"."""

    grid: TimeGrid
    index: np.ndarray
    kind: str = "deterministic"

    NEVER: int = -1  # placeholder, real sentinel is grid.size

    def __post_init__(self):
        idx = np.asarray(self.index, dtype=int)
        object.__setattr__(self, "index", idx)
        if idx.ndim != 1:
            raise ValueError("stopping index must be one value per scenario")
        if np.any(idx < 0) or np.any(idx > self.grid.size):
            raise ValueError("stopping index out of range")

    @classmethod
    def deterministic(cls, grid: TimeGrid, t: float, scenario_count: int = 1) -> "StoppingTime":
        if np.isinf(t):
            j = grid.size
        else:
            j = grid.snap_up(t)
        return cls(grid, np.full(scenario_count, j, dtype=int), "deterministic")

    @classmethod
    def never(cls, grid: TimeGrid, scenario_count: int = 1) -> "StoppingTime":
        return cls(grid, np.full(scenario_count, grid.size, dtype=int), "deterministic")

    def times(self) -> np.ndarray:
        """Stopping times with +inf where never triggered."""
        t = np.full(self.index.shape, np.inf)
        hit = self.index < self.grid.size
        t[hit] = self.grid.nodes[self.index[hit]]
        return t

    def min_with(self, other: "StoppingTime") -> "StoppingTime":
        return StoppingTime(self.grid, np.minimum(self.index, other.index), "derived")


def stop_path(z: ScalarPath, tau: StoppingTime) -> ScalarPath:
    """The stopped path z^tau, frozen at z_tau from tau onward.

    Left limits stay truthful: at t > tau the path is constant, so the left
    value equals z_tau; at tau itself the original left limit survives."""
    if not z.grid.same_as(tau.grid):
        raise ValueError("stopping time lives on a different grid")
    if tau.index.shape[0] != z.scenario_count:
        raise ValueError("stopping time has the wrong scenario count")
    M = z.grid.size
    idx = np.minimum(tau.index, M - 1)[:, None]
    cols = np.arange(M)[None, :]
    cap = np.minimum(cols, idx)
    right = np.take_along_axis(z.right, cap, axis=1)
    frozen = np.take_along_axis(z.right, idx, axis=1)
    left = np.where(cols <= idx, z.left, frozen)
    parts = None
    if z.parts is not None:
        parts = PathParts(
            stop_path(z.parts.mart_cont, tau),
            stop_path(z.parts.mart_jump, tau),
            stop_path(z.parts.fv, tau),
        )
    return ScalarPath(z.grid, right, left, parts)


class StepScalarProcess:
    """Simple predictable scalar process: a_i on (u_i, u_{i+1}], 0 beyond u_n.

    Breakpoints are stored as grid node indices (stopping times snapped up
    to nodes), one nondecreasing row per scenario starting at node 0.  The
    value at {0} is carried separately and never enters pathwise integrals.
    """

    __slots__ = ("grid", "break_idx", "coeffs", "value_at_zero", "bound")

    def __init__(self, grid: TimeGrid, break_idx, coeffs, value_at_zero=0.0, bound: Optional[float] = None):
        self.grid = grid
        bi = np.asarray(break_idx, dtype=int)
        if bi.ndim == 1:
            bi = bi[None, :]
        self.break_idx = bi
        co = np.asarray(coeffs, dtype=float)
        if co.ndim == 1:
            co = co[None, :]
        if co.shape[0] != bi.shape[0]:
            co = np.broadcast_to(co, (bi.shape[0], co.shape[1])).copy()
        self.coeffs = co
        vz = np.asarray(value_at_zero, dtype=float)
        if vz.ndim == 0:
            vz = np.full(bi.shape[0], float(vz))
        self.value_at_zero = vz
        if bi.shape[1] != co.shape[1] + 1:
            raise ValueError("need exactly one coefficient per breakpoint interval")
        if np.any(bi[:, 0] != 0):
            raise ValueError("breakpoints must start at node 0")
        if np.any(np.diff(bi, axis=1) < 0):
            raise ValueError("breakpoints must be nondecreasing")
        if np.any(bi > grid.size - 1):
            raise ValueError("breakpoints must be grid node indices")
        declared = float(bound) if bound is not None else float(np.max(np.abs(co), initial=0.0))
        if np.any(np.abs(co) > declared + 1e-12):
            raise ValueError("coefficients exceed the declared bound")
        self.bound = declared

    @property
    def scenario_count(self) -> int:
        return self.break_idx.shape[0]

    @classmethod
    def constant(cls, grid: TimeGrid, value: float, scenario_count: int = 1, value_at_zero: Optional[float] = None) -> "StepScalarProcess":
        bi = np.tile([0, grid.size - 1], (scenario_count, 1))
        co = np.full((scenario_count, 1), float(value))
        vz = float(value) if value_at_zero is None else float(value_at_zero)
        return cls(grid, bi, co, vz)

    @classmethod
    def indicator(cls, grid: TimeGrid, a: float, b: float, value: float = 1.0, scenario_count: int = 1) -> "StepScalarProcess":
        """value on (a, b], zero elsewhere; a and b snap up to nodes."""
        ia, ib = grid.snap_up(a), grid.snap_up(b)
        if ia == 0:
            bi = np.tile([0, ib], (scenario_count, 1))
            co = np.full((scenario_count, 1), float(value))
        else:
            bi = np.tile([0, ia, ib], (scenario_count, 1))
            co = np.tile([0.0, float(value)], (scenario_count, 1))
        return cls(grid, bi, co, 0.0)

    def cell_coefficients(self) -> np.ndarray:
        """Per-cell value matrix C with C[s, j] active on (t_j, t_{j+1}].

        Built by repetition, not accumulation, so coefficient values are
        reproduced exactly."""
        S = self.scenario_count
        M = self.grid.size
        C = np.zeros((S, M - 1))
        for s in range(S):
            b = self.break_idx[s]
            seg = np.repeat(self.coeffs[s], np.diff(b))
            C[s, : b[-1]] = seg
        return C

    def truncated(self, tau: StoppingTime) -> "StepScalarProcess":
        """h * 1_[0, tau]: intervals capped at tau, the atom at 0 kept."""
        cap = np.minimum(tau.index, self.grid.size - 1)
        if cap.size != self.scenario_count:
            cap = np.broadcast_to(cap, (self.scenario_count,))
        capped = np.minimum(self.break_idx, cap[:, None])
        return StepScalarProcess(self.grid, capped, self.coeffs, self.value_at_zero, self.bound)


def scalar_step_integral(h: StepScalarProcess, z: ScalarPath) -> ScalarPath:
    """Pathwise integral (h . z)_t = sum_i a_i (z_{u_{i+1} ^ t} - z_{u_i ^ t}).

    The result starts at 0, jumps only where z jumps (with the coefficient
    active on the cell ending there) and inherits z's decomposition term by
    term."""
    if not h.grid.same_as(z.grid):
        raise ValueError("step process and path live on different grids")
    S = z.scenario_count
    if h.scenario_count not in (1, S):
        raise ValueError("step process scenario count does not match the path")
    C = h.cell_coefficients()
    if C.shape[0] == 1 and S > 1:
        C = np.broadcast_to(C, (S, C.shape[1]))

    def apply(path: ScalarPath) -> ScalarPath:
        inc = C * (path.right[:, 1:] - path.right[:, :-1])
        right = np.concatenate([np.zeros((S, 1)), np.cumsum(inc, axis=1)], axis=1)
        left = right.copy()
        left[:, 1:] -= C * (path.right[:, 1:] - path.left[:, 1:])
        return ScalarPath(path.grid, right, left)

    out = apply(z)
    if z.parts is not None:
        parts = PathParts(apply(z.parts.mart_cont), apply(z.parts.mart_jump), apply(z.parts.fv))
        out = ScalarPath(z.grid, out.right, out.left, parts)
    return out


def ucp_seminorm(z: ScalarPath, levels: int = 8) -> float:
    """Truncated ucp distance-to-zero sum_{n=1}^{levels} 2^-n E(1 ^ sup_{t<=n}|z_t|).

    Suprema run over both stored node values and left limits inside the
    window [0, min(n, horizon)]; expectations are scenario means.  Values
    lie in [0, 1 - 2^-levels]."""
    if levels < 1:
        raise ValueError("need at least one level")
    if z.scenario_count < 1:
        raise ValueError("ucp seminorm of an empty ensemble is undefined")
    mags = np.maximum(np.abs(z.right), np.abs(z.left))
    running = np.maximum.accumulate(mags, axis=1)
    total = 0.0
    for n in range(1, levels + 1):
        end = z.grid.last_node_before(min(float(n), z.grid.horizon))
        sup = running[:, end]
        total += 2.0**-n * float(np.mean(np.minimum(1.0, sup)))
    return total


_EMERY_DOMAIN = 3


def emery_estimate(
    z: ScalarPath,
    trial_count: int = 32,
    trial_seed: int = 0,
    levels: int = 8,
    max_breaks: int = 8,
) -> float:
    """Lower bound for the Emery distance-to-zero of z.

    Maximizes ucp_seminorm(h . z) over a deterministic candidate h = 1 and
    trial_count random bounded simple predictable integrands: breakpoints
    drawn from grid nodes, coefficients +-1 built from the sign of z at the
    breakpoint (measurable there) flipped by a per-trial sign stream.  The
    estimate never exceeds the true supremum and is nondecreasing in
    trial_count for a fixed trial_seed."""
    if trial_count < 0:
        raise ValueError("trial_count must be nonnegative")
    M = z.grid.size
    S = z.scenario_count
    best = ucp_seminorm(scalar_step_integral(StepScalarProcess.constant(z.grid, 1.0, S, 0.0), z), levels)
    for trial in range(trial_count):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(trial_seed), _EMERY_DOMAIN, int(trial)))))
        k = int(rng.integers(1, max_breaks + 1))
        k = min(k, M - 1)
        interior = np.sort(rng.choice(np.arange(1, M), size=k, replace=False))
        breaks = np.concatenate([[0], interior])
        flips = rng.choice([-1.0, 1.0], size=breaks.size - 1)
        signs = np.where(z.right[:, breaks[:-1]] >= 0.0, 1.0, -1.0)
        coeffs = signs * flips[None, :]
        h = StepScalarProcess(z.grid, np.tile(breaks, (S, 1)), coeffs, 0.0, bound=1.0)
        best = max(best, ucp_seminorm(scalar_step_integral(h, z), levels))
    return best
