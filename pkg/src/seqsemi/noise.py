"""Seeded generators for the driving scalar noise coordinates.

Jump times are drawn first and fused into the event grid as nodes; only
then are continuous coordinates sampled on the fused grid.  Every draw
comes from a stream derived from (master_seed, domain, scenario,
coordinate), so a path can be regenerated bit-identically in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid_paths import (
    Ensemble,
    PathParts,
    ScalarPath,
    TimeGrid,
    build_grid,
    combine,
)

__all__ = [
    "NoiseSpec",
    "PiecewiseRate",
    "combine",
    "gen_brownian",
    "gen_compound_poisson",
    "gen_drift",
    "build_coordinate_paths",
]

_DOM_GAUSS = 10
_DOM_JUMP_TIMES = 11
_DOM_JUMP_SIZES = 12

DEFAULT_MAX_JUMPS = 4096


@dataclass(frozen=True)
class PiecewiseRate:
    """Piecewise-constant rate: values[i] on (breaks[i], breaks[i+1]],
    the last value extending to the horizon.  Breaks must be grid nodes."""

    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.breaks) != len(self.values):
            raise ValueError("need one rate value per break")
        if not self.breaks or abs(self.breaks[0]) > 1e-12:
            raise ValueError("rate breaks must start at 0")
        if np.any(np.diff(self.breaks) <= 0):
            raise ValueError("rate breaks must be strictly increasing")

    def cell_rates(self, grid: TimeGrid) -> np.ndarray:
        """Rate per grid cell; break times must sit on nodes."""
        for b in self.breaks:
            grid.index_of(b)  # raises when off-grid
        idx = np.searchsorted(np.asarray(self.breaks), grid.nodes[1:] - 1e-12, side="left") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        return np.asarray(self.values)[idx]


@dataclass(frozen=True)
class NoiseSpec:
    """Declarative description of one noise coordinate."""

    kind: str  # brownian | compound_poisson | drift
    vol: float = 1.0
    rate: float = 1.0
    jump_mean: float = 1.0
    jump_law: str = "constant"  # constant | gaussian
    jump_sd: float = 0.0
    compensated: bool = False
    rate_function: Optional[PiecewiseRate] = None
    initial_value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("brownian", "compound_poisson", "drift"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "brownian" and self.vol < 0:
            raise ValueError("volatility must be nonnegative")
        if self.kind == "compound_poisson":
            if self.rate < 0:
                raise ValueError("jump rate must be nonnegative")
            if self.jump_law not in ("constant", "gaussian"):
                raise ValueError(f"unknown jump law {self.jump_law!r}")
            if self.jump_law == "gaussian" and self.jump_sd < 0:
                raise ValueError("jump sd must be nonnegative")
        if self.kind == "drift" and self.rate_function is None:
            raise ValueError("drift noise needs a rate function")


def _zero_parts(grid: TimeGrid, scenarios: int) -> PathParts:
    z = np.zeros((scenarios, grid.size))
    return PathParts(ScalarPath(grid, z), ScalarPath(grid, z.copy()), ScalarPath(grid, z.copy()))


def gen_brownian(
    grid: TimeGrid,
    ensemble: Ensemble,
    vol: float = 1.0,
    initial_value: float = 0.0,
    coord: int = 0,
) -> ScalarPath:
    """Brownian path ensemble: independent N(0, vol^2 * dt) cell increments.

    Decomposition: z - z_0 is the continuous martingale part, FV part 0."""
    if vol < 0:
        raise ValueError("volatility must be nonnegative")
    S, M = ensemble.scenario_count, grid.size
    inc = np.empty((S, M - 1))
    scale = vol * np.sqrt(grid.widths)
    for s in range(S):
        inc[s] = ensemble.rng(_DOM_GAUSS, s, coord).normal(size=M - 1) * scale
    centered = np.concatenate([np.zeros((S, 1)), np.cumsum(inc, axis=1)], axis=1)
    zeros = np.zeros((S, M))
    parts = PathParts(
        ScalarPath(grid, centered),
        ScalarPath(grid, zeros),
        ScalarPath(grid, zeros.copy()),
    )
    return ScalarPath(grid, initial_value + centered, None, parts)


def _draw_jumps(
    horizon: float,
    ensemble: Ensemble,
    rate: float,
    jump_mean: float,
    jump_law: str,
    jump_sd: float,
    coord: int,
    max_jumps: int,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    times: list[np.ndarray] = []
    sizes: list[np.ndarray] = []
    for s in range(ensemble.scenario_count):
        rng_t = ensemble.rng(_DOM_JUMP_TIMES, s, coord)
        count = int(rng_t.poisson(rate * horizon))
        if count > max_jumps:
            raise ValueError(
                f"scenario {s} drew {count} jumps, above the cap {max_jumps}; "
                "lower the rate or raise max_jumps"
            )
        # open-interval guard: a jump exactly at 0 or the horizon would
        # collide with the boundary nodes
        t = np.sort(rng_t.uniform(0.0, horizon, size=count))
        t = np.clip(t, 1e-9 * horizon, (1.0 - 1e-9) * horizon)
        rng_s = ensemble.rng(_DOM_JUMP_SIZES, s, coord)
        if jump_law == "constant":
            j = np.full(count, float(jump_mean))
        else:
            j = rng_s.normal(jump_mean, jump_sd, size=count)
        times.append(t)
        sizes.append(j)
    return times, sizes


def _jump_path_on_grid(
    grid: TimeGrid,
    times: list[np.ndarray],
    sizes: list[np.ndarray],
    rate: float,
    jump_mean: float,
    compensated: bool,
    initial_value: float,
) -> ScalarPath:
    S, M = len(times), grid.size
    node_jump = np.zeros((S, M))
    for s in range(S):
        for t, j in zip(times[s], sizes[s]):
            node_jump[s, grid.index_of(t, tol=1e-9)] += j
    accum = np.cumsum(node_jump, axis=1)
    right = initial_value + accum
    left = right - node_jump
    left[:, 0] = right[:, 0]
    zeros = np.zeros((S, M))
    if compensated:
        # martingale part J_t - rate*mean*t, FV part the compensator
        comp = rate * jump_mean * grid.nodes
        parts = PathParts(
            ScalarPath(grid, zeros),
            ScalarPath(grid, accum - comp, accum - node_jump - comp),
            ScalarPath(grid, np.tile(comp, (S, 1))),
        )
    else:
        parts = PathParts(
            ScalarPath(grid, zeros),
            ScalarPath(grid, zeros.copy()),
            ScalarPath(grid, accum, accum - node_jump),
        )
    return ScalarPath(grid, right, left, parts)


def gen_compound_poisson(
    horizon: float,
    base_steps: int,
    ensemble: Ensemble,
    rate: float,
    jump_mean: float = 1.0,
    jump_law: str = "constant",
    jump_sd: float = 0.0,
    compensated: bool = False,
    initial_value: float = 0.0,
    extra_times: Sequence[float] = (),
    coord: int = 0,
    max_jumps: int = DEFAULT_MAX_JUMPS,
) -> tuple[ScalarPath, list[np.ndarray]]:
    """Compound Poisson path plus its jump times, on a grid that
    contains every jump time as a node.

    The stored trajectory accumulates the raw jumps; the compensated flag
    selects the decomposition split (J_t - rate*mean*t, rate*mean*t)
    against (0, J_t)."""
    times, sizes = _draw_jumps(horizon, ensemble, rate, jump_mean, jump_law, jump_sd, coord, max_jumps)
    all_times = sorted(float(t) for ts in times for t in ts)
    grid = build_grid(horizon, base_steps, list(extra_times) + all_times)
    path = _jump_path_on_grid(grid, times, sizes, rate, jump_mean, compensated, initial_value)
    return path, times


def gen_drift(
    grid: TimeGrid,
    rate_function: PiecewiseRate,
    initial_value: float = 0.0,
    scenario_count: int = 1,
) -> ScalarPath:
    """Deterministic drift z_t = z_0 + int_0^t rate(s) ds, integrated exactly.

    Decomposition: martingale parts 0, FV part z - z_0."""
    rates = rate_function.cell_rates(grid)
    inc = rates * grid.widths
    centered = np.concatenate([[0.0], np.cumsum(inc)])
    row = np.tile(centered, (scenario_count, 1))
    zeros = np.zeros_like(row)
    parts = PathParts(ScalarPath(grid, zeros), ScalarPath(grid, zeros.copy()), ScalarPath(grid, row))
    return ScalarPath(grid, initial_value + row, None, parts)


def build_coordinate_paths(
    horizon: float,
    base_steps: int,
    specs: Sequence[NoiseSpec],
    ensemble: Ensemble,
    extra_times: Sequence[float] = (),
    max_jumps: int = DEFAULT_MAX_JUMPS,
) -> tuple[TimeGrid, list[ScalarPath], dict[int, list[np.ndarray]]]:
    """Realize one path per spec on a single fused grid.

    Returns (grid, paths, jump_times_by_coordinate).  All compound-Poisson
    jump times across coordinates and scenarios become grid nodes before
    any continuous coordinate is sampled."""
    drawn: dict[int, tuple[list[np.ndarray], list[np.ndarray]]] = {}
    fused_extras: list[float] = list(extra_times)
    for k, spec in enumerate(specs):
        if spec.kind == "compound_poisson":
            times, sizes = _draw_jumps(
                horizon, ensemble, spec.rate, spec.jump_mean, spec.jump_law, spec.jump_sd, k, max_jumps
            )
            drawn[k] = (times, sizes)
            fused_extras.extend(float(t) for ts in times for t in ts)
    grid = build_grid(horizon, base_steps, fused_extras)

    paths: list[ScalarPath] = []
    jump_times: dict[int, list[np.ndarray]] = {}
    for k, spec in enumerate(specs):
        if spec.kind == "brownian":
            paths.append(gen_brownian(grid, ensemble, spec.vol, spec.initial_value, coord=k))
        elif spec.kind == "drift":
            assert spec.rate_function is not None
            paths.append(gen_drift(grid, spec.rate_function, spec.initial_value, ensemble.scenario_count))
        else:
            times, sizes = drawn[k]
            paths.append(
                _jump_path_on_grid(
                    grid, times, sizes, spec.rate, spec.jump_mean, spec.compensated, spec.initial_value
                )
            )
            jump_times[k] = times
    return grid, paths, jump_times
