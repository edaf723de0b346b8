"""Check registry: each named check wraps exactly one verification
operation from the integration, bracket, or evolution layer.

run_checks is pure (config in, report out, no I/O).  Every random object is
derived from the config's master seed through fixed domains, so identical
configs produce identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from . import __version__
from .config import CHECK_NAMES, ExperimentConfig
from .covariation_fubini import (
    FiniteMeasureSpace,
    bracket_partition,
    bracket_properties_check,
    bracket_residual,
    fubini_check,
)
from .cylsemi import FiniteSeq, SeqSemimartingale, primal_from_dual, sequence_from_specs
from .evolution import DiagonalSemigroup, fubini_see_check, mild_solution, weak_residual
from .grid_paths import Ensemble, StepScalarProcess, StoppingTime, build_grid
from .integrands import (
    GridIntegrand,
    SimplePredictableIntegrand,
    as_grid,
    hitting_time,
    left_limit_integrand,
    partition_sequence,
)
from .integrate import (
    associativity_residual,
    continuous_part_gap,
    f0_scaling_gap,
    good_integrator_diagnostic,
    integrate_grid,
    integrate_simple,
    jump_formula_gap,
    linearity_gap,
    oracle_gap,
    path_gap,
    riemann_convergence,
    stopping_gaps,
)
from .noise import gen_brownian

__all__ = ["CHECK_DESCRIPTIONS", "CheckContext", "list_checks", "run_checks"]

# Seed-derivation tags for runner-owned randomness (noise generators use
# their own domains internally).
_TAG_COMPANION = 9001
_TAG_SCALING = 9002
_TAG_SIMPLE = 9003


def _derived_seed(master_seed: int, tag: int) -> int:
    return int(np.random.SeedSequence((master_seed, tag)).generate_state(1)[0])


@dataclass
class CheckContext:
    """Everything a check runner needs, built once per run."""

    config: ExperimentConfig
    ensemble: Ensemble
    X: SeqSemimartingale
    jump_times: list
    H: GridIntegrand
    partitions: list


def _build_integrand(config: ExperimentConfig, X: SeqSemimartingale) -> GridIntegrand:
    spec = config.integrand
    phi = FiniteSeq({spec.coordinate: 1.0})
    if spec.family == "constant":
        H = GridIntegrand.constant(X.grid, phi, X.dim, X.scenario_count)
    elif spec.family == "linear_t":
        H = GridIntegrand.linear_t(X.grid, phi, X.dim, X.scenario_count)
    else:
        H = left_limit_integrand(primal_from_dual(X))
    return H.scaled(spec.scale)


def build_context(config: ExperimentConfig) -> CheckContext:
    ens = Ensemble(config.ensemble.scenarios, config.ensemble.master_seed)
    specs = [n.build() for n in config.noise]
    X, jumps = sequence_from_specs(
        config.grid.horizon, config.grid.base_steps, specs, ens, extra_times=config.grid.extra_times
    )
    jump_times = sorted(
        float(t) for per_coord in jumps.values() for arr in per_coord for t in np.atleast_1d(arr)
    )
    scen = X.scenario_count if config.partitions.kind == "jittered" else 1
    partitions = partition_sequence(
        X.grid, config.partitions.kind, config.partitions.levels, ensemble=ens, scenario_count=scen
    )
    return CheckContext(config, ens, X, jump_times, _build_integrand(config, X), partitions)


def _companion_integrator(ctx: CheckContext, vol: float = 0.4) -> SeqSemimartingale:
    seed = _derived_seed(ctx.config.ensemble.master_seed, _TAG_COMPANION)
    ens = Ensemble(ctx.X.scenario_count, seed)
    return SeqSemimartingale([gen_brownian(ctx.X.grid, ens, vol=vol, coord=k) for k in range(ctx.X.dim)])


def _random_simple_integrand(ctx: CheckContext) -> SimplePredictableIntegrand:
    X = ctx.X
    seed = _derived_seed(ctx.config.ensemble.master_seed, _TAG_SIMPLE)
    ens = Ensemble(X.scenario_count, seed)
    pieces = min(6, X.grid.size - 1)
    stops = np.zeros((X.scenario_count, pieces + 1), dtype=int)
    coeffs = np.zeros((X.scenario_count, pieces, X.dim))
    atom = np.zeros((X.scenario_count, X.dim))
    for s in range(X.scenario_count):
        rng = ens.rng(0, s)
        interior = np.sort(rng.integers(0, X.grid.size, size=pieces - 1))
        stops[s] = np.concatenate([[0], interior, [X.grid.size - 1]])
        coeffs[s] = np.clip(rng.standard_normal((pieces, X.dim)), -2.0, 2.0)
        atom[s] = np.clip(rng.standard_normal(X.dim), -2.0, 2.0)
    return SimplePredictableIntegrand(X.grid, stops, coeffs, atom, bound=2.0)


def _stop_family(ctx: CheckContext) -> dict:
    X = ctx.X
    half = X.grid.nodes[X.grid.size // 2]
    return {
        "hitting_half": hitting_time(X, 0.5),
        "deterministic_mid": StoppingTime.deterministic(X.grid, float(half), X.scenario_count),
        "never": StoppingTime.never(X.grid, X.scenario_count),
    }


def _check_linearity(ctx: CheckContext) -> dict:
    gap = linearity_gap(ctx.H, ctx.X, _companion_integrator(ctx))
    tol = ctx.config.thresholds.node_tol
    return {"gap": gap, "tolerance": tol, "pass": gap <= tol}


def _check_stopping(ctx: CheckContext) -> dict:
    tol = ctx.config.thresholds.node_tol
    gaps = {}
    for label, tau in _stop_family(ctx).items():
        gaps[label] = max(stopping_gaps(ctx.H, ctx.X, tau))
    worst = max(gaps.values())
    return {"gaps": gaps, "worst": worst, "tolerance": tol, "pass": worst <= tol}


def _check_continuous_part(ctx: CheckContext) -> dict:
    gap = continuous_part_gap(ctx.H, ctx.X)
    tol = ctx.config.thresholds.node_tol
    return {"gap": gap, "tolerance": tol, "pass": gap <= tol}


def _check_jump_formula(ctx: CheckContext) -> dict:
    gap = jump_formula_gap(ctx.H, ctx.X)
    tol = ctx.config.thresholds.node_tol
    return {"gap": gap, "tolerance": tol, "pass": gap <= tol}


def _check_f0_scaling(ctx: CheckContext) -> dict:
    seed = _derived_seed(ctx.config.ensemble.master_seed, _TAG_SCALING)
    xi = Ensemble(ctx.X.scenario_count, seed).rng(0, 0).uniform(0.5, 2.0, size=ctx.X.scenario_count)
    gap = f0_scaling_gap(ctx.H, ctx.X, xi)
    tol = ctx.config.thresholds.node_tol
    return {"gap": gap, "tolerance": tol, "pass": gap <= tol}


def _check_oracle_equivalence(ctx: CheckContext) -> dict:
    Hs = _random_simple_integrand(ctx)
    closed = integrate_simple(Hs, ctx.X)
    table = integrate_grid(as_grid(Hs), ctx.X)
    gap = max(
        path_gap(closed.path, table.path),
        float(np.max(np.abs(closed.value_at_zero_term - table.value_at_zero_term), initial=0.0)),
    )
    gap = max(gap, oracle_gap(ctx.H, ctx.X))
    tol = ctx.config.thresholds.node_tol
    return {"gap": gap, "tolerance": tol, "pass": gap <= tol}


def _check_riemann(ctx: CheckContext) -> dict:
    th = ctx.config.thresholds
    report = riemann_convergence(
        ctx.H, ctx.X, ctx.partitions, ensemble=ctx.ensemble, ucp_threshold=th.ucp_threshold, slack=th.slack
    )
    report["table"] = [
        {"level": lv, "mesh": m, "ucp_gap": g}
        for lv, m, g in zip(report["levels"], report["meshes"], report["ucp_gaps"])
    ]
    return report


def _check_associativity(ctx: CheckContext) -> dict:
    T = ctx.X.grid.horizon
    g = StepScalarProcess.indicator(ctx.X.grid, T / 4, 3 * T / 4, value=1.5, scenario_count=ctx.X.scenario_count)
    gap = associativity_residual(g, ctx.H, ctx.X)
    tol = ctx.config.thresholds.node_tol
    return {"gap": gap, "tolerance": tol, "pass": gap <= tol}


def _check_good_integrator(ctx: CheckContext) -> dict:
    decay = tuple(2.0**-k for k in range(6))
    report = good_integrator_diagnostic(ctx.X, ctx.H, decay, ensemble=ctx.ensemble)
    report["table"] = [
        {"eps": e, "ucp_value": u, "clipped": c}
        for e, u, c in zip(report["decay"], report["ucp_values"], report["clipped"])
    ]
    return report


def _expected_brownian_bracket(ctx: CheckContext) -> Optional[float]:
    if all(n.kind == "brownian" for n in ctx.config.noise):
        return float(sum(n.vol**2 for n in ctx.config.noise) * ctx.X.grid.horizon)
    return None


def _check_ito_bracket(ctx: CheckContext) -> dict:
    th = ctx.config.thresholds
    Y = primal_from_dual(ctx.X)
    result = bracket_partition(
        ctx.X, Y, ctx.partitions, ensemble=ctx.ensemble, ucp_threshold=th.ucp_threshold, slack=th.slack
    )
    final = result.residual_path.right[:, -1]
    mean = float(np.mean(final))
    se = float(np.std(final) / np.sqrt(final.size)) if final.size > 1 else 0.0
    expected = _expected_brownian_bracket(ctx)
    within = None
    if expected is not None and final.size > 1:
        within = bool(abs(mean - expected) <= 3.0 * se)
    ok = result.pass_flag and within is not False
    return {
        "ucp_gaps": list(result.ucp_gaps),
        "residual_mean_at_horizon": mean,
        "residual_se": se,
        "expected_bracket": expected,
        "within_three_se": within,
        "convention": result.convention,
        "table": [{"level": i + 1, "ucp_gap": g} for i, g in enumerate(result.ucp_gaps)],
        "pass": bool(ok),
    }


def _drift_only_pair(ctx: CheckContext, base_steps: int):
    drift = [n.build() for n in ctx.config.noise if n.kind == "drift"]
    if not drift:
        from .noise import NoiseSpec, PiecewiseRate

        drift = [NoiseSpec(kind="drift", rate_function=PiecewiseRate((0.0,), (1.0,)))]
    X, _ = sequence_from_specs(ctx.X.grid.horizon, base_steps, drift, Ensemble(1, 0))
    return X, primal_from_dual(X), drift


def _check_bracket_vanishing(ctx: CheckContext) -> dict:
    steps = ctx.config.grid.base_steps
    sups = []
    for n in (steps, 2 * steps):
        X, Y, drift = _drift_only_pair(ctx, n)
        sups.append(float(np.max(np.abs(bracket_residual(X, Y).right))))
    T = ctx.X.grid.horizon
    bound_rate = sum(max(abs(v) for v in d.rate_function.values) ** 2 for d in drift)
    bound = (T / steps) * T * bound_rate
    ratio = sups[1] / sups[0] if sups[0] > 0 else 0.5
    ok = sups[0] <= bound * (1 + 1e-9) and 0.3 <= ratio <= 0.7
    return {
        "sup_coarse": sups[0],
        "sup_fine": sups[1],
        "bound": bound,
        "halving_ratio": ratio,
        "pass": bool(ok),
    }


def _check_bracket_properties(ctx: CheckContext) -> dict:
    tol = ctx.config.thresholds.node_tol
    Y = primal_from_dual(ctx.X)
    worst = {}
    for tau in _stop_family(ctx).values():
        rep = bracket_properties_check(ctx.X, Y, tau)
        for key, val in rep.items():
            worst[key] = max(worst.get(key, 0.0), val)
    ok = max(worst.values()) <= tol
    return {**worst, "tolerance": tol, "pass": bool(ok)}


def _check_fubini(ctx: CheckContext) -> dict:
    X = ctx.X
    family = [
        ctx.H,
        GridIntegrand.constant(X.grid, FiniteSeq.basis(0), X.dim, X.scenario_count),
        GridIntegrand.linear_t(X.grid, FiniteSeq.basis(min(1, X.dim - 1)), X.dim, X.scenario_count),
    ]
    rho = FiniteMeasureSpace(("config_integrand", "constant_e0", "linear_t"), (1.0, 2.0, 0.5))
    return fubini_check(family, rho, X, ensemble=ctx.ensemble, tolerance=1e-8)


def _halved_noise_pair(ctx: CheckContext):
    """The config noise drawn once on the doubled grid, plus its restriction
    to the config grid; both carry the same trajectory so refinement ratios
    are meaningful."""
    cfg = ctx.config
    specs = [n.build() for n in cfg.noise]
    fine, jumps = sequence_from_specs(
        cfg.grid.horizon, 2 * cfg.grid.base_steps, specs, ctx.ensemble, extra_times=cfg.grid.extra_times
    )
    jump_times = [float(t) for per in jumps.values() for arr in per for t in np.atleast_1d(arr)]
    coarse_grid = build_grid(cfg.grid.horizon, cfg.grid.base_steps, list(cfg.grid.extra_times) + jump_times)
    idx = np.array([fine.grid.index_of(t) for t in coarse_grid.nodes])
    coarse = SeqSemimartingale([p.restrict_to(coarse_grid, idx) for p in fine.coords])
    return coarse, fine


def _see_inputs(ctx: CheckContext):
    d = ctx.X.dim
    semigroup = DiagonalSemigroup(tuple(-float(k * k) for k in range(d)))
    eta = np.array([1.0 / (1 + k) for k in range(d)])
    phi = FiniteSeq.basis(min(1, d - 1))
    return semigroup, eta, phi


def _check_see_weak_residual(ctx: CheckContext) -> dict:
    tol = ctx.config.thresholds.node_tol
    semigroup, eta, phi = _see_inputs(ctx)
    coarse, fine = _halved_noise_pair(ctx)
    sups = []
    for X in (coarse, fine):
        Z = mild_solution(eta, X, semigroup)
        sups.append(float(np.max(np.abs(weak_residual(Z, phi).right))))
    exact = sups[0] <= tol and sups[1] <= tol
    ratio = sups[1] / sups[0] if sups[0] > 0 else 0.0
    ok = exact or 0.3 <= ratio <= 0.7
    return {
        "sup_coarse": sups[0],
        "sup_fine": sups[1],
        "halving_ratio": ratio,
        "mesh_coarse": float(np.max(np.diff(coarse.grid.nodes))),
        "mesh_fine": float(np.max(np.diff(fine.grid.nodes))),
        "pass": bool(ok),
    }


def _check_see_fubini(ctx: CheckContext) -> dict:
    tol = ctx.config.thresholds.node_tol
    semigroup, _, phi = _see_inputs(ctx)
    coarse, fine = _halved_noise_pair(ctx)
    devs = []
    for X in (coarse, fine):
        rep = fubini_see_check(X, semigroup, phi, ctx.X.grid.horizon)
        devs.append(rep["max_deviation"])
    exact = devs[0] <= tol and devs[1] <= tol
    ratio = devs[1] / devs[0] if devs[0] > 0 else 0.0
    ok = exact or 0.3 <= ratio <= 0.7
    return {
        "deviation_coarse": devs[0],
        "deviation_fine": devs[1],
        "halving_ratio": ratio,
        "pass": bool(ok),
    }


CHECK_DESCRIPTIONS = {
    "linearity": "integral is linear in the integrand against a companion integrator",
    "stopping": "stopped integral, truncated integrand, and stopped integrator agree",
    "continuous_part": "continuous martingale part of the integral matches the part-wise route",
    "jump_formula": "integral jumps equal the paired integrand and integrator jumps",
    "f0_scaling": "initial-sigma-field scalars pull out of the integral",
    "oracle_equivalence": "cell-table route reproduces the closed-form simple integral",
    "riemann_convergence": "sampled-integrand integrals converge in ucp along partitions",
    "associativity": "integrating against the integral matches the merged integrand",
    "good_integrator": "shrinking bounded integrands shrink the integral proportionally",
    "ito_bracket": "partition cross-sums converge to the integration-by-parts bracket",
    "bracket_vanishing": "continuous finite-variation pairs have vanishing bracket",
    "bracket_properties": "bracket jump identity and stopped-bracket equalities",
    "fubini": "finite-measure mixing commutes with stochastic integration",
    "see_weak_residual": "mild evolution solutions satisfy the weak identity to first order",
    "see_fubini": "evolution interchange identity holds to first order",
}

_RUNNERS: dict = {
    "linearity": _check_linearity,
    "stopping": _check_stopping,
    "continuous_part": _check_continuous_part,
    "jump_formula": _check_jump_formula,
    "f0_scaling": _check_f0_scaling,
    "oracle_equivalence": _check_oracle_equivalence,
    "riemann_convergence": _check_riemann,
    "associativity": _check_associativity,
    "good_integrator": _check_good_integrator,
    "ito_bracket": _check_ito_bracket,
    "bracket_vanishing": _check_bracket_vanishing,
    "bracket_properties": _check_bracket_properties,
    "fubini": _check_fubini,
    "see_weak_residual": _check_see_weak_residual,
    "see_fubini": _check_see_fubini,
}

assert tuple(_RUNNERS) == CHECK_NAMES
assert tuple(CHECK_DESCRIPTIONS) == CHECK_NAMES


def list_checks() -> List[dict]:
    """Stable ordered registry listing."""
    return [{"name": name, "description": CHECK_DESCRIPTIONS[name]} for name in CHECK_NAMES]


def run_checks(config: ExperimentConfig) -> dict:
    """Run every requested check; pure function of the config."""
    ctx = build_context(config)
    reports = []
    for name in CHECK_NAMES:
        if name not in config.checks:
            continue
        report = _RUNNERS[name](ctx)
        report = {"check": name, "description": CHECK_DESCRIPTIONS[name], **report}
        reports.append(report)
    return {
        "version": __version__,
        "config": config.model_dump(),
        "reports": reports,
        "all_pass": bool(all(r["pass"] for r in reports)),
    }
