import numpy as np
import pytest

from seqsemi.grid_paths import (
    Ensemble,
    PathParts,
    ScalarPath,
    StepScalarProcess,
    StoppingTime,
    TimeGrid,
    build_grid,
    combine,
    constant_path,
    emery_estimate,
    scalar_step_integral,
    stop_path,
    ucp_seminorm,
)

SEED = 20260815


def _assert_close(actual, expected, tol=1e-12):
    assert np.max(np.abs(np.asarray(actual) - np.asarray(expected))) <= tol


def _random_walk(grid, scenarios, seed, scale=1.0):
    rng = np.random.Generator(np.random.PCG64(seed))
    inc = rng.normal(size=(scenarios, grid.size - 1)) * scale * np.sqrt(grid.widths)
    right = np.concatenate([np.zeros((scenarios, 1)), np.cumsum(inc, axis=1)], axis=1)
    return ScalarPath(grid, right)


def _jump_path(grid, scenarios, seed, initial=0.0):
    """Piecewise-constant path jumping at a few random interior nodes."""
    rng = np.random.Generator(np.random.PCG64(seed))
    right = np.full((scenarios, grid.size), float(initial))
    left = right.copy()
    for s in range(scenarios):
        nodes = rng.choice(np.arange(1, grid.size), size=min(3, grid.size - 1), replace=False)
        level = float(initial)
        jumps = {int(n): float(rng.normal()) for n in nodes}
        for j in range(1, grid.size):
            left[s, j] = level
            level += jumps.get(j, 0.0)
            right[s, j] = level
    return ScalarPath(grid, right, left)


class TestBuildGrid:
    def test_uniform(self):
        g = build_grid(1.0, 4)
        _assert_close(g.nodes, [0.0, 0.25, 0.5, 0.75, 1.0], tol=0.0)

    def test_extra_time_inserted(self):
        g = build_grid(1.0, 2, [0.3])
        _assert_close(g.nodes, [0.0, 0.3, 0.5, 1.0], tol=0.0)

    def test_extra_time_merges_with_existing_node(self):
        g = build_grid(1.0, 2, [0.5])
        _assert_close(g.nodes, [0.0, 0.5, 1.0], tol=0.0)

    def test_near_duplicate_merges(self):
        g = build_grid(1.0, 2, [0.5 + 1e-13])
        assert g.size == 3

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            build_grid(0.0, 4)
        with pytest.raises(ValueError):
            build_grid(1.0, 0)
        with pytest.raises(ValueError):
            build_grid(1.0, 4, [1.5])

    def test_snap_up_rounds_to_next_node(self):
        g = build_grid(1.0, 4)
        assert g.snap_up(0.3) == 2
        assert g.snap_up(0.5) == 2
        with pytest.raises(ValueError):
            g.snap_up(1.2)


class TestScalarStepIntegral:
    def test_unit_integrand_telescopes(self):
        grid = build_grid(1.0, 64)
        z = _random_walk(grid, 5, SEED)
        h = StepScalarProcess.constant(grid, 1.0, 5, value_at_zero=0.0)
        out = scalar_step_integral(h, z)
        _assert_close(out.right, z.right - z.right[:, :1])
        _assert_close(out.right[:, 0], 0.0, tol=0.0)

    def test_zero_integrand(self):
        grid = build_grid(1.0, 16)
        z = _random_walk(grid, 3, SEED + 1)
        h = StepScalarProcess.constant(grid, 0.0, 3)
        out = scalar_step_integral(h, z)
        assert np.all(out.right == 0.0) and np.all(out.left == 0.0)

    def test_indicator_against_drift(self):
        # z_t = t and h = 1_{(a, b]} make (h.z)_t = min(t, b) - min(t, a).
        grid = build_grid(1.0, 8)
        t = grid.nodes
        z = ScalarPath(grid, np.tile(t, (1, 1)))
        a, b = 0.25, 0.75
        h = StepScalarProcess.indicator(grid, a, b)
        out = scalar_step_integral(h, z)
        expected = np.minimum(t, b) - np.minimum(t, a)
        _assert_close(out.right[0], expected)

    def test_bilinear_in_integrand_and_path(self):
        grid = build_grid(1.0, 32)
        z1 = _random_walk(grid, 4, SEED + 2)
        z2 = _jump_path(grid, 4, SEED + 3)
        ha = StepScalarProcess.indicator(grid, 0.0, 0.5, 0.7, 4)
        hb = StepScalarProcess.indicator(grid, 0.25, 1.0, -1.3, 4)
        hsum = StepScalarProcess(
            grid,
            np.tile([0, grid.snap_up(0.25), grid.snap_up(0.5), grid.size - 1], (4, 1)),
            np.tile([0.7, 0.7 - 1.3, -1.3], (4, 1)),
        )
        lhs = scalar_step_integral(hsum, z1)
        rhs = combine([(1.0, scalar_step_integral(ha, z1)), (1.0, scalar_step_integral(hb, z1))])
        _assert_close(lhs.right, rhs.right)
        zmix = combine([(2.0, z1), (-0.5, z2)])
        lhs2 = scalar_step_integral(ha, zmix)
        rhs2 = combine(
            [(2.0, scalar_step_integral(ha, z1)), (-0.5, scalar_step_integral(ha, z2))]
        )
        _assert_close(lhs2.right, rhs2.right)
        _assert_close(lhs2.left, rhs2.left)

    def test_stopping_commutes_three_ways(self):
        grid = build_grid(1.0, 32)
        z = _jump_path(grid, 6, SEED + 4, initial=0.3)
        h = StepScalarProcess.indicator(grid, 0.125, 0.875, -0.8, 6)
        tau = StoppingTime.deterministic(grid, 0.5, 6)
        a = stop_path(scalar_step_integral(h, z), tau)
        b = scalar_step_integral(h.truncated(tau), z)
        c = scalar_step_integral(h, stop_path(z, tau))
        _assert_close(a.right, b.right, tol=0.0)
        _assert_close(a.right, c.right, tol=0.0)
        _assert_close(a.left, b.left, tol=0.0)
        _assert_close(a.left, c.left, tol=0.0)

    def test_jumps_only_where_path_jumps(self):
        grid = build_grid(1.0, 16)
        z = _jump_path(grid, 4, SEED + 5)
        h = StepScalarProcess.constant(grid, 0.9, 4)
        out = scalar_step_integral(h, z)
        assert np.all((out.right != out.left) <= (z.right != z.left))

    def test_decomposition_inherited(self):
        grid = build_grid(1.0, 16)
        base = _random_walk(grid, 2, SEED + 6)
        fv = ScalarPath(grid, np.tile(grid.nodes * 0.5, (2, 1)))
        zero = ScalarPath(grid, np.zeros((2, grid.size)))
        whole = ScalarPath(
            grid,
            1.0 + base.right + fv.right,
            parts=PathParts(base, zero, fv),
        )
        h = StepScalarProcess.indicator(grid, 0.25, 0.75, 2.0, 2)
        out = scalar_step_integral(h, whole)
        assert out.parts is not None
        _assert_close(
            out.right,
            out.parts.mart_cont.right + out.parts.mart_jump.right + out.parts.fv.right,
        )
        _assert_close(out.parts.fv.right, scalar_step_integral(h, fv).right, tol=0.0)


class TestUcpSeminorm:
    def test_constant_path_closed_form(self):
        grid = build_grid(1.0, 4)
        for c in (0.4, -2.5):
            z = constant_path(grid, c)
            expected = min(1.0, abs(c)) * (1.0 - 2.0**-8)
            _assert_close(ucp_seminorm(z), expected, tol=1e-14)

    def test_zero_path(self):
        grid = build_grid(2.0, 8)
        assert ucp_seminorm(constant_path(grid, 0.0)) == 0.0

    def test_bounded_above(self):
        grid = build_grid(1.0, 8)
        z = _random_walk(grid, 20, SEED + 7, scale=50.0)
        assert ucp_seminorm(z) <= 1.0 - 2.0**-8 + 1e-15

    def test_triangle_inequality(self):
        grid = build_grid(1.5, 24)
        for trial in range(10):
            x = _random_walk(grid, 8, SEED + 100 + trial)
            y = _jump_path(grid, 8, SEED + 200 + trial)
            s = combine([(1.0, x), (1.0, y)])
            assert ucp_seminorm(s) <= ucp_seminorm(x) + ucp_seminorm(y) + 1e-12

    def test_empty_ensemble_rejected(self):
        grid = build_grid(1.0, 4)
        with pytest.raises(ValueError):
            ScalarPath(grid, np.zeros((0, grid.size)))

    def test_left_limits_count_toward_supremum(self):
        # spike visible only in the left limit at the last node
        grid = build_grid(1.0, 2)
        right = np.array([[0.0, 0.0, 0.0]])
        left = np.array([[0.0, 0.0, 5.0]])
        z = ScalarPath(grid, right, left)
        _assert_close(ucp_seminorm(z), 1.0 - 2.0**-8, tol=1e-14)


class TestEmeryEstimate:
    def test_dominates_ucp_for_centered_paths(self):
        grid = build_grid(1.0, 32)
        z = _random_walk(grid, 10, SEED + 8)
        assert emery_estimate(z, trial_count=4, trial_seed=1) >= ucp_seminorm(z) - 1e-12

    def test_monotone_in_trial_count(self):
        grid = build_grid(1.0, 32)
        z = _jump_path(grid, 6, SEED + 9)
        e1 = emery_estimate(z, trial_count=4, trial_seed=7)
        e2 = emery_estimate(z, trial_count=12, trial_seed=7)
        e3 = emery_estimate(z, trial_count=24, trial_seed=7)
        assert e1 <= e2 <= e3

    def test_deterministic_given_seed(self):
        grid = build_grid(1.0, 16)
        z = _random_walk(grid, 4, SEED + 10)
        a = emery_estimate(z, trial_count=8, trial_seed=3)
        b = emery_estimate(z, trial_count=8, trial_seed=3)
        assert a == b


class TestStopPath:
    def test_never_leaves_path_unchanged(self):
        grid = build_grid(1.0, 16)
        z = _jump_path(grid, 3, SEED + 11)
        tau = StoppingTime.never(grid, 3)
        out = stop_path(z, tau)
        assert np.all(out.right == z.right) and np.all(out.left == z.left)

    def test_stop_at_zero_freezes_initial(self):
        grid = build_grid(1.0, 16)
        z = _random_walk(grid, 3, SEED + 12)
        tau = StoppingTime.deterministic(grid, 0.0, 3)
        out = stop_path(z, tau)
        _assert_close(out.right, np.tile(z.right[:, :1], (1, grid.size)), tol=0.0)

    def test_drift_stopped_midway(self):
        grid = build_grid(1.0, 8)
        z = ScalarPath(grid, np.tile(grid.nodes, (1, 1)))
        tau = StoppingTime.deterministic(grid, 0.5, 1)
        out = stop_path(z, tau)
        _assert_close(out.right[0], np.minimum(grid.nodes, 0.5), tol=0.0)

    def test_idempotent_and_parts_stopped(self):
        grid = build_grid(1.0, 16)
        base = _random_walk(grid, 2, SEED + 13)
        zero = ScalarPath(grid, np.zeros((2, grid.size)))
        fv = ScalarPath(grid, np.tile(grid.nodes * 0.25, (2, 1)))
        whole = ScalarPath(grid, 0.5 + base.right + fv.right, parts=PathParts(base, zero, fv))
        tau = StoppingTime.deterministic(grid, 0.25, 2)
        once = stop_path(whole, tau)
        twice = stop_path(once, tau)
        assert np.all(once.right == twice.right)
        assert once.parts is not None
        _assert_close(once.parts.fv.right, stop_path(fv, tau).right, tol=0.0)


class TestEnsemble:
    def test_seed_streams_are_reproducible(self):
        ens = Ensemble(4, 99)
        a = ens.rng(0, 2).normal(size=5)
        b = ens.rng(0, 2).normal(size=5)
        assert np.all(a == b)

    def test_scenarios_get_distinct_streams(self):
        ens = Ensemble(2, 99)
        a = ens.rng(0, 0).normal(size=5)
        b = ens.rng(0, 1).normal(size=5)
        assert not np.allclose(a, b)

    def test_validation(self):
        with pytest.raises(ValueError):
            Ensemble(0, 1)
        with pytest.raises(ValueError):
            Ensemble(1, -5)
