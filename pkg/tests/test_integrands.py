import numpy as np
import pytest

from seqsemi.cylsemi import CoordinatePaths, FiniteSeq, SeqPathPrimal
from seqsemi.grid_paths import (
    Ensemble,
    ScalarPath,
    StepScalarProcess,
    StoppingTime,
    build_grid,
    constant_path,
)
from seqsemi.integrands import (
    ElementaryIntegrand,
    GridIntegrand,
    RandomPartition,
    SimplePredictableIntegrand,
    as_grid,
    elementary_to_grid,
    full_grid_partition,
    hitting_time,
    left_limit_integrand,
    localize,
    partition_sequence,
    sample_at,
    sup_seminorm,
)
from seqsemi.noise import gen_brownian

MASTER_SEED = 616263

E0 = FiniteSeq.basis(0)
E1 = FiniteSeq.basis(1)


def _jump_primal():
    """One active coordinate, flat at 1 then jumping to 3 at t = 0.5."""
    grid = build_grid(1.0, 4)
    right = np.array([[1.0, 1.0, 3.0, 3.0, 3.0]])
    left = np.array([[1.0, 1.0, 1.0, 3.0, 3.0]])
    zero = np.zeros((1, 5))
    coords = [ScalarPath(grid, right, left), ScalarPath(grid, zero, zero.copy())]
    return SeqPathPrimal(coords, active=(0,))


class TestGridIntegrand:
    def test_constant(self):
        grid = build_grid(1.0, 4)
        H = GridIntegrand.constant(grid, E0.scaled(2.0), dim=3, scenario_count=2)
        assert H.cells.shape == (2, 4, 3)
        np.testing.assert_array_equal(H.cells[:, :, 0], 2.0)
        np.testing.assert_array_equal(H.cells[:, :, 1:], 0.0)
        np.testing.assert_array_equal(H.atom[:, 0], 2.0)
        np.testing.assert_array_equal(H.tail[:, 0], 2.0)
        assert H.support == (0,)

    def test_linear_t_cells_and_nodes(self):
        grid = build_grid(1.0, 4)
        H = GridIntegrand.linear_t(grid, E0, dim=2)
        np.testing.assert_array_equal(H.cells[0, :, 0], [0.0, 0.25, 0.5, 0.75])
        np.testing.assert_array_equal(H.atom, 0.0)
        np.testing.assert_array_equal(H.tail[0], [1.0, 0.0])
        # value at a node is the coefficient of the cell ending there
        np.testing.assert_array_equal(H.value_at_node(2)[0], [0.25, 0.0])
        np.testing.assert_array_equal(H.value_at_node(0), H.atom)

    def test_from_function(self):
        grid = build_grid(1.0, 4)
        H = GridIntegrand.from_function(grid, lambda t: E1.scaled(1.0 + t), dim=2)
        np.testing.assert_allclose(H.cells[0, :, 1], 1.0 + grid.nodes[:-1])
        assert H.atom[0, 1] == 1.0
        assert H.tail[0, 1] == 2.0

    def test_truncated_keeps_inside_cells(self):
        grid = build_grid(1.0, 4)
        H = GridIntegrand.linear_t(grid, E0, dim=1)
        tau = StoppingTime.deterministic(grid, 0.5)
        cut = H.truncated(tau)
        np.testing.assert_array_equal(cut.cells[0, :, 0], [0.0, 0.25, 0.0, 0.0])
        np.testing.assert_array_equal(cut.tail, 0.0)
        never = H.truncated(StoppingTime.never(grid))
        np.testing.assert_array_equal(never.cells, H.cells)
        np.testing.assert_array_equal(never.tail, H.tail)

    def test_algebra(self):
        grid = build_grid(1.0, 4)
        H = GridIntegrand.linear_t(grid, E0, dim=2)
        G = GridIntegrand.constant(grid, E1, dim=2)
        both = H.plus(G.scaled(2.0))
        np.testing.assert_array_equal(both.cells[0, :, 0], H.cells[0, :, 0])
        np.testing.assert_array_equal(both.cells[0, :, 1], 2.0)
        np.testing.assert_array_equal(both.tail[0], [1.0, 2.0])

    def test_mul_step(self):
        grid = build_grid(1.0, 4)
        H = GridIntegrand.constant(grid, E0, dim=1, scenario_count=1)
        g = StepScalarProcess.indicator(grid, 0.25, 0.75, value=2.0)
        gH = H.mul_step(g)
        np.testing.assert_array_equal(gH.cells[0, :, 0], [0.0, 2.0, 2.0, 0.0])
        # the indicator vanishes at 0 and at the horizon
        np.testing.assert_array_equal(gH.atom, 0.0)
        np.testing.assert_array_equal(gH.tail, 0.0)

    def test_scale_scenarios(self):
        grid = build_grid(1.0, 4)
        H = GridIntegrand.constant(grid, E0, dim=1, scenario_count=3)
        xi = np.array([1.0, -2.0, 0.5])
        scaled = H.scale_scenarios(xi)
        np.testing.assert_array_equal(scaled.cells[:, 0, 0], xi)
        np.testing.assert_array_equal(scaled.atom[:, 0], xi)

    def test_shape_validation(self):
        grid = build_grid(1.0, 4)
        with pytest.raises(ValueError):
            GridIntegrand(grid, np.zeros((1, 3, 2)), np.zeros((1, 2)))
        with pytest.raises(ValueError):
            GridIntegrand(grid, np.zeros((1, 4, 2)), np.zeros((1, 3)))


class TestLeftLimitIntegrand:
    def test_jump_gives_prejump_value_at_node(self):
        Y = _jump_primal()
        H = left_limit_integrand(Y)
        j = Y.grid.index_of(0.5)
        assert H.value_at_node(j)[0, 0] == 1.0  # pre-jump value
        assert H.value_at_node(j + 1)[0, 0] == 3.0
        np.testing.assert_array_equal(H.cells[0, :, 0], [1.0, 1.0, 3.0, 3.0])
        assert H.atom[0, 0] == 1.0
        assert H.tail[0, 0] == 3.0

    def test_constant_path_gives_constant_integrand(self):
        grid = build_grid(1.0, 4)
        z = constant_path(grid, 1.5, scenario_count=2)
        Y = SeqPathPrimal([z], active=(0,))
        H = left_limit_integrand(Y)
        np.testing.assert_array_equal(H.cells, 1.5)
        np.testing.assert_array_equal(H.atom, 1.5)
        np.testing.assert_array_equal(H.tail, 1.5)

    def test_inactive_coordinates_stay_zero(self):
        Y = _jump_primal()
        H = left_limit_integrand(Y)
        np.testing.assert_array_equal(H.cells[:, :, 1], 0.0)
        assert H.support == (0,)


class TestSimplePredictable:
    def _simple(self, grid, seed=MASTER_SEED):
        rng = np.random.default_rng(seed)
        stops = np.array([[0, 3, 6]])
        coeffs = rng.uniform(-1.0, 1.0, size=(1, 2, 2))
        atom = rng.uniform(-1.0, 1.0, size=(1, 2))
        return SimplePredictableIntegrand(grid, stops, coeffs, atom)

    def test_validation(self):
        grid = build_grid(1.0, 8)
        with pytest.raises(ValueError):
            SimplePredictableIntegrand(grid, [[1, 3]], np.ones((1, 1, 1)), np.zeros((1, 1)))
        with pytest.raises(ValueError):
            SimplePredictableIntegrand(grid, [[0, 4, 2]], np.ones((1, 2, 1)), np.zeros((1, 1)))
        with pytest.raises(ValueError):
            SimplePredictableIntegrand(grid, [[0, 3]], np.ones((1, 1, 1)), np.zeros((1, 1)), bound=0.5)

    def test_cell_table_exact_copies(self):
        grid = build_grid(1.0, 8)
        H = self._simple(grid)
        C = H.cell_table()
        np.testing.assert_array_equal(C[0, :3], np.tile(H.coeffs[0, 0], (3, 1)))
        np.testing.assert_array_equal(C[0, 3:6], np.tile(H.coeffs[0, 1], (3, 1)))
        np.testing.assert_array_equal(C[0, 6:], 0.0)

    def test_truncation_routes_agree(self):
        grid = build_grid(1.0, 8)
        H = self._simple(grid)
        tau = StoppingTime.deterministic(grid, 0.5)
        via_simple = as_grid(H.truncated(tau))
        via_grid = as_grid(H).truncated(tau)
        np.testing.assert_array_equal(via_simple.cells, via_grid.cells)
        np.testing.assert_array_equal(via_simple.atom, via_grid.atom)


class TestSampleAt:
    def test_linear_midpoint_coefficient(self):
        grid = build_grid(1.0, 4)
        H = GridIntegrand.linear_t(grid, E1, dim=2)
        sigma = RandomPartition(grid, [[0, 2, 4]])
        Hs = sample_at(H, sigma)
        np.testing.assert_array_equal(Hs.coeffs[0, 1], [0.0, 0.5])
        np.testing.assert_array_equal(Hs.coeffs[0, 0], 0.0)
        np.testing.assert_array_equal(Hs.atom, H.atom)

    def test_constant_reproduces_itself(self):
        grid = build_grid(1.0, 8)
        phi = E0.scaled(3.0)
        H = GridIntegrand.constant(grid, phi, dim=1, scenario_count=2)
        sigma = RandomPartition(grid, np.tile([0, 3, 8], (2, 1)))
        Hs = sample_at(H, sigma)
        np.testing.assert_array_equal(Hs.coeffs[:, :, 0], 3.0)
        np.testing.assert_array_equal(as_grid(Hs).cells, H.cells)

    def test_zero_integrand(self):
        grid = build_grid(1.0, 4)
        H = GridIntegrand.constant(grid, FiniteSeq({}), dim=1)
        Hs = sample_at(H, full_grid_partition(grid))
        np.testing.assert_array_equal(Hs.coeffs, 0.0)

    def test_refinement_reproduces_simple_integrand(self):
        grid = build_grid(1.0, 8)
        rng = np.random.default_rng(MASTER_SEED + 1)
        H = SimplePredictableIntegrand(
            grid, [[0, 3, 7]], rng.uniform(-1, 1, (1, 2, 2)), rng.uniform(-1, 1, (1, 2))
        )
        G = as_grid(H)
        for sigma in (full_grid_partition(grid), RandomPartition(grid, [[0, 3, 5, 7, 8]])):
            back = sample_at(G, sigma)
            np.testing.assert_array_equal(as_grid(back).cells, G.cells)
            np.testing.assert_array_equal(back.atom, G.atom)

    def test_partition_point_on_horizon_is_dead(self):
        grid = build_grid(1.0, 4)
        H = GridIntegrand.constant(grid, E0, dim=1)
        Hs = sample_at(H, RandomPartition(grid, [[0, 4, 4]]))
        assert Hs.coeffs[0, 1, 0] == 0.0

    def test_mesh_refinement_converges_for_continuous_integrand(self):
        grid = build_grid(1.0, 8)
        H = GridIntegrand.linear_t(grid, E0, dim=1)
        dists = []
        for sigma in partition_sequence(grid, "dyadic", 3):
            gap = np.max(np.abs(as_grid(sample_at(H, sigma)).cells - H.cells))
            assert gap <= sigma.mesh() + 1e-12
            dists.append(gap)
        assert dists == sorted(dists, reverse=True)
        assert dists[-1] == 0.0  # level 3 is the full grid here


class TestPartitions:
    def test_dyadic_level_one(self):
        grid = build_grid(1.0, 8)
        sigma = partition_sequence(grid, "dyadic", 1)[0]
        np.testing.assert_array_equal(sigma.idx, [[0, 4, 8]])
        np.testing.assert_array_equal(grid.nodes[sigma.idx[0]], [0.0, 0.5, 1.0])

    def test_mesh_shrinks(self):
        grid = build_grid(1.0, 64, extra_times=(0.301,))
        spacing = float(np.max(np.diff(grid.nodes)))
        seq = partition_sequence(grid, "dyadic", 5)
        meshes = [s.mesh() for s in seq]
        for k, m in enumerate(meshes, start=1):
            assert m <= 1.0 / 2**k + spacing + 1e-12
        for a, b in zip(meshes, meshes[1:]):
            assert b <= a / 2 + spacing + 1e-12

    def test_jittered_deterministic_and_valid(self):
        grid = build_grid(1.0, 32)
        ens = Ensemble(3, MASTER_SEED)
        a = partition_sequence(grid, "jittered", 3, ens)
        b = partition_sequence(grid, "jittered", 3, ens)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.idx, pb.idx)
            assert np.all(pa.idx[:, 0] == 0)
            assert np.all(pa.idx[:, -1] == grid.size - 1)
        spacing = 1.0 / 32
        for k, p in enumerate(a, start=1):
            assert p.mesh() <= 2.0 / 2**k + spacing + 1e-12

    def test_jittered_needs_ensemble(self):
        grid = build_grid(1.0, 8)
        with pytest.raises(ValueError):
            partition_sequence(grid, "jittered", 2)
        with pytest.raises(ValueError):
            partition_sequence(grid, "uniform", 2)

    def test_partition_validation(self):
        grid = build_grid(1.0, 4)
        with pytest.raises(ValueError):
            RandomPartition(grid, [[1, 4]])
        with pytest.raises(ValueError):
            RandomPartition(grid, [[0, 3, 2]])
        with pytest.raises(ValueError):
            RandomPartition(grid, [[0, 9]])


class TestSupSeminormAndLocalize:
    def test_zero_and_weighted_constant(self):
        grid = build_grid(1.0, 4)
        assert sup_seminorm(GridIntegrand.constant(grid, FiniteSeq({}), dim=2)) == 0.0
        H = GridIntegrand.constant(grid, E1, dim=2)
        assert sup_seminorm(H, weights={1: 2.0}) == 2.0

    def test_linear_max_at_horizon(self):
        grid = build_grid(1.0, 8)
        H = GridIntegrand.linear_t(grid, E1, dim=2)
        assert sup_seminorm(H) == 1.0

    def test_simple_integrand_norm(self):
        grid = build_grid(1.0, 4)
        H = SimplePredictableIntegrand(
            grid, [[0, 2, 4]], [[[0.5, -1.5], [0.25, 0.0]]], [[2.0, 0.0]]
        )
        assert sup_seminorm(H) == 2.0
        assert sup_seminorm(H, weights={1: 4.0}) == 6.0

    def test_weights_must_be_positive(self):
        grid = build_grid(1.0, 4)
        H = GridIntegrand.constant(grid, E0, dim=1)
        with pytest.raises(ValueError):
            sup_seminorm(H, weights={0: -1.0})

    def test_localize_threshold_scan(self):
        grid = build_grid(1.0, 8)
        H = GridIntegrand.linear_t(grid, E0, dim=1)
        (tau,) = localize(H, [0.5])
        # first node whose upcoming value exceeds 0.5, strictly after 0.5
        np.testing.assert_array_equal(tau.times(), [0.625])

    def test_localize_never_triggers_below_horizon(self):
        grid = build_grid(0.5, 4)
        H = GridIntegrand.constant(grid, E0.scaled(0.5), dim=1)
        (tau,) = localize(H, [1.0])
        assert np.all(np.isinf(tau.times()))

    def test_localize_caps_march_with_index(self):
        grid = build_grid(3.0, 6)
        H = GridIntegrand.constant(grid, FiniteSeq({}), dim=1)
        taus = localize(H, [10.0, 20.0, 30.0])
        np.testing.assert_array_equal([t.times()[0] for t in taus], [1.0, 2.0, 3.0])

    def test_localize_monotone_and_bound_exact(self):
        grid = build_grid(1.0, 16)
        H = GridIntegrand.linear_t(grid, E0, dim=1).scaled(3.0)
        levels = [0.5, 1.0, 2.0]
        taus = localize(H, levels)
        prev = np.full(H.scenario_count, -1)
        for level, tau in zip(levels, taus):
            assert np.all(tau.index >= prev)
            prev = tau.index
            assert sup_seminorm(H.truncated(tau)) <= level
        with pytest.raises(ValueError):
            localize(H, [2.0, 1.0])


class TestElementaryToGrid:
    def test_matches_manual_assembly(self):
        grid = build_grid(1.0, 4)
        h1 = StepScalarProcess.indicator(grid, 0.0, 0.5, value=2.0)
        h2 = StepScalarProcess.constant(grid, -1.0)
        E = ElementaryIntegrand(((h1, E0), (h2, FiniteSeq({2: 3.0}))))
        H = elementary_to_grid(E, dim=3, scenario_count=2)
        np.testing.assert_array_equal(H.cells[0, :, 0], [2.0, 2.0, 0.0, 0.0])
        np.testing.assert_array_equal(H.cells[0, :, 2], -3.0)
        np.testing.assert_array_equal(H.atom[0], [0.0, 0.0, -3.0])

    def test_validation(self):
        grid = build_grid(1.0, 4)
        with pytest.raises(ValueError):
            elementary_to_grid(ElementaryIntegrand(()), dim=2, scenario_count=1)
        E = ElementaryIntegrand(((StepScalarProcess.constant(grid, 1.0), FiniteSeq.basis(5)),))
        with pytest.raises(ValueError):
            elementary_to_grid(E, dim=2, scenario_count=1)


class TestHittingTime:
    def test_matches_manual_scan(self):
        grid = build_grid(1.0, 32)
        ens = Ensemble(6, MASTER_SEED)
        z = gen_brownian(grid, ens, vol=1.0)
        X = CoordinatePaths([z])
        level = 0.3
        tau = hitting_time(X, level)
        for s in range(6):
            above = np.abs(z.right[s]) > level
            expected = int(np.argmax(above)) if above.any() else grid.size
            assert tau.index[s] == expected
        assert tau.kind == "hitting"

    def test_weights_shift_trigger(self):
        grid = build_grid(1.0, 8)
        z = constant_path(grid, 0.0, scenario_count=1)
        ramp = GridIntegrand.linear_t(grid, E0, dim=1)  # reuse cells as a path
        w = ScalarPath(grid, np.concatenate([ramp.cells[0, :, 0], [1.0]])[None, :])
        X = CoordinatePaths([z, w])
        loose = hitting_time(X, 0.9)
        tight = hitting_time(X, 0.9, weights={1: 4.0})
        assert np.all(tight.index <= loose.index)
        assert np.all(tight.index < grid.size)

    def test_never_when_level_unreached(self):
        grid = build_grid(1.0, 8)
        X = CoordinatePaths([constant_path(grid, 0.25, scenario_count=2)])
        tau = hitting_time(X, 5.0)
        assert np.all(tau.index == grid.size)
        assert np.all(np.isinf(tau.times()))
