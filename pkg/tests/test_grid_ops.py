import itertools

import numpy as np
import pytest
from scipy.stats import chi2

from rave.grid_ops import (
    GridLayout,
    Permutation,
    compose,
    grid2video,
    identity_permutation,
    invert_permutation,
    plan_padding,
    sample_permutation,
    video2grid,
)


def random_store(k, cell=(4, 4, 3), seed=0):
    rng = np.random.default_rng(seed)
    return {i: rng.normal(size=cell) for i in range(k)}


def layout_for(rows, cols, cell=(4, 4)):
    return GridLayout(rows=rows, cols=cols, cell_height=cell[0], cell_width=cell[1])


class TestPlanPadding:
    def test_divisible_no_pads(self):
        plan = plan_padding(8, 4)
        assert plan.padded_count == 8
        assert plan.pad_count == 0

    def test_10_frames_9_cells(self):
        plan = plan_padding(10, 9)
        assert plan.padded_count == 18
        assert plan.pad_count == 8
        for idx in range(10, 18):
            assert plan.source_index(idx) == 9

    def test_degenerate(self):
        plan = plan_padding(1, 1)
        assert plan.padded_count == 1
        assert plan.pad_count == 0

    def test_padding_below_one_grid(self):
        for k in range(1, 40):
            for n in range(1, 12):
                plan = plan_padding(k, n)
                assert plan.padded_count % n == 0
                assert 0 <= plan.padded_count - k < n

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            plan_padding(0, 4)
        with pytest.raises(ValueError):
            plan_padding(4, 0)


class TestVideo2Grid:
    def test_sequential_8_frames_2x2(self):
        store = random_store(8)
        batch = video2grid(store, layout_for(2, 2), np.arange(8))
        assert batch.grid_count == 2
        assert batch.assignment.tolist() == [[0, 1, 2, 3], [4, 5, 6, 7]]

    def test_single_grid_9_frames_3x3(self):
        batch = video2grid(random_store(9), layout_for(3, 3), np.arange(9))
        assert batch.grid_count == 1
        assert batch.assignment.tolist() == [[0, 1, 2, 3, 4, 5, 6, 7, 8]]

    def test_explicit_order_cell_contents(self):
        store = random_store(4)
        order = [3, 1, 0, 2]
        batch = video2grid(store, layout_for(2, 2), order)
        grid = batch.grids[0]
        # row-major: (r, c) holds order[r*m + c]
        assert np.array_equal(grid[:4, :4], store[3])
        assert np.array_equal(grid[:4, 4:], store[1])
        assert np.array_equal(grid[4:, :4], store[0])
        assert np.array_equal(grid[4:, 4:], store[2])

    def test_grid_pixel_dimensions(self):
        batch = video2grid(random_store(6, cell=(3, 5, 2)), GridLayout(2, 3, 3, 5), np.arange(6))
        assert batch.grids[0].shape == (2 * 3, 3 * 5, 2)

    def test_padded_cells_replicate_last_frame(self):
        store = random_store(10)
        batch = video2grid(store, layout_for(3, 3), np.arange(18))
        # padded indices 10..17 all land in grid 1 under identity order
        grid = batch.grids[1]
        for j, idx in enumerate(batch.assignment[1]):
            r, c = divmod(j, 3)
            cell = grid[r * 4 : (r + 1) * 4, c * 4 : (c + 1) * 4]
            expected = store[int(idx)] if idx < 10 else store[9]
            assert np.array_equal(cell, expected)

    def test_order_not_bijection(self):
        with pytest.raises(ValueError, match="bijection"):
            video2grid(random_store(4), layout_for(2, 2), [0, 1, 2, 2])

    def test_order_wrong_length(self):
        with pytest.raises(ValueError, match="length"):
            video2grid(random_store(4), layout_for(2, 2), [0, 1, 2])

    def test_cell_shape_mismatch(self):
        with pytest.raises(ValueError, match="cell"):
            video2grid(random_store(4, cell=(2, 2, 3)), layout_for(2, 2), np.arange(4))

    def test_store_must_cover_indices(self):
        store = random_store(4)
        del store[2]
        store[7] = np.zeros((4, 4, 3))
        with pytest.raises(ValueError, match="cover"):
            video2grid(store, layout_for(2, 2), np.arange(4))


class TestGrid2Video:
    def test_round_trip_identity_order(self):
        store = random_store(8, seed=1)
        batch = video2grid(store, layout_for(2, 2), np.arange(8))
        back = grid2video(batch)
        assert sorted(back) == list(range(8))
        for k in store:
            assert np.array_equal(back[k], store[k])

    def test_round_trip_random_orders(self):
        rng = np.random.default_rng(42)
        store = random_store(12, seed=2)
        for _ in range(25):
            order = rng.permutation(12)
            back = grid2video(video2grid(store, layout_for(2, 2), order))
            for k in store:
                assert np.array_equal(back[k], store[k])

    def test_padded_batch_drops_pads(self):
        store = random_store(10, seed=3)
        rng = np.random.default_rng(0)
        back = grid2video(video2grid(store, layout_for(3, 3), rng.permutation(18)))
        assert sorted(back) == list(range(10))
        for k in store:
            assert np.array_equal(back[k], store[k])

    def test_malformed_assignment(self):
        batch = video2grid(random_store(4), layout_for(2, 2), np.arange(4))
        batch.assignment[0, 0] = 1
        with pytest.raises(ValueError, match="partition"):
            grid2video(batch)

    def test_partition_property_random_cases(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            k = int(rng.integers(1, 40))
            rows, cols = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            padded = plan_padding(k, rows * cols).padded_count
            batch = video2grid(
                random_store(k, cell=(2, 2, 1), seed=int(rng.integers(1 << 30))),
                GridLayout(rows, cols, 2, 2),
                rng.permutation(padded),
            )
            assert np.array_equal(np.sort(batch.assignment.ravel()), np.arange(padded))


class TestPermutations:
    def test_singleton_is_identity(self):
        rng = np.random.default_rng(0)
        perm = sample_permutation(rng, 1, timestep=5)
        assert perm.forward.tolist() == [0]
        assert perm.timestep == 5

    def test_deterministic_given_seed_and_draw_order(self):
        draws_a = [sample_permutation(np.random.default_rng(123), 10).forward.tolist()]
        rng = np.random.default_rng(123)
        draws_b = [sample_permutation(rng, 10).forward.tolist()]
        assert draws_a == draws_b
        # successive draws differ (generator advances)
        assert sample_permutation(rng, 10).forward.tolist() != draws_b[0]

    def test_uniformity_chi_square(self):
        # exact outcome space enumerated by brute force
        outcomes = {p: 0 for p in itertools.permutations(range(3))}
        assert len(outcomes) == 6
        rng = np.random.default_rng(2024)
        draws = 10_000
        for _ in range(draws):
            outcomes[tuple(sample_permutation(rng, 3).forward.tolist())] += 1
        expected = draws / 6
        for count in outcomes.values():
            assert abs(count / draws - 1 / 6) < 0.02
        statistic = sum((c - expected) ** 2 / expected for c in outcomes.values())
        assert statistic < chi2.ppf(0.99, df=5)

    def test_invert_identity(self):
        p = identity_permutation(5)
        assert invert_permutation(p).forward.tolist() == [0, 1, 2, 3, 4]

    def test_invert_hand_case(self):
        p = Permutation(np.array([2, 0, 1]))
        assert invert_permutation(p).forward.tolist() == [1, 2, 0]

    def test_invert_involution(self):
        rng = np.random.default_rng(9)
        p = sample_permutation(rng, 81)
        assert np.array_equal(invert_permutation(invert_permutation(p)).forward, p.forward)

    def test_compose_with_inverse_is_identity(self):
        rng = np.random.default_rng(11)
        p = sample_permutation(rng, 81)
        assert np.array_equal(compose(p, invert_permutation(p)).forward, np.arange(81))
        assert np.array_equal(compose(invert_permutation(p), p).forward, np.arange(81))

    def test_non_bijection_rejected(self):
        with pytest.raises(ValueError, match="bijection"):
            Permutation(np.array([0, 0, 1]))


class TestLayoutValidation:
    def test_bad_dimensions(self):
        with pytest.raises(ValueError):
            GridLayout(0, 2, 4, 4)
        with pytest.raises(ValueError):
            GridLayout(2, 2, 0, 4)

    def test_cell_count(self):
        assert GridLayout(2, 3, 4, 4).cells == 6
