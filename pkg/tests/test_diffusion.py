import numpy as np
import pytest

from rave.diffusion import (
    BOUNDARY_STEP,
    ConstantNoisePredictor,
    DiffusionSchedule,
    GridMeanCouplingPredictor,
    GuidanceConfig,
    PointwisePredictor,
    ZeroNoisePredictor,
    ddim_denoise_step,
    ddim_invert_step,
    guide,
    make_schedule,
)


def schedule_with(alpha_bars, timesteps=None):
    """Fabricate a schedule with explicit alpha_bar values per train step."""
    alpha_bars = np.asarray(alpha_bars, dtype=np.float64)
    if timesteps is None:
        timesteps = np.arange(len(alpha_bars))[::-1]
    return DiffusionSchedule(
        train_steps=len(alpha_bars),
        sampling_steps=len(timesteps),
        timesteps=np.asarray(timesteps),
        alpha_bars=alpha_bars,
    )


class TestMakeSchedule:
    def test_default_50_of_1000(self):
        sched = make_schedule(1000, 50)
        assert len(sched.timesteps) == 50
        abars = [sched.alpha_bar(int(t)) for t in sched.timesteps]
        # timesteps descend, so alpha_bar ascends along the list
        assert all(a < b for a, b in zip(abars, abars[1:]))
        assert all(0 < a <= 1 for a in abars)

    def test_full_schedule(self):
        sched = make_schedule(20, 20)
        assert sched.timesteps.tolist() == list(range(19, -1, -1))

    def test_constant_beta_products(self):
        # direct product evaluation: 0.999, 0.999^2, 0.999^3
        sched = make_schedule(3, 3, beta_start=0.001, beta_end=0.001)
        expected = [0.999, 0.998001, 0.997002999]
        assert np.allclose(sched.alpha_bars, expected, rtol=0, atol=1e-15)

    def test_trailing_spacing_anchors_at_end(self):
        sched = make_schedule(1000, 50, spacing="trailing")
        assert sched.timesteps[0] == 999
        assert sched.timesteps[-1] == 19
        assert len(sched.timesteps) == 50

    def test_leading_spacing_anchors_at_zero(self):
        sched = make_schedule(1000, 50, spacing="leading")
        assert sched.timesteps[-1] == 0
        assert sched.timesteps[0] == 980

    def test_alpha_bar_strictly_decreasing_random_params(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            train = int(rng.integers(2, 200))
            steps = int(rng.integers(1, train + 1))
            b0 = float(rng.uniform(1e-5, 0.01))
            b1 = float(rng.uniform(b0, 0.05))
            sched = make_schedule(train, steps, b0, b1)
            assert np.all(np.diff(sched.alpha_bars) < 0)

    def test_invalid_ranges(self):
        with pytest.raises(ValueError):
            make_schedule(10, 11)
        with pytest.raises(ValueError):
            make_schedule(10, 0)
        with pytest.raises(ValueError):
            make_schedule(10, 5, beta_start=0.0)
        with pytest.raises(ValueError):
            make_schedule(10, 5, beta_start=0.02, beta_end=0.01)
        with pytest.raises(ValueError):
            make_schedule(10, 5, spacing="middle")

    def test_boundary_alpha_is_one(self):
        assert make_schedule(10, 5).alpha_bar(BOUNDARY_STEP) == 1.0


class TestDenoiseStep:
    def test_zero_noise_is_rescaling(self):
        # sqrt(0.8 / 0.5) = 1.2649110640673518 by direct evaluation
        sched = schedule_with([0.8, 0.5])
        out = ddim_denoise_step(np.array(1.0), np.array(0.0), t=1, t_prev=0, sched=sched)
        assert float(out) == pytest.approx(1.2649110640673518, abs=1e-12)

    def test_equal_alpha_bar_is_identity(self):
        sched = schedule_with([0.5, 0.5])
        z = np.array([0.3, -0.7, 1.1])
        eps = np.array([0.9, -0.2, 0.4])
        out = ddim_denoise_step(z, eps, t=1, t_prev=0, sched=sched)
        assert np.allclose(out, z, rtol=0, atol=1e-12)

    def test_final_step_to_boundary(self):
        # x0 = (0.5 - sqrt(0.75)*0.5) / 0.5 = 0.1339745962155614
        sched = schedule_with([0.25])
        out = ddim_denoise_step(np.array(0.5), np.array(0.5), t=0, t_prev=BOUNDARY_STEP, sched=sched)
        assert float(out) == pytest.approx(0.1339745962155614, abs=1e-12)

    def test_zero_noise_full_trajectory_telescopes(self):
        sched = make_schedule(100, 10)
        z = np.array([[0.4, -0.3], [1.2, 0.05]])
        current = z
        for t, t_prev in sched.denoise_pairs():
            current = ddim_denoise_step(current, np.zeros_like(current), t, t_prev, sched)
        top = int(sched.timesteps[0])
        assert np.allclose(current, z / np.sqrt(sched.alpha_bar(top)), rtol=0, atol=1e-12)

    def test_shape_preserved(self):
        sched = schedule_with([0.9, 0.5])
        z = np.zeros((3, 4, 2))
        out = ddim_denoise_step(z, np.zeros_like(z), 1, 0, sched)
        assert out.shape == z.shape

    def test_shape_mismatch(self):
        sched = schedule_with([0.9, 0.5])
        with pytest.raises(ValueError, match="shape"):
            ddim_denoise_step(np.zeros(3), np.zeros(4), 1, 0, sched)

    def test_step_not_in_schedule(self):
        sched = schedule_with([0.9, 0.5])
        with pytest.raises(ValueError, match="not in the schedule"):
            ddim_denoise_step(np.zeros(1), np.zeros(1), 7, 0, sched)

    def test_step_order_violation(self):
        sched = schedule_with([0.9, 0.5])
        with pytest.raises(ValueError, match="order"):
            ddim_denoise_step(np.zeros(1), np.zeros(1), 0, 1, sched)


class TestInvertStep:
    def test_zero_noise_scaling_and_round_trip(self):
        sched = schedule_with([0.8, 0.5])
        z = np.array(0.7)
        up = ddim_invert_step(z, np.array(0.0), t_prev=0, t=1, sched=sched)
        assert float(up) == pytest.approx(0.7 * np.sqrt(0.5 / 0.8), abs=1e-15)
        back = ddim_denoise_step(up, np.array(0.0), t=1, t_prev=0, sched=sched)
        assert float(back) == pytest.approx(0.7, abs=1e-15)

    def test_fixed_noise_round_trip(self):
        sched = schedule_with([0.8, 0.5])
        rng = np.random.default_rng(3)
        for _ in range(50):
            z = rng.normal()
            eps = np.array(0.3)
            up = ddim_invert_step(np.array(z), eps, 0, 1, sched)
            back = ddim_denoise_step(up, eps, 1, 0, sched)
            assert abs(float(back) - z) < 1e-12

    def test_step_inverse_property_all_pairs(self):
        sched = make_schedule(60, 12)
        rng = np.random.default_rng(4)
        pairs = sched.denoise_pairs()
        for t, t_prev in pairs:
            z = rng.normal(size=(2, 3, 1))
            eps = rng.normal(size=(2, 3, 1))
            round_a = ddim_denoise_step(ddim_invert_step(z, eps, t_prev, t, sched), eps, t, t_prev, sched)
            round_b = ddim_invert_step(ddim_denoise_step(z, eps, t, t_prev, sched), eps, t_prev, t, sched)
            assert np.allclose(round_a, z, rtol=0, atol=1e-12)
            assert np.allclose(round_b, z, rtol=0, atol=1e-12)

    def test_50_step_round_trip_against_scalar_recursion(self):
        sched = make_schedule(1000, 50)
        rng = np.random.default_rng(8)
        z0 = rng.normal(size=(4, 4, 3))
        eps = np.full_like(z0, 0.25)

        current = z0
        for t_prev, t in sched.invert_pairs():
            current = ddim_invert_step(current, eps, t_prev, t, sched)

        # independent oracle: the recursion written out directly
        expected = z0.copy()
        steps = [BOUNDARY_STEP] + [int(t) for t in sched.timesteps[::-1]]
        for t_prev, t in zip(steps, steps[1:]):
            a_prev = 1.0 if t_prev == BOUNDARY_STEP else sched.alpha_bars[t_prev]
            a_t = sched.alpha_bars[t]
            x0 = (expected - np.sqrt(1 - a_prev) * eps) / np.sqrt(a_prev)
            expected = np.sqrt(a_t) * x0 + np.sqrt(1 - a_t) * eps
        assert np.allclose(current, expected, rtol=0, atol=1e-12)

        for t, t_prev in sched.denoise_pairs():
            current = ddim_denoise_step(current, eps, t, t_prev, sched)
        assert np.abs(current - z0).max() < 1e-6


class TestGuide:
    def test_scale_one_returns_conditional_exactly(self):
        u = np.array([0.1, -0.4])
        c = np.array([0.3, 0.9])
        assert np.array_equal(guide(u, c, GuidanceConfig(1.0)), c)

    def test_scale_zero_returns_unconditional_exactly(self):
        u = np.array([0.1, -0.4])
        c = np.array([0.3, 0.9])
        assert np.array_equal(guide(u, c, GuidanceConfig(0.0)), u)

    def test_scalar_blend(self):
        out = guide(np.array(0.1), np.array(0.2), GuidanceConfig(7.5))
        assert float(out) == pytest.approx(0.85, abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            guide(np.zeros(2), np.zeros(3), GuidanceConfig(7.5))

    def test_negative_scale_rejected(self):
        with pytest.raises(ValueError):
            GuidanceConfig(-0.5)


class TestToyPredictors:
    def test_shapes_and_determinism(self):
        grid = np.random.default_rng(0).normal(size=(8, 8, 3))
        emb = np.ones(64)
        for predictor in (
            ZeroNoisePredictor(),
            ConstantNoisePredictor(0.2),
            PointwisePredictor(embedding_gain=0.1),
            GridMeanCouplingPredictor(),
        ):
            a = predictor.predict(grid, 5, emb, None)
            b = predictor.predict(grid, 5, emb, None)
            assert a.shape == grid.shape
            assert np.array_equal(a, b)

    def test_pointwise_is_frame_separable(self):
        # predicting a sub-block alone matches the block cut from a full grid
        rng = np.random.default_rng(1)
        grid = rng.normal(size=(8, 8, 3))
        emb = rng.normal(size=64)
        predictor = PointwisePredictor(embedding_gain=0.05)
        full = predictor.predict(grid, 3, emb, None)
        block = predictor.predict(grid[:4, 4:], 3, emb, None)
        assert np.array_equal(full[:4, 4:], block)

    def test_grid_mean_couples_cells(self):
        rng = np.random.default_rng(2)
        grid = rng.normal(size=(8, 8, 3))
        predictor = GridMeanCouplingPredictor()
        full = predictor.predict(grid, 3, np.zeros(4), None)
        block = predictor.predict(grid[:4, :4], 3, np.zeros(4), None)
        assert not np.allclose(full[:4, :4], block)

    def test_grid_mean_is_deviation_from_mean(self):
        grid = np.arange(12.0).reshape(2, 2, 3)
        out = GridMeanCouplingPredictor(coupling=0.5).predict(grid, 0, np.zeros(4), None)
        assert np.allclose(out, 0.5 * (grid - grid.mean()))
