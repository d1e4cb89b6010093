import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brokendrift.model import ModelParams, passage_cost
from brokendrift.sde import (
    CoupledStepper,
    PathStepper,
    SimConfig,
    ThresholdSchedule,
    _advance_single,
    _NoiseSource,
    simulate_coupled,
    simulate_first_passage_cost,
    simulate_threshold_path,
)
from brokendrift.stationary import StationaryLaw
from brokendrift.streams import make_stream

SYM = ModelParams(-1, 1)
SKEW = ModelParams(-2, 1)


def mean_se(values):
    v = np.asarray(values, dtype=float)
    return v.mean(), v.std(ddof=1) / math.sqrt(v.size)


class TestSimConfig:
    def test_rejects_bad_dt(self):
        for dt in (0.0, -1e-3, float("nan"), float("inf")):
            with pytest.raises(ValueError):
                SimConfig(dt=dt)

    def test_steps_requires_alignment(self):
        cfg = SimConfig(dt=1e-3)
        assert cfg.steps(2000.0) == 2_000_000
        assert cfg.steps(0.1) == 100
        with pytest.raises(ValueError, match="multiple of dt"):
            cfg.steps(0.0005)

    def test_rejects_oversized_seed(self):
        with pytest.raises(ValueError):
            SimConfig(master_seed=1 << 64)


class TestStreams:
    def test_chunking_does_not_change_draws(self):
        whole = make_stream(3, 7).standard_normal(10_000)
        for chunk in (1, 97, 4096, 1 << 18):
            parts = list(_NoiseSource(make_stream(3, 7)).chunks(10_000, chunk))
            assert np.array_equal(np.concatenate(parts), whole)

    def test_streams_are_distinct(self):
        a = make_stream(0, 0).standard_normal(8)
        assert not np.array_equal(a, make_stream(0, 1).standard_normal(8))
        assert not np.array_equal(a, make_stream(1, 0).standard_normal(8))

    def test_rejects_negative_ids(self):
        with pytest.raises(ValueError):
            make_stream(0, -1)


class TestThresholdPath:
    def test_noiseless_descent_reaches_threshold(self):
        cfg = SimConfig(dt=1e-3)
        stats = simulate_threshold_path(SYM, 0.0, 1.0, 0.0, 1.0, cfg, _diffusion=0.0)
        assert abs(stats.terminal) <= cfg.dt * 1 + 1e-12
        assert stats.steps == 1000

    @pytest.mark.parametrize("params,z", [(SYM, 0.0), (SKEW, 0.25), (ModelParams(-0.5, 3.0), -1.0)])
    def test_noiseless_chattering_band(self, params, z):
        cfg = SimConfig(dt=1e-3)
        stepper = PathStepper(params, z, cfg, _diffusion=0.0)
        for _ in range(50):
            stats = stepper.advance(z, 7)
            lo, hi = z + params.theta0 * cfg.dt, z + params.theta1 * cfg.dt
            assert lo - 1e-12 <= stats.terminal <= hi + 1e-12

    def test_noiseless_symmetric_band(self):
        cfg = SimConfig(dt=1e-3)
        stepper = PathStepper(SYM, 0.0, cfg, _diffusion=0.0)
        for n in (1, 2, 5, 1000):
            assert abs(stepper.advance(0.0, n).terminal) <= SYM.theta1 * cfg.dt + 1e-15

    def test_stationary_second_moment(self):
        cfg = SimConfig(dt=1e-3, master_seed=2024)
        vals = [
            simulate_threshold_path(SYM, 0.0, 0.0, 0.0, 2000.0, cfg.with_stream(r)).int_x2 / 2000
            for r in range(100)
        ]
        m, se = mean_se(vals)
        assert abs(m - 0.5) < 3 * se

    def test_window_start_only_sets_length(self):
        cfg = SimConfig(dt=1e-2, stream_id=4)
        a = simulate_threshold_path(SYM, 0.0, 0.3, 0.0, 5.0, cfg)
        b = simulate_threshold_path(SYM, 0.0, 0.3, 10.0, 15.0, cfg)
        assert a == b

    def test_rejects_reversed_window(self):
        with pytest.raises(ValueError):
            simulate_threshold_path(SYM, 0.0, 0.0, 2.0, 1.0, SimConfig())

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32), st.integers(1, 3000))
    def test_split_windows_match_single_window(self, seed, split):
        cfg = SimConfig(dt=1e-2, master_seed=seed)
        whole = PathStepper(SKEW, 0.0, cfg).advance(0.1, 3001)
        stepper = PathStepper(SKEW, 0.0, cfg)
        a = stepper.advance(0.1, split)
        b = stepper.advance(0.1, 3001 - split)
        assert b.terminal == whole.terminal
        assert a.int_x2 + b.int_x2 == pytest.approx(whole.int_x2, rel=1e-12)
        assert a.int_x2 >= 0 and b.int_x2 >= 0


class TestCoupled:
    def test_optimal_schedule_is_bit_identical(self):
        cfg = SimConfig(dt=1e-2, master_seed=9, stream_id=3)
        out = simulate_coupled(SKEW, SKEW.delta, SKEW.delta, 1.5, 100.0, cfg)
        assert out.learner == out.oracle

    def test_rerun_is_identical(self):
        cfg = SimConfig(dt=1e-2, master_seed=9, stream_id=3)
        sched = ThresholdSchedule((0.0, 2.0, 4.0), (0.0, 0.7, -0.2))
        a = simulate_coupled(SYM, sched, 0.0, 0.0, 50.0, cfg)
        b = simulate_coupled(SYM, sched, 0.0, 0.0, 50.0, cfg)
        assert a == b
        assert a.learner != a.oracle

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            ThresholdSchedule((1.0,), (0.0,))
        with pytest.raises(ValueError):
            ThresholdSchedule((0.0, 2.0, 2.0), (0.0, 1.0, 2.0))

    def test_fixed_offset_gap_per_unit_time(self):
        cfg = SimConfig(dt=1e-2, master_seed=77)
        T = 2000.0
        gaps = []
        for r in range(30):
            out = simulate_coupled(SYM, 1.0, 0.0, 0.0, T, cfg.with_stream(r))
            gaps.append((out.learner.int_x2 - out.oracle.int_x2) / T)
        m, se = mean_se(gaps)
        assert abs(m - 1.0) < 3 * se

    def test_checkpoints_record_cumulative_integrals(self):
        cfg = SimConfig(dt=1e-2, stream_id=1)
        stepper = CoupledStepper(SYM, 0.0, cfg, checkpoints=[0, 150, 300, 450])
        stepper.advance(0.5, 200)
        stepper.advance(-0.5, 250)
        assert sorted(stepper.snapshots) == [0, 150, 300, 450]
        assert stepper.snapshots[450] == pytest.approx((stepper.learner_int_x2, stepper.oracle_int_x2))
        learner = [stepper.snapshots[k][0] for k in (0, 150, 300, 450)]
        assert learner == sorted(learner)


class TestFirstPassage:
    def test_start_on_target(self):
        assert simulate_first_passage_cost(SYM, 0.5, 0.5, SimConfig(), 10.0) == (0.0, True)

    def test_capped_before_reaching(self):
        cfg = SimConfig(dt=1e-3)
        cost, hit = simulate_first_passage_cost(SYM, 50.0, 0.0, cfg, cfg.dt)
        assert not hit
        assert cost == pytest.approx(2500 * cfg.dt)

    def test_rejects_start_below_target(self):
        with pytest.raises(ValueError):
            simulate_first_passage_cost(SYM, -1.0, 0.0, SimConfig(), 1.0)

    def test_small_monte_carlo(self):
        cfg = SimConfig(dt=1e-3, master_seed=31)
        costs = []
        for r in range(2000):
            cost, hit = simulate_first_passage_cost(SYM, 1.0, 0.0, cfg.with_stream(r), 1000.0)
            assert hit
            costs.append(cost)
        m, se = mean_se(costs)
        # Grid-only crossing detection overshoots the target, biasing the cost up.
        assert abs(m - passage_cost(SYM, 1.0, 0.0)) < 3 * se + 0.03 * 4 / 3


def _stationary_gap(dt_fine, m_levels, reps, T, seed):
    # Paths at dt_fine * m for each m share Brownian increments: coarse
    # increments are sums of fine ones, rescaled to unit variance.
    law = StationaryLaw(SYM, 0.0)
    n_fine = int(round(T / dt_fine))
    out = {m: [] for m in m_levels}
    for r in range(reps):
        rng = make_stream(seed, r)
        x0 = float(law.sample(rng))
        xi = rng.standard_normal(n_fine)
        for m in m_levels:
            dt = dt_fine * m
            coarse = xi.reshape(-1, m).sum(axis=1) / math.sqrt(m)
            _, _, s2 = _advance_single(coarse, x0, 0.0, -1.0, 1.0, dt, math.sqrt(dt))
            out[m].append(s2 * dt / T)
    return {m: np.asarray(v) for m, v in out.items()}


class TestGridRefinement:
    def test_successive_refinements_shrink(self):
        vals = _stationary_gap(1e-3, (1, 2, 4), reps=100, T=400.0, seed=505)
        coarse = vals[4] - vals[2]
        fine = vals[2] - vals[1]
        mc, sc = mean_se(coarse)
        mf, sf = mean_se(fine)
        assert mf > 3 * sf
        assert mc - mf > 3 * math.hypot(sc, sf)


class TestMoments:
    def test_fourth_moment_stays_bounded(self):
        cfg = SimConfig(dt=1e-2, master_seed=404)
        n_streams, n_blocks = 1000, 40
        samples = np.empty((n_streams, n_blocks))
        for r in range(n_streams):
            stepper = PathStepper(SYM, 0.0, cfg.with_stream(r))
            for j in range(n_blocks):
                samples[r, j] = stepper.advance(0.0, 50).terminal
        assert np.max(np.mean(samples**4, axis=0)) < 100

    def test_convergence_to_stationarity(self):
        cfg = SimConfig(dt=1e-2, master_seed=808)
        times = (1.0, 4.0, 16.0, 64.0)
        n_streams = 2000
        x2 = np.empty((n_streams, len(times)))
        for r in range(n_streams):
            stepper = PathStepper(SYM, 4.0, cfg.with_stream(r))
            prev = 0.0
            for j, t in enumerate(times):
                x2[r, j] = stepper.advance(0.0, cfg.steps(t - prev)).terminal ** 2
                prev = t
        mean = x2.mean(axis=0)
        se = x2.std(axis=0, ddof=1) / math.sqrt(n_streams)
        gap = np.abs(mean - 0.5)
        for i in range(len(times) - 1):
            assert gap[i + 1] < gap[i] + 3 * se[i + 1]
        assert gap[0] > 1.0
