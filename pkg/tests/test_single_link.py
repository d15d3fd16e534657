import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cranopt import single_link as sl
from cranopt.model import (
    FronthaulAllocation,
    PowerAllocation,
    QuantModel,
    ScenarioError,
    check_feasible,
    gaussian_noise_for_rate,
    gaussian_sum_rate,
    uniform_sum_rate,
)

from conftest import joint_grid, random_single, single_link

seeds = st.integers(0, 2**32 - 1)


class TestWaterFilling:
    def test_single_subcarrier(self):
        p = sl.water_filling(single_link([5.0], budget=0.7)).p
        assert p[0, 0] == pytest.approx(0.7)

    def test_symmetric(self):
        p = sl.water_filling(single_link([2.0, 2.0], budget=1.0)).p[0]
        assert p == pytest.approx([0.5, 0.5])

    def test_two_subcarrier_grid(self):
        scn = single_link([1.0, 1 / 3], budget=1.0)
        p = sl.water_filling(scn).p[0]
        grid = np.linspace(0, 1, 100001)
        rate = np.log2(1 + grid) + np.log2(1 + (1 - grid) / 3)
        assert p[0] == pytest.approx(grid[np.argmax(rate)], abs=1e-4)

    def test_all_zero_gains(self):
        with pytest.raises(ScenarioError):
            sl.water_filling(single_link([0.0, 0.0]))

    def test_multi_link_rejected(self, rng):
        from conftest import random_multi
        with pytest.raises(ScenarioError):
            sl.water_filling(random_multi(rng, 2, 1, 4))


class TestPowerGivenFronthaul:
    @given(seeds)
    def test_large_rates_give_water_filling(self, seed):
        scn = random_single(np.random.default_rng(seed), 6)
        p = sl.power_given_fronthaul(scn, np.full(6, 60 * scn.sc_bandwidth)).p[0]
        np.testing.assert_allclose(p, sl.water_filling(scn).p[0], rtol=1e-6, atol=1e-12)

    def test_zero_rates_give_zero_power(self):
        scn = single_link([3.0, 2.0])
        power, state = sl.power_given_fronthaul(scn, [0.0, 0.0], full_output=True)
        assert np.all(power.p == 0)
        assert state.lam == np.inf

    @given(seeds)
    def test_threshold_structure_and_tight_budget(self, seed):
        rng = np.random.default_rng(seed)
        scn = random_single(rng, 8)
        t = rng.uniform(0, 3, 8) * scn.sc_bandwidth
        power, state = sl.power_given_fronthaul(scn, t, full_output=True)
        p = power.p[0]
        a = scn.channel_gain_sq[0, 0] / scn.noise_var[0]
        assert state.lam > 0
        np.testing.assert_array_equal(p > 0, a > state.threshold)
        assert p.sum() == pytest.approx(scn.power_budget[0], rel=1e-8)

    @given(seeds)
    def test_matches_grid_for_two_subcarriers(self, seed):
        rng = np.random.default_rng(seed)
        scn = random_single(rng, 2)
        t = rng.uniform(0.5, 4, 2) * scn.sc_bandwidth
        p = sl.power_given_fronthaul(scn, t).p[0]
        ours = gaussian_sum_rate(scn, PowerAllocation(p[None]), FronthaulAllocation(t[None]))[1]
        grid = np.linspace(0, 1, 20001)
        rates = [gaussian_sum_rate(scn, PowerAllocation([[g, 1 - g]]),
                                   FronthaulAllocation(t[None]))[1] for g in grid[::40]]
        assert ours >= max(rates) * (1 - 1e-9)


class TestFronthaulGivenPower:
    def test_single_subcarrier_takes_all(self):
        scn = single_link([4.0], cap_bps=3e6)
        t = sl.fronthaul_given_power(scn, [1.0]).t[0]
        assert t[0] == pytest.approx(3e6)

    def test_equal_snr_equal_split(self):
        scn = single_link([4.0, 4.0], cap_bps=3e6)
        t = sl.fronthaul_given_power(scn, [0.5, 0.5]).t[0]
        assert t == pytest.approx([1.5e6, 1.5e6])

    def test_zero_power(self):
        scn = single_link([4.0, 1.0])
        assert np.all(sl.fronthaul_given_power(scn, [0.0, 0.0]).t == 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_three_subcarrier_simplex_grid(self, seed):
        rng = np.random.default_rng(seed)
        scn = random_single(rng, 3)
        p = rng.dirichlet(np.ones(3))
        power = PowerAllocation(p[None])
        ours = gaussian_sum_rate(scn, power, sl.fronthaul_given_power(scn, p))[1]
        cap = scn.fronthaul_cap[0]
        step = cap / 2000
        t1, t2 = np.meshgrid(np.arange(2001) * step, np.arange(2001) * step, indexing="ij")
        ok = t1 + t2 <= cap + 1e-9
        t = np.stack([t1[ok], t2[ok], np.maximum(cap - t1[ok] - t2[ok], 0)])
        x = (scn.channel_gain_sq[0, 0] * p / scn.noise_var[0])[:, None]
        r = np.exp2(-t / scn.sc_bandwidth)
        rate = scn.sc_bandwidth * np.log2(1 + x * (1 - r) / (1 + r * x)).sum(axis=0)
        assert ours >= rate.max() * (1 - 1e-9)
        assert ours <= rate.max() * (1 + 1e-3)

    @given(seeds)
    def test_threshold_structure_and_tight_cap(self, seed):
        rng = np.random.default_rng(seed)
        scn = random_single(rng, 8)
        p = rng.dirichlet(np.ones(8))
        fh, state = sl.fronthaul_given_power(scn, p, full_output=True)
        b = scn.bandwidth_hz
        assert 0 < state.beta < 1 / b
        on = state.nu > state.beta * b / (1 - state.beta * b)
        np.testing.assert_array_equal(fh.t[0] > 0, on)
        assert fh.t.sum() == pytest.approx(scn.fronthaul_cap[0], rel=1e-8)


class TestAlgorithmOne:
    @pytest.mark.parametrize("seed", range(20))
    def test_joint_grid(self, seed):
        scn = random_single(np.random.default_rng(100 + seed), 2)
        rep = sl.algorithm_one(scn)
        grid = joint_grid(scn, QuantModel.GAUSSIAN)
        assert abs(rep.objective_bps - grid) <= 0.01 * grid

    @given(seeds)
    def test_trace_monotone_and_feasible(self, seed):
        scn = random_single(np.random.default_rng(seed), 16)
        rep = sl.algorithm_one(scn)
        tr = np.array(rep.objective_trace)
        assert np.all(tr[1:] >= tr[:-1] - 1e-12 * np.abs(tr[1:]))
        assert rep.objective_bps == tr[-1]
        assert check_feasible(scn, rep.power, rep.fronthaul, QuantModel.GAUSSIAN) == []

    def test_large_capacity_reaches_water_filling(self, rng):
        scn = random_single(rng, 16, cap_bits_per_sc=16 * 100)
        rep = sl.algorithm_one(scn)
        wireless = sl.cutset_bound(scn.with_fronthaul(np.inf if False else 1e30)) \
            * scn.bandwidth_hz
        assert rep.objective_bps == pytest.approx(wireless, rel=1e-3)
        np.testing.assert_allclose(rep.power.p, sl.water_filling(scn).p, rtol=1e-3, atol=1e-9)

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            sl.algorithm_one(single_link([1.0]), eps=0)


class TestCutset:
    def test_zero_capacity(self):
        assert sl.cutset_bound(single_link([3.0, 1.0], cap_bps=0.0)) == 0.0

    def test_large_capacity_is_wireless(self):
        scn = single_link([3.0, 1.0], budget=2.0, cap_bps=1e12)
        p = sl.water_filling(scn).p[0]
        assert sl.cutset_bound(scn) == pytest.approx(np.mean(np.log2(1 + [3.0, 1.0] * p)))

    def test_small_capacity_is_fronthaul(self):
        scn = single_link([3e3, 1e3], budget=1.0, cap_bps=0.5e6)
        assert sl.cutset_bound(scn) == pytest.approx(0.5)


class TestGapReferences:
    @given(seeds)
    def test_bounds_and_chain(self, seed):
        scn = random_single(np.random.default_rng(seed), 16)
        g_ref, u_ref = sl.gap_reference_solutions(scn)
        c = sl.cutset_bound(scn)
        b = scn.bandwidth_hz
        assert g_ref.objective_bps / b >= c - 1 - 1e-9
        assert u_ref.objective_bps / b >= c - 2 - 1e-9
        assert u_ref.objective_bps / b > g_ref.objective_bps / b - 1 - 1e-12
        assert check_feasible(scn, g_ref.power, g_ref.fronthaul, QuantModel.GAUSSIAN) == []
        assert check_feasible(scn, u_ref.power, u_ref.fronthaul, QuantModel.UNIFORM,
                              require_integer=False) == []

    def test_quantization_noise_equals_thermal(self, rng):
        scn = random_single(rng, 8, cap_bits_per_sc=12)
        g_ref, _ = sl.gap_reference_solutions(scn)
        served = g_ref.power.p[0] > 0
        q = gaussian_noise_for_rate(scn, g_ref.power, g_ref.fronthaul.t)
        np.testing.assert_allclose(q[0, served], scn.noise_var[0, served], rtol=1e-9)

    def test_no_room_below_one_bit(self):
        scn = single_link([3.0, 1.0], cap_bps=0.8e6)
        g_ref, u_ref = sl.gap_reference_solutions(scn)
        assert g_ref.objective_bps == 0 and u_ref.objective_bps == 0


class TestUniformContinuous:
    @pytest.mark.parametrize("seed", range(20))
    def test_joint_grid(self, seed):
        scn = random_single(np.random.default_rng(200 + seed), 2)
        rep = sl.solve_p2_noint_single(scn)
        grid = joint_grid(scn, QuantModel.UNIFORM)
        assert abs(rep.objective_bps - grid) <= 0.01 * max(grid, 1e-300)

    @given(seeds)
    def test_gap_and_warm_start(self, seed):
        scn = random_single(np.random.default_rng(seed), 16)
        rep = sl.solve_p2_noint_single(scn)
        _, u_ref = sl.gap_reference_solutions(scn)
        assert rep.objective_bps >= u_ref.objective_bps
        assert rep.objective_bps / scn.bandwidth_hz > sl.cutset_bound(scn) - 2
        assert rep.objective_bps / scn.bandwidth_hz <= sl.cutset_bound(scn)
        assert check_feasible(scn, rep.power, rep.fronthaul, QuantModel.UNIFORM,
                              require_integer=False) == []

    def test_gap_to_gaussian_vanishes(self, rng):
        scn = random_single(rng, 16)
        gaps = []
        for bits in (2, 8, 32):
            s = scn.with_fronthaul(bits * scn.bandwidth_hz)
            g = sl.algorithm_one(s).objective_bps
            gaps.append((g - sl.solve_p2_noint_single(s).objective_bps) / g)
        assert gaps[0] > gaps[1] > gaps[2] >= -1e-9
        assert gaps[2] < 1e-4


class TestRounding:
    def test_on_grid_unchanged(self):
        scn = single_link([3.0, 1.0, 2.0], cap_bps=1e9)
        bits = np.array([[3, 0, 5]])
        fh = FronthaulAllocation(bits * scn.bit_rate_step)
        np.testing.assert_array_equal(sl.round_bits(fh, scn).bits, bits)

    def test_half_step_rounds_up_when_it_fits(self):
        scn = single_link([3.0], cap_bps=1.0)
        scn = scn.with_fronthaul(2 * scn.bit_rate_step)
        fh = FronthaulAllocation([[1.5 * scn.bit_rate_step]])
        assert sl.round_bits(fh, scn).bits[0, 0] == 2

    def test_tie_rounds_down(self):
        bits, alpha = sl.round_row(np.array([1.5, 1.5]), 3)
        assert alpha == pytest.approx(0.5)
        assert sorted(bits) == [1, 1]

    @given(seeds)
    def test_feasible_and_not_worse_than_floor(self, seed):
        rng = np.random.default_rng(seed)
        scn = random_single(rng, 8)
        d = rng.dirichlet(np.ones(8)) * scn.fronthaul_cap[0] / scn.bit_rate_step
        fh = sl.round_bits(FronthaulAllocation(d[None] * scn.bit_rate_step), scn)
        assert fh.t.sum() <= scn.fronthaul_cap[0] * (1 + 1e-12)
        assert check_feasible(scn, PowerAllocation.zeros(scn), fh, QuantModel.UNIFORM) == []
        power = PowerAllocation(rng.dirichlet(np.ones(8))[None])
        floor = FronthaulAllocation.from_bits(np.floor(d)[None].astype(int), scn)
        assert uniform_sum_rate(scn, power, fh)[1] >= uniform_sum_rate(scn, power, floor)[1]

    @given(seeds)
    def test_integer_solution(self, seed):
        scn = random_single(np.random.default_rng(seed), 8)
        rep = sl.solve_p2_single(scn)
        assert check_feasible(scn, rep.power, rep.fronthaul, QuantModel.UNIFORM) == []
        assert rep.objective_bps <= rep.meta["continuous_objective_bps"] * (1 + 1e-12)
        assert rep.objective_bps == rep.objective_trace[-1]


def test_fig3_integer_loss_is_small():
    from cranopt.harness import generate_scenario, preset
    scn = generate_scenario(preset("fig3"))
    for mbps in (200, 400, 1000):
        s = scn.with_fronthaul(mbps * 1e6)
        rep = sl.solve_p2_single(s)
        assert rep.objective_bps >= 0.98 * rep.meta["continuous_objective_bps"]
