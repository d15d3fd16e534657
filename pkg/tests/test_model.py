import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cranopt.model import (
    FronthaulAllocation,
    InfiniteLoadError,
    PowerAllocation,
    QuantModel,
    Scenario,
    ScenarioError,
    SolveReport,
    check_feasible,
    gaussian_fronthaul_load,
    gaussian_noise_for_rate,
    gaussian_sum_rate,
    mrc_weights,
    snr_post_mrc,
    snr_with_weights,
    uniform_fronthaul_load,
    uniform_sum_rate,
)

from conftest import random_multi, single_link


def two_rrh():
    # |h1|^2 p = 1, |h2|^2 p = 2 with p = 1
    return Scenario(1.0, np.array([[[1.0]], [[2.0]]]), np.ones((2, 1)), [1.0], [1.0, 1.0], [0])


class TestScenario:
    def test_shapes_checked(self):
        with pytest.raises(ScenarioError):
            Scenario(1.0, np.ones((1, 1, 2)), np.ones((1, 3)), [1.0], [1.0], [0, 0])

    def test_owner_range(self):
        with pytest.raises(ScenarioError):
            Scenario(1.0, np.ones((1, 1, 2)), np.ones((1, 2)), [1.0], [1.0], [0, 1])

    @pytest.mark.parametrize("field", ["gain", "noise", "budget", "cap"])
    def test_negative_rejected(self, field):
        args = dict(gain=np.ones((1, 1, 1)), noise=np.ones((1, 1)), budget=[1.0], cap=[1.0])
        args[field] = -np.asarray(args[field])
        with pytest.raises(ScenarioError):
            Scenario(1.0, args["gain"], args["noise"], args["budget"], args["cap"], [0])

    def test_bandwidth_positive(self):
        with pytest.raises(ScenarioError):
            Scenario(0.0, np.ones((1, 1, 1)), np.ones((1, 1)), [1.0], [1.0], [0])

    def test_arrays_read_only(self):
        scn = single_link([1.0, 2.0])
        with pytest.raises(ValueError):
            scn.channel_gain_sq[0, 0, 0] = 5.0

    def test_derived_sizes(self):
        scn = random_multi(np.random.default_rng(0), 3, 2, 6)
        assert (scn.num_rrhs, scn.num_users, scn.num_subcarriers) == (3, 2, 6)
        assert scn.bit_rate_step == pytest.approx(2 * scn.bandwidth_hz / 6)
        assert scn.owner_mask().sum(axis=0).tolist() == [1] * 6


class TestSnr:
    def test_single_branch(self):
        scn = single_link([2.0])
        p = PowerAllocation([[0.5]])
        assert snr_post_mrc(scn, p, np.zeros((1, 1)), 0) == pytest.approx(1.0)

    def test_zero_power(self):
        scn = two_rrh()
        assert snr_post_mrc(scn, PowerAllocation([[0.0]]), np.ones((2, 1)), 0) == 0.0

    def test_two_rrh_example(self):
        scn = two_rrh()
        q = np.array([[1.0], [0.0]])
        assert snr_post_mrc(scn, PowerAllocation([[1.0]]), q, 0) == pytest.approx(2.5, rel=1e-12)

    def test_matches_combiner_form(self, rng):
        scn = random_multi(rng, 4, 2, 6)
        power = PowerAllocation.from_per_subcarrier(rng.uniform(0.1, 1, 6), scn)
        q = rng.uniform(0.0, 2.0, size=(4, 6))
        for n in range(6):
            via_w = snr_with_weights(scn, power, q, n, mrc_weights(scn, q, n))
            assert snr_post_mrc(scn, power, q, n) == pytest.approx(via_w, rel=1e-12)

    def test_mrc_beats_other_combiners(self, rng):
        scn = random_multi(rng, 3, 1, 1)
        power = PowerAllocation([[1.0]])
        q = rng.uniform(0.0, 1.0, size=(3, 1))
        best = snr_post_mrc(scn, power, q, 0)
        for _ in range(50):
            w = rng.normal(size=3) + 1j * rng.normal(size=3)
            assert snr_with_weights(scn, power, q, 0, w) <= best * (1 + 1e-12)


class TestGaussianRate:
    def test_hand_example(self):
        # B = 1 Hz, N = 1, SNR 3, t = 2 bit/s: q = 4 / 3
        scn = single_link([3.0], budget=1.0, cap_bps=2.0, bandwidth=1.0)
        _, total = gaussian_sum_rate(scn, PowerAllocation([[1.0]]), FronthaulAllocation([[2.0]]))
        mpmath.mp.dps = 40
        exact = mpmath.log(1 + mpmath.mpf(3) / (1 + mpmath.mpf(4) / 3), 2)
        assert total == pytest.approx(float(exact), rel=1e-14)
        assert total == pytest.approx(np.log2(1 + 9 / 7), rel=1e-14)

    def test_zero_power(self, rng):
        scn = random_multi(rng, 2, 2, 4)
        _, total = gaussian_sum_rate(scn, PowerAllocation.zeros(scn),
                                     FronthaulAllocation(np.ones((2, 4)) * 1e6))
        assert total == 0.0

    def test_zero_rate_contributes_nothing(self):
        scn = two_rrh()
        power = PowerAllocation([[1.0]])
        only_second = gaussian_sum_rate(scn, power, FronthaulAllocation([[0.0], [50.0]]))[1]
        assert only_second == pytest.approx(np.log2(1 + 2.0), rel=1e-9)

    def test_large_rate_limit(self, rng):
        # the residual noise is 2^-20 of the received power, so the bound
        # needs per-branch SNR well below 1e4; the presets sit near 1e2
        scn = random_multi(rng, 3, 2, 8)
        scn = Scenario(scn.bandwidth_hz, scn.channel_gain_sq / 10, scn.noise_var,
                       scn.power_budget, scn.fronthaul_cap, scn.sc_owner)
        power = PowerAllocation.from_per_subcarrier(rng.uniform(0.1, 1, 8), scn)
        t = np.full((3, 8), 20 * scn.sc_bandwidth)
        rates, _ = gaussian_sum_rate(scn, power, FronthaulAllocation(t))
        x = scn.owner_gain() * power.per_subcarrier() / scn.noise_var
        wireless = scn.sc_bandwidth * np.log2(1 + x.sum(axis=0))
        assert np.all(np.abs(rates - wireless) / wireless < 1e-4)

    @given(st.integers(0, 2**32 - 1))
    def test_monotone_in_rate_and_power(self, seed):
        rng = np.random.default_rng(seed)
        scn = random_multi(rng, 2, 2, 4)
        p_sc = rng.uniform(0.05, 1.0, 4)
        t = rng.uniform(0.1, 6.0, (2, 4)) * scn.sc_bandwidth
        base = gaussian_sum_rate(scn, PowerAllocation.from_per_subcarrier(p_sc, scn),
                                 FronthaulAllocation(t))[0]
        m, n = rng.integers(2), rng.integers(4)
        t2 = t.copy()
        t2[m, n] *= 1.1
        more_t = gaussian_sum_rate(scn, PowerAllocation.from_per_subcarrier(p_sc, scn),
                                   FronthaulAllocation(t2))[0]
        assert more_t[n] > base[n]
        p2 = p_sc.copy()
        p2[n] *= 1.1
        more_p = gaussian_sum_rate(scn, PowerAllocation.from_per_subcarrier(p2, scn),
                                   FronthaulAllocation(t))[0]
        assert more_p[n] > base[n]


class TestLoads:
    def test_noise_equal_to_signal_gives_one_bit(self):
        scn = single_link([3.0, 1.0], cap_bps=1.0, bandwidth=2.0)
        power = PowerAllocation([[1.0, 1.0]])
        s = scn.owner_gain() * power.per_subcarrier() + scn.noise_var
        assert gaussian_fronthaul_load(scn, power, s)[0] == pytest.approx(2 * scn.sc_bandwidth)

    def test_infinite_noise_zero_load(self):
        scn = single_link([3.0])
        load = gaussian_fronthaul_load(scn, PowerAllocation([[1.0]]), np.full((1, 1), 1e300))
        assert load[0] == pytest.approx(0.0, abs=1e-200)

    def test_zero_noise_is_infinite_load(self):
        scn = single_link([3.0])
        with pytest.raises(InfiniteLoadError):
            gaussian_fronthaul_load(scn, PowerAllocation([[1.0]]), np.zeros((1, 1)))

    @given(st.integers(0, 2**32 - 1))
    def test_rate_noise_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        scn = random_multi(rng, 3, 2, 5)
        power = PowerAllocation.from_per_subcarrier(rng.uniform(0.0, 1.0, 5), scn)
        t = rng.uniform(0.01, 12.0, (3, 5)) * scn.sc_bandwidth
        q = gaussian_noise_for_rate(scn, power, t)
        back = scn.sc_bandwidth * np.log2(
            1 + (scn.owner_gain() * power.per_subcarrier() + scn.noise_var) / q)
        np.testing.assert_allclose(back, t, rtol=1e-9)

    def test_uniform_load_example(self):
        n, b = 32, 100e6
        scn = Scenario(b, np.ones((1, 1, n)), np.ones((1, n)), [1.0], [1e9], np.zeros(n, int))
        fh = FronthaulAllocation.from_bits(np.full((1, n), 4), scn)
        assert uniform_fronthaul_load(fh)[0] == pytest.approx(800e6)
        one = FronthaulAllocation.from_bits(np.eye(1, n, dtype=int), scn)
        assert uniform_fronthaul_load(one)[0] == pytest.approx(2 * b / n)
        assert uniform_fronthaul_load(FronthaulAllocation.zeros(scn))[0] == 0.0


class TestUniformRate:
    def test_zero_power(self, rng):
        scn = random_multi(rng, 2, 2, 4)
        fh = FronthaulAllocation.from_bits(np.full((2, 4), 3), scn)
        assert uniform_sum_rate(scn, PowerAllocation.zeros(scn), fh)[1] == 0.0

    def test_off_grid_rejected(self):
        scn = single_link([3.0, 2.0])
        bad = FronthaulAllocation(np.full((1, 2), 1.5 * scn.bit_rate_step), np.ones((1, 2)))
        with pytest.raises(ScenarioError):
            uniform_sum_rate(scn, PowerAllocation([[1.0, 1.0]]), bad)

    @given(st.integers(0, 2**32 - 1))
    def test_below_gaussian_on_grid(self, seed):
        rng = np.random.default_rng(seed)
        scn = random_multi(rng, 3, 2, 6)
        power = PowerAllocation.from_per_subcarrier(rng.uniform(0.01, 1.0, 6), scn)
        fh = FronthaulAllocation.from_bits(rng.integers(1, 9, size=(3, 6)), scn)
        ru, _ = uniform_sum_rate(scn, power, fh)
        rg, _ = gaussian_sum_rate(scn, power, fh)
        assert np.all(ru < rg)


class TestFeasibility:
    def test_zero_allocations_feasible(self, rng):
        scn = random_multi(rng, 2, 3, 6)
        for model in QuantModel:
            assert check_feasible(scn, PowerAllocation.zeros(scn),
                                  FronthaulAllocation.zeros(scn), model) == []

    def test_power_violation_names_user(self, rng):
        scn = random_multi(rng, 2, 3, 6)
        p = np.zeros((3, 6))
        p[1, scn.subcarriers_of(1)] = 2 * scn.power_budget[1] / len(scn.subcarriers_of(1))
        out = check_feasible(scn, PowerAllocation(p), FronthaulAllocation.zeros(scn),
                             QuantModel.GAUSSIAN)
        assert [(v.kind, v.index) for v in out] == [("power", 1)]

    def test_grid_violation(self):
        scn = single_link([3.0, 2.0], cap_bps=1e9)
        fh = FronthaulAllocation(np.array([[1.5 * scn.bit_rate_step, 0.0]]))
        out = check_feasible(scn, PowerAllocation.zeros(scn), fh, QuantModel.UNIFORM)
        assert [v.kind for v in out] == ["grid"]
        assert check_feasible(scn, PowerAllocation.zeros(scn), fh, QuantModel.UNIFORM,
                              require_integer=False) == []

    def test_fronthaul_violation(self):
        scn = single_link([3.0, 2.0], cap_bps=10.0)
        fh = FronthaulAllocation(np.array([[6.0, 6.0]]))
        out = check_feasible(scn, PowerAllocation.zeros(scn), fh, QuantModel.GAUSSIAN)
        assert [(v.kind, v.index) for v in out] == [("fronthaul", 0)]


def test_report_round_trip_fields():
    scn = single_link([3.0, 2.0])
    rep = SolveReport(PowerAllocation([[0.5, 0.5]]), FronthaulAllocation([[1.0, 2.0]]),
                      4.0, [3.0, 4.0], 2, True, meta={"solver": "x"})
    doc = rep.to_dict()
    assert doc["objective_bps"] == doc["objective_trace"][-1]
    assert rep.spectral_efficiency(scn) == pytest.approx(4.0 / scn.bandwidth_hz)
