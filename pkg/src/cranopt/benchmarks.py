"""Comparison schemes that optimize at most one of power and fronthaul."""

from __future__ import annotations

import enum

import numpy as np

from . import multi
from ._kernels import solve_power
from . import single_link as sl
from .model import (
    FronthaulAllocation,
    PowerAllocation,
    QuantModel,
    Scenario,
    ScenarioError,
    SolveReport,
    relative_quant_noise,
    sum_rate,
)

__all__ = ["BenchmarkScheme", "run_benchmark", "nearest_rrh"]


class BenchmarkScheme(enum.Enum):
    EQUAL_POWER = "equal-power"
    WATER_FILLING_POWER = "water-filling-power"
    EQUAL_FRONTHAUL = "equal-fronthaul"
    EQUAL_BOTH = "equal-both"
    CONVENTIONAL_OFDMA = "conventional-ofdma"


def _equal_power(scenario: Scenario) -> PowerAllocation:
    mask = scenario.owner_mask()
    counts = mask.sum(axis=1)
    share = np.divide(scenario.power_budget, counts, out=np.zeros(scenario.num_users),
                      where=counts > 0)
    return PowerAllocation(mask * share[:, None])


def nearest_rrh(scenario: Scenario, by: str = "gain") -> np.ndarray:
    """Serving RRH per user: largest mean gain over its subcarriers, or smallest distance."""
    if by == "distance":
        if scenario.distance_m is None:
            raise ScenarioError("scenario carries no distances")
        return np.argmin(scenario.distance_m, axis=0)
    if by != "gain":
        raise ValueError(f"unknown association rule {by!r}")
    mask = scenario.owner_mask().astype(float)
    counts = np.maximum(mask.sum(axis=1), 1.0)
    mean_gain = np.einsum("mkn,kn->mk", scenario.channel_gain_sq, mask) / counts
    return np.argmax(mean_gain, axis=0)


def _optimized_fronthaul(scenario: Scenario, power: PowerAllocation, model: QuantModel,
                         eps: float, max_iter: int):
    """Best fronthaul for fixed power; uniform results are rounded to the grid."""
    if model is QuantModel.GAUSSIAN:
        if scenario.is_single_link:
            return sl.fronthaul_given_power(scenario, power.p[0]), {}
        return multi.fronthaul_given_power_multi(scenario, power, model, eps, max_iter), {}
    cont = multi.fronthaul_given_power_multi(scenario, power, model, eps, max_iter)
    return multi.round_bits_multi(cont, scenario), {"rounding": "alpha-bisection"}


def _equal_fronthaul(scenario: Scenario, model: QuantModel) -> FronthaulAllocation:
    n_sc = scenario.num_subcarriers
    if model is QuantModel.GAUSSIAN:
        return FronthaulAllocation(np.repeat(scenario.fronthaul_cap[:, None] / n_sc, n_sc, axis=1))
    d = np.floor(scenario.fronthaul_cap / (2.0 * scenario.bandwidth_hz) + 1e-9).astype(np.int64)
    return FronthaulAllocation.from_bits(np.repeat(d[:, None], n_sc, axis=1), scenario)


def _power_for(scenario: Scenario, fh: FronthaulAllocation, model: QuantModel) -> PowerAllocation:
    if model is QuantModel.GAUSSIAN and scenario.is_single_link:
        return sl.power_given_fronthaul(scenario, fh.t[0])
    w = relative_quant_noise(fh.t, scenario.sc_bandwidth, model)
    p, _ = solve_power(scenario.owner_gain(), scenario.noise_var, w,
                       scenario.sc_owner, scenario.power_budget)
    return PowerAllocation.from_per_subcarrier(p, scenario)


def _conventional(scenario: Scenario, association: str) -> SolveReport:
    serve = nearest_rrh(scenario, association)
    n = np.arange(scenario.num_subcarriers)
    m_sc = serve[scenario.sc_owner]
    g = scenario.channel_gain_sq[m_sc, scenario.sc_owner, n]
    s = scenario.noise_var[m_sc, n]
    a = np.where(s > 0, g / np.where(s > 0, s, 1.0), 0.0)
    p = multi.per_user_water_filling(scenario, a)
    rate = float(np.sum(scenario.sc_bandwidth * np.log2(1.0 + a * p)))
    return SolveReport(PowerAllocation.from_per_subcarrier(p, scenario),
                       FronthaulAllocation.zeros(scenario), rate, [rate], 0, True,
                       meta={"serving_rrh": serve, "association": association})


def run_benchmark(scheme: BenchmarkScheme | str, scenario: Scenario,
                  quant_model: QuantModel = QuantModel.GAUSSIAN,
                  eps: float = sl.DEFAULT_EPS, max_iter: int = sl.DEFAULT_MAX_ITER,
                  association: str = "gain") -> SolveReport:
    """Evaluate one benchmark scheme.

    Under the uniform model every fronthaul allocation is put on the integer
    grid: optimized rates are rounded with the alpha-bisection rule, equal
    splits use ``floor(T_m / 2B)`` bits per subcarrier.
    """
    scheme = BenchmarkScheme(scheme)
    if scheme is BenchmarkScheme.CONVENTIONAL_OFDMA:
        rep = _conventional(scenario, association)
        rep.meta.update(scheme=scheme.value, model="none")
        return rep

    meta: dict = {}
    if scheme in (BenchmarkScheme.EQUAL_POWER, BenchmarkScheme.WATER_FILLING_POWER):
        if scheme is BenchmarkScheme.EQUAL_POWER:
            power = _equal_power(scenario)
        else:
            power = multi.water_filling_multi(scenario)
        fh, meta = _optimized_fronthaul(scenario, power, quant_model, eps, max_iter)
    else:
        fh = _equal_fronthaul(scenario, quant_model)
        if scheme is BenchmarkScheme.EQUAL_BOTH:
            power = _equal_power(scenario)
        else:
            power = _power_for(scenario, fh, quant_model)
    obj = sum_rate(scenario, power, fh, quant_model)
    meta.update(scheme=scheme.value, model=quant_model.value)
    return SolveReport(power, fh, obj, [obj], 1, True, meta=meta)
