"""Solvers for one user served by one RRH.

With K = M = 1 both subproblems of the alternating scheme have closed forms
up to a scalar dual variable:

* power for fixed fronthaul rates is a thresholded quadratic root per
  subcarrier, with the power price ``lam`` found by root bracketing;
* fronthaul rates for fixed power are ``(B/N) max(log2(x nu_n), 0)`` with
  ``x = (1 - beta B) / (beta B)``, which is water-filling in the log domain and
  is solved exactly by sorting.

The uniform-quantizer problems reuse the shared kernels in
:mod:`cranopt._kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import _kernels as kern
from .model import (
    FronthaulAllocation,
    PowerAllocation,
    QuantModel,
    Scenario,
    ScenarioError,
    SolveReport,
    gaussian_sum_rate,
    relative_quant_noise,
    uniform_sum_rate,
)

__all__ = [
    "DualState",
    "water_filling",
    "power_given_fronthaul",
    "fronthaul_given_power",
    "algorithm_one",
    "cutset_bound",
    "gap_reference_solutions",
    "solve_p2_noint_single",
    "round_bits",
    "round_row",
    "solve_p2_single",
    "power_shutdown_rate",
]

DEFAULT_EPS = 1e-6
DEFAULT_MAX_ITER = 500


@dataclass
class DualState:
    """Dual variables and per-subcarrier intermediates of the closed forms.

    Attributes
    ----------
    lam : float
        Power price; ``inf`` when no subcarrier can be served.
    beta : float
        Fronthaul price in (0, 1/B); ``nan`` when not computed.
    lam_bracket, beta_bracket : tuple of float
        Final search interval of each price.
    alpha, eta : ndarray
        Quadratic coefficients of the power step, ``p^2 + alpha p + eta = 0``.
    threshold : ndarray
        Channel-to-noise ratio a subcarrier must exceed to get power.
    nu : ndarray
        Received SNR ``|h|^2 p / sigma^2`` seen by the fronthaul step.
    """

    lam: float = float("nan")
    beta: float = float("nan")
    lam_bracket: tuple[float, float] = (float("nan"), float("nan"))
    beta_bracket: tuple[float, float] = (float("nan"), float("nan"))
    alpha: np.ndarray | None = None
    eta: np.ndarray | None = None
    threshold: np.ndarray | None = None
    nu: np.ndarray | None = None


def _require_single(scenario: Scenario):
    if not scenario.is_single_link:
        raise ScenarioError("single-link solver needs K = M = 1")


def _channel(scenario: Scenario):
    """(g, s, a) vectors for the single link, a = g / s (0 where s = 0)."""
    g = scenario.channel_gain_sq[0, 0].astype(float)
    s = scenario.noise_var[0].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(s > 0, g / s, np.where(g > 0, np.inf, 0.0))
    return g, s, a


def _water_level(floor, total):
    """Level mu with sum_n max(mu - floor_n, 0) = total; inf floors never fill."""
    floor = np.asarray(floor, float)
    fin = np.sort(floor[np.isfinite(floor)])
    if fin.size == 0:
        raise ScenarioError("no subcarrier can be filled")
    csum = np.cumsum(fin)
    k = np.arange(1, fin.size + 1)
    mu = (total + csum) / k
    # largest active count whose level still clears its own floor
    ok = mu > fin
    n_on = int(np.flatnonzero(ok)[-1]) + 1
    return float(mu[n_on - 1])


def water_filling(scenario: Scenario) -> PowerAllocation:
    """Capacity-achieving power over the subcarriers, ignoring the fronthaul."""
    _require_single(scenario)
    _, _, a = _channel(scenario)
    budget = float(scenario.power_budget[0])
    if not np.any(a > 0):
        raise ScenarioError("all channel gains are zero")
    p = _wf_powers(a, budget)
    return PowerAllocation(p[None, :])


def _wf_powers(a, budget, level=None):
    with np.errstate(divide="ignore"):
        floor = np.where(a > 0, 1.0 / a, np.inf)
    if level is None:
        level = _water_level(floor, budget)
    return np.where(a > 0, np.maximum(level - floor, 0.0), 0.0)


# ---------------------------------------------------------------------------
# Power for fixed fronthaul rates (Gaussian test channel)
# ---------------------------------------------------------------------------

def _quadratic_power(a, r, lam, n_sc):
    """Positive root of the stationarity quadratic, scaled by r = 2^-c.

    In SNR units (X = a p) the condition reads
    (1 + X)(1 + w + w X) = a / (lam N ln 2) with w = r / (1 - r).
    """
    kappa = 1.0 / (lam * n_sc * kern.LN2)
    # alpha r, eta r in units where the floor 1/a is the power scale
    inv = np.where(a > 0, 1.0 / np.where(a > 0, a, 1.0), 0.0)
    ar = inv * (1.0 + r)
    er = inv * inv - inv * (1.0 - r) * kappa
    with np.errstate(invalid="ignore"):
        p = -2.0 * er / (ar + np.sqrt(ar * ar - 4.0 * er * r))
    return np.where((a > 0) & (r < 1.0) & (er < 0), p, 0.0), ar, er


def power_given_fronthaul(scenario: Scenario, t_hat, *, full_output: bool = False):
    """Optimal power for fixed per-subcarrier fronthaul rates.

    A subcarrier gets power only if its channel-to-noise ratio exceeds
    ``lam N ln2 2^c / (2^c - 1)`` (c = N t / B).  Subcarriers with zero
    fronthaul never get power.  If no subcarrier can be served the result is
    all zero and ``lam`` is reported as ``inf``.

    Parameters
    ----------
    t_hat : array_like, shape (N,) or (1, N)
        Fronthaul rates in bit/s.
    full_output : bool
        Also return the :class:`DualState`.
    """
    _require_single(scenario)
    _, _, a = _channel(scenario)
    n_sc = scenario.num_subcarriers
    t = np.asarray(t_hat, float).reshape(-1)
    if t.shape != (n_sc,) or np.any(t < 0):
        raise ScenarioError("t_hat must be N nonnegative rates")
    budget = float(scenario.power_budget[0])
    r = np.exp2(-t / scenario.sc_bandwidth)

    state = DualState()
    lam_n = np.where(a > 0, a * (1.0 - r), 0.0) / (n_sc * kern.LN2)
    if budget == 0 or not np.any(lam_n > 0):
        state.lam = np.inf
        state.threshold = np.full(n_sc, np.inf)
        p = np.zeros(n_sc)
    else:
        def excess(z):
            return _quadratic_power(a, r, np.exp(z), n_sc)[0].sum() - budget

        hi = np.log(lam_n.max())
        lo = hi - 1.0
        while excess(lo) <= 0:
            lo -= 2.0 * (hi - lo)
        z = optimize.brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        state.lam = float(np.exp(z))
        state.lam_bracket = (float(np.exp(lo)), float(np.exp(hi)))
        p, ar, er = _quadratic_power(a, r, state.lam, n_sc)
        p = p * (budget / p.sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            state.alpha = np.where(r > 0, ar / r, np.inf)
            state.eta = np.where(r > 0, er / r, -np.inf)
            state.threshold = np.where(r < 1, state.lam * n_sc * kern.LN2 / (1.0 - r), np.inf)
    power = PowerAllocation(p[None, :])
    return (power, state) if full_output else power


def power_shutdown_rate(scenario: Scenario, sc: int, hi: float | None = None,
                        rtol: float = 1e-10) -> float:
    """Smallest common per-subcarrier rate at which subcarrier ``sc`` loses power.

    Every subcarrier is given the same fronthaul rate; returns ``inf`` if the
    subcarrier keeps power up to ``hi`` (default 64 bits per real dimension).
    """
    _require_single(scenario)
    n_sc = scenario.num_subcarriers
    if hi is None:
        hi = 128.0 * scenario.sc_bandwidth

    def off(rate):
        p = power_given_fronthaul(scenario, np.full(n_sc, rate)).p[0]
        return p[sc] <= 0.0

    if not off(hi):
        return float("inf")
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if off(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Fronthaul for fixed power (Gaussian test channel)
# ---------------------------------------------------------------------------

def fronthaul_given_power(scenario: Scenario, p_hat, *, full_output: bool = False):
    """Optimal continuous fronthaul rates for fixed powers.

    Solves ``sum_n (B/N) max(log2(x nu_n), 0) = T`` for the level ``x``; the
    fronthaul price is ``beta = 1 / (B (1 + x))``.  Zero power everywhere (or
    zero capacity) gives an all-zero allocation with ``beta`` left as nan.
    """
    _require_single(scenario)
    _, _, a = _channel(scenario)
    p = np.asarray(p_hat, float).reshape(-1)
    if p.shape != (scenario.num_subcarriers,) or np.any(p < 0):
        raise ScenarioError("p_hat must be N nonnegative powers")
    nu = a * p
    cap_bits = float(scenario.fronthaul_cap[0]) / scenario.sc_bandwidth
    state = DualState(nu=nu)
    if cap_bits == 0 or not np.any(nu > 0):
        t = np.zeros_like(nu)
    else:
        with np.errstate(divide="ignore"):
            floor = np.where(nu > 0, -np.log2(nu), np.inf)
        level = _water_level(floor, cap_bits)
        c = np.where(nu > 0, np.maximum(level - floor, 0.0), 0.0)
        # rescale out the rounding so the capacity is met exactly
        c *= cap_bits / c.sum()
        t = c * scenario.sc_bandwidth
        with np.errstate(over="ignore"):
            state.beta = float(1.0 / (scenario.bandwidth_hz * (1.0 + np.exp2(level))))
        state.beta_bracket = (state.beta, state.beta)
    fh = FronthaulAllocation(t[None, :])
    return (fh, state) if full_output else fh


# ---------------------------------------------------------------------------
# alternating power and fronthaul solver
# ---------------------------------------------------------------------------

def _converged(new, old, eps):
    return new - old <= eps * max(abs(new), np.finfo(float).tiny)


def algorithm_one(scenario: Scenario, eps: float = DEFAULT_EPS,
                  max_iter: int = DEFAULT_MAX_ITER) -> SolveReport:
    """Alternate the two closed-form steps from an equal fronthaul split.

    The objective after each full iteration is appended to the trace.  A step
    that would lower the objective (only possible through round-off) is
    rejected and the run stops.
    """
    _require_single(scenario)
    if eps <= 0:
        raise ValueError("eps must be positive")
    n_sc = scenario.num_subcarriers
    fh = FronthaulAllocation(np.full((1, n_sc), scenario.fronthaul_cap[0] / n_sc))
    power = PowerAllocation.zeros(scenario)
    trace: list[float] = []
    best = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new_p = power_given_fronthaul(scenario, fh.t[0])
        new_fh = fronthaul_given_power(scenario, new_p.p[0])
        obj = gaussian_sum_rate(scenario, new_p, new_fh)[1]
        if obj < best:
            converged = True
            it -= 1
            break
        prev, best = best, obj
        power, fh = new_p, new_fh
        trace.append(obj)
        if _converged(obj, prev, eps):
            converged = True
            break
    return SolveReport(power, fh, trace[-1] if trace else 0.0, trace, it, converged,
                       meta={"solver": "algorithm_one", "model": "gaussian"})


# ---------------------------------------------------------------------------
# Bounds and gap-guaranteeing reference points
# ---------------------------------------------------------------------------

def cutset_bound(scenario: Scenario) -> float:
    """min(wireless water-filling spectral efficiency, T / B) in bit/s/Hz."""
    _require_single(scenario)
    cap = float(scenario.fronthaul_cap[0]) / scenario.bandwidth_hz
    _, _, a = _channel(scenario)
    if cap == 0 or not np.any(a > 0) or scenario.power_budget[0] == 0:
        return 0.0
    p = _wf_powers(a, float(scenario.power_budget[0]))
    wireless = float(np.mean(np.log2(1.0 + a * p)))
    return min(wireless, cap)


def _gap_power(scenario: Scenario) -> np.ndarray:
    """Water-filling on half the SNR with the rate held to T / B - 1."""
    _, _, a = _channel(scenario)
    n_sc = scenario.num_subcarriers
    budget = float(scenario.power_budget[0])
    spare = float(scenario.fronthaul_cap[0]) / scenario.bandwidth_hz - 1.0
    if spare <= 0 or budget == 0 or not np.any(a > 0):
        return np.zeros(n_sc)
    half = a / 2.0
    p = _wf_powers(half, budget)
    if np.mean(np.log2(1.0 + half * p)) > spare:
        with np.errstate(divide="ignore"):
            floor = np.where(half > 0, -np.log2(half), np.inf)
        level = np.exp2(_water_level(floor, n_sc * spare))
        p = _wf_powers(half, budget, level=level)
    return p


def gap_reference_solutions(scenario: Scenario):
    """Feasible points with a provable gap to the cut-set bound.

    Returns ``(gaussian_ref, uniform_ref)``.  Both use the same power; the
    Gaussian reference sizes each subcarrier's rate so the quantization noise
    equals the thermal noise, the uniform one uses ``(B/N) log2(1 + nu)``.
    When T <= B there is no room for the construction and both are all zero.
    """
    _require_single(scenario)
    _, _, a = _channel(scenario)
    p = _gap_power(scenario)
    nu = a * p
    power = PowerAllocation(p[None, :])
    scb = scenario.sc_bandwidth
    served = p > 0
    t_g = np.where(served, scb * np.log2(2.0 + nu), 0.0)
    t_u = np.where(served, scb * np.log1p(nu) / kern.LN2, 0.0)
    cap = float(scenario.fronthaul_cap[0])
    # the rate cap binds with equality in exact arithmetic; trim round-off
    if t_g.sum() > cap:
        t_g *= cap / t_g.sum()
    fh_g = FronthaulAllocation(t_g[None, :])
    fh_u = FronthaulAllocation(t_u[None, :])
    obj_g = gaussian_sum_rate(scenario, power, fh_g)[1]
    obj_u = uniform_sum_rate(scenario, power, fh_u)[1]
    g_ref = SolveReport(power, fh_g, obj_g, [obj_g], 0, True,
                        meta={"solver": "gaussian_ref", "model": "gaussian"})
    u_ref = SolveReport(power, fh_u, obj_u, [obj_u], 0, True,
                        meta={"solver": "uniform_ref", "model": "uniform"})
    return g_ref, u_ref


# ---------------------------------------------------------------------------
# Uniform quantization
# ---------------------------------------------------------------------------

def _uniform_power_step(scenario: Scenario, t, p_start=None):
    g, s, _ = _channel(scenario)
    w = relative_quant_noise(t, scenario.sc_bandwidth, QuantModel.UNIFORM)
    p, _ = kern.solve_power(g[None, :], s[None, :], w[None, :],
                            np.zeros(scenario.num_subcarriers, dtype=int),
                            scenario.power_budget, p_start=p_start)
    return p


def _uniform_fronthaul_step(scenario: Scenario, p, t_current):
    _, _, a = _channel(scenario)
    scb = scenario.sc_bandwidth
    psi = kern.uniform_block(a * p, np.zeros_like(p), scenario.fronthaul_cap[0] / scb,
                             psi_current=np.exp2(t_current / scb))
    return np.log2(psi) * scb


def _equal_uniform_start(scenario: Scenario) -> np.ndarray:
    """Equal rates if each reaches one bit, else one bit on the strongest SCs."""
    _, _, a = _channel(scenario)
    n_sc = scenario.num_subcarriers
    budget_bits = float(scenario.fronthaul_cap[0]) / scenario.sc_bandwidth
    if budget_bits >= 2.0 * n_sc:
        c = np.full(n_sc, budget_bits / n_sc)
    else:
        c = np.zeros(n_sc)
        n_on = int(np.floor(budget_bits / 2.0 + 1e-9))
        c[np.argsort(-a, kind="stable")[:n_on]] = 2.0
    return c * scenario.sc_bandwidth


def _alternate_uniform(scenario: Scenario, p, t, eps, max_iter):
    def objective(p_, t_):
        return uniform_sum_rate(scenario, PowerAllocation(p_[None, :]),
                                FronthaulAllocation(t_[None, :]))[1]

    best = objective(p, t) if p is not None else -np.inf
    trace = [best] if p is not None else []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p_new = _uniform_power_step(scenario, t, p_start=p)
        if p is not None and objective(p_new, t) < objective(p, t):
            p_new = p
        t_new = _uniform_fronthaul_step(scenario, p_new, t)
        obj = objective(p_new, t_new)
        if obj < best:
            converged = True
            break
        p, t, prev, best = p_new, t_new, best, obj
        trace.append(obj)
        if _converged(obj, prev, eps):
            converged = True
            break
    return p, t, best, trace, it, converged


def _uniform_runs(scenario: Scenario, eps, max_iter, warm_start):
    if warm_start is None:
        warm_start = gap_reference_solutions(scenario)[1]
    runs = {
        "warm": _alternate_uniform(scenario, warm_start.power.p[0].copy(),
                                   warm_start.fronthaul.t[0].copy(), eps, max_iter),
        "equal": _alternate_uniform(scenario, None, _equal_uniform_start(scenario),
                                    eps, max_iter),
    }
    if np.any(_channel(scenario)[2] > 0) and scenario.power_budget[0] > 0:
        p_wf = water_filling(scenario).p[0]
        t_wf = _uniform_fronthaul_step(scenario, p_wf, _equal_uniform_start(scenario))
        runs["water-filling"] = _alternate_uniform(scenario, p_wf, t_wf, eps, max_iter)
    top = max(runs, key=lambda k: runs[k][2])
    if runs[top][0] is not None:
        runs["demoted"] = _demote(scenario, runs[top], eps, max_iter)
    return warm_start, runs


def _demote(scenario: Scenario, run, eps, max_iter, width: int = 4, finalists: int = 2):
    """Local search over which subcarriers sit at one bit or are switched off.

    Alternation stops where neither block can improve alone, typically with
    the rate spread evenly.  Moving bits and power off a weak subcarrier
    together can still pay, so each of the ``width`` weakest served
    subcarriers is tried at one bit per branch and at zero, with the freed
    bits spread over the rest.  Moves are ranked after a short alternation,
    the ``finalists`` best are run to convergence, and the best improving
    one is kept.  The search repeats until no move helps.
    """
    p, t, best, trace, it, converged = run
    scb = scenario.sc_bandwidth
    a = _channel(scenario)[2]
    trace = list(trace)
    while True:
        c = t / scb
        movable = np.flatnonzero(c > 2.0 + 1e-9)
        moves = []
        for j in movable[np.argsort(a[movable] * p[movable], kind="stable")][:width]:
            for target in (2.0, 0.0):
                rest = c > 0
                rest[j] = False
                if not rest.any():
                    continue
                c_new = c.copy()
                c_new[rest] += (c[j] - target) / rest.sum()
                c_new[j] = target
                short = _alternate_uniform(scenario, None, c_new * scb, eps, 2)
                it += short[4]
                if short[0] is not None:
                    moves.append((short[2], short))
        moves.sort(key=lambda mv: -mv[0])
        top = None
        for _, short in moves[:finalists]:
            cand = _alternate_uniform(scenario, short[0], short[1], eps, max_iter)
            it += cand[4]
            if cand[2] > best * (1 + 1e-9) and (top is None or cand[2] > top[2]):
                top = cand
        if top is None:
            return p, t, best, trace, it, converged
        p, t, best, converged = top[0], top[1], top[2], top[5]
        trace.append(best)


def _report(scenario, runs, which, warm_start, solver):
    p, t, best, trace, it, converged = runs[which]
    if p is None:
        p, trace = np.zeros(scenario.num_subcarriers), [0.0]
        best = 0.0
    return SolveReport(PowerAllocation(p[None, :]), FronthaulAllocation(t[None, :]),
                       best, trace, it, converged,
                       meta={"solver": solver, "model": "uniform",
                             "warm_start": warm_start.meta.get("solver", "custom"),
                             "selected_start": which,
                             "start_objectives_bps": {k: max(v[2], 0.0) for k, v in runs.items()}})


def solve_p2_noint_single(scenario: Scenario, eps: float = DEFAULT_EPS,
                          max_iter: int = DEFAULT_MAX_ITER,
                          warm_start: SolveReport | None = None) -> SolveReport:
    """Alternating optimization under uniform quantization, continuous rates.

    Served subcarriers are kept at one bit per branch or more
    (``t >= 2B/N``); below that the uniform noise law stops describing a real
    quantizer.  Alternation can stall on subcarriers that hold neither power
    nor rate, so it is run from several points: ``warm_start`` (default: the
    uniform gap reference), an equal split of the capacity, and water-filling
    power with its best fronthaul.  The best end point is returned, which is
    never worse than the warm start.
    """
    _require_single(scenario)
    if eps <= 0:
        raise ValueError("eps must be positive")
    warm_start, runs = _uniform_runs(scenario, eps, max_iter, warm_start)
    # warm wins ties so the warm-start guarantee is explicit
    which = max(runs, key=lambda k: (runs[k][2], k == "warm"))
    return _report(scenario, runs, which, warm_start, "p2_noint_single")


def _round_with(d_hat, alpha):
    base = np.floor(d_hat)
    frac = d_hat - base
    # a fraction exactly equal to alpha rounds down
    return (base + (frac > alpha)).astype(np.int64)


def round_row(d_hat, max_bits, iters: int = 60):
    """Integer bits for one RRH: threshold rounding with alpha bisected.

    Returns ``(bits, alpha)`` where alpha is the smallest threshold (to
    ``2^-iters``) whose rounding fits within ``max_bits``.
    """
    d_hat = np.asarray(d_hat, float)
    snapped = np.round(d_hat)
    # values within round-off of the grid are already integer
    d_hat = np.where(np.abs(d_hat - snapped) <= 1e-9 * np.maximum(1.0, snapped), snapped, d_hat)
    max_bits = np.floor(max_bits + 1e-9 * max(1.0, max_bits))

    def fits(alpha):
        return _round_with(d_hat, alpha).sum() <= max_bits

    if fits(0.0):
        return _round_with(d_hat, 0.0), 0.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fits(mid):
            hi = mid
        else:
            lo = mid
    return _round_with(d_hat, hi), hi


def round_bits(continuous: FronthaulAllocation, scenario: Scenario, p=None,
               iters: int = 60) -> FronthaulAllocation:
    """Round continuous rates onto the integer-bit grid within the capacity.

    Each ``D_n = N t_n / 2B`` is rounded up when its fractional part exceeds
    ``alpha`` and down otherwise; ``alpha`` is bisected on [0, 1] to the
    smallest value that fits.  ``p`` is accepted for interface symmetry: with
    the power fixed the rate is increasing in every ``D_n``, so the rounding
    does not need it.
    """
    t = np.atleast_2d(np.asarray(continuous.t, float))
    step = scenario.bit_rate_step
    bits, _ = round_row(t[0] / step, float(scenario.fronthaul_cap[0]) / step, iters)
    return FronthaulAllocation.from_bits(bits[None, :], scenario)


def solve_p2_single(scenario: Scenario, eps: float = DEFAULT_EPS,
                    max_iter: int = DEFAULT_MAX_ITER, integer: bool = True,
                    warm_start: SolveReport | None = None) -> SolveReport:
    """Uniform-quantizer problem: continuous solves, then integer rounding.

    Every start of :func:`solve_p2_noint_single` is rounded, the power is
    re-solved for the rounded bits when that helps, and the best integer
    point is kept.
    """
    if not integer:
        return solve_p2_noint_single(scenario, eps, max_iter, warm_start)
    _require_single(scenario)
    if eps <= 0:
        raise ValueError("eps must be positive")
    warm_start, runs = _uniform_runs(scenario, eps, max_iter, warm_start)
    rounded = {}
    for name, (p, t, *_rest) in runs.items():
        p = np.zeros(scenario.num_subcarriers) if p is None else p
        power = PowerAllocation(p[None, :])
        fh = round_bits(FronthaulAllocation(t[None, :]), scenario)
        obj = uniform_sum_rate(scenario, power, fh)[1]
        # the bits moved, so the power can be re-optimized for them
        p_new = PowerAllocation(_uniform_power_step(scenario, fh.t[0], p_start=p)[None, :])
        obj_new = uniform_sum_rate(scenario, p_new, fh)[1]
        rounded[name] = (power, fh, obj, obj) if obj_new <= obj else (p_new, fh, obj_new, obj)
    which = max(rounded, key=lambda k: (rounded[k][2], k == "warm"))
    cont = _report(scenario, runs, which, warm_start, "p2_single")
    return _integer_report(cont, *rounded[which])


def _integer_report(cont: SolveReport, power, fh, obj, rounded_obj) -> SolveReport:
    cont.meta["continuous_objective_bps"] = cont.objective_bps
    cont.meta["rounded_objective_bps"] = rounded_obj
    cont.meta["power_resolved"] = obj > rounded_obj
    # the trace ends with the rounded point, which may sit below the one before,
    # then the power re-solve at the rounded bits when it helped
    cont.meta["trace_ends_with_rounding"] = True
    tail = [rounded_obj, obj] if obj > rounded_obj else [obj]
    return SolveReport(power, fh, obj, list(cont.objective_trace) + tail, cont.iterations,
                       cont.converged, meta=cont.meta)
