"""Solvers for K users and M RRHs.

Fronthaul rates are handled through ``psi``: for the Gaussian test channel
``psi = 2^{N t / B} - 1`` and the per-RRH SNR term becomes
``X psi / (psi + X + 1)``, concave in ``psi``.  The load constraint
``(B/N) sum_n log2(1 + psi)`` is concave too, so it is replaced by its tangent
at the previous iterate (an upper bound) and the resulting convex problem is
solved RRH by RRH.  Once those tangent steps stall, exact per-RRH block
steps (see :func:`cranopt._kernels.exact_block`) continue the ascent.

Under uniform quantization (``psi = 2^{N t / B}``) the same alternating scheme
runs directly on ``c = log2 psi``, where the load constraint is linear and each
RRH's block is solved by the same exact kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as kern
from .model import (
    FEAS_TOL,
    FronthaulAllocation,
    PowerAllocation,
    QuantModel,
    Scenario,
    SolveReport,
    gaussian_sum_rate,
    relative_quant_noise,
    sum_rate,
    uniform_sum_rate,
)
from .single_link import DEFAULT_EPS, DEFAULT_MAX_ITER, _integer_report, _wf_powers, round_row

__all__ = [
    "PsiAllocation",
    "water_filling_multi",
    "per_user_water_filling",
    "power_subproblem",
    "fronthaul_sca_subproblem",
    "fronthaul_given_power_multi",
    "algorithm_three",
    "solve_p2_noint_multi",
    "round_bits_multi",
    "solve_p2_multi",
]

_BCD_PASSES = 100
_BCD_TOL = 1e-12
_PSI_MAX = float(kern.gaussian_psi_from_c(kern.GAUSSIAN_MAX_C))


@dataclass(frozen=True, eq=False)
class PsiAllocation:
    """Fronthaul rates in the ``psi`` parametrization, shape (M, N)."""

    psi: np.ndarray
    model: QuantModel = QuantModel.GAUSSIAN

    def __post_init__(self):
        psi = np.array(self.psi, dtype=float)
        if psi.ndim != 2:
            raise ValueError("psi must have shape (M, N)")
        floor = 0.0 if self.model is QuantModel.GAUSSIAN else 1.0
        if np.any(psi < floor) or np.any(np.isnan(psi)):
            raise ValueError(f"psi must be >= {floor} under the {self.model.value} model")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    def to_fronthaul(self, scenario: Scenario) -> FronthaulAllocation:
        if self.model is QuantModel.GAUSSIAN:
            c = kern.gaussian_c_from_psi(self.psi)
        else:
            c = np.log2(self.psi)
        return FronthaulAllocation(c * scenario.sc_bandwidth)

    @classmethod
    def from_fronthaul(cls, fronthaul: FronthaulAllocation, scenario: Scenario,
                       model: QuantModel = QuantModel.GAUSSIAN) -> "PsiAllocation":
        c = fronthaul.t / scenario.sc_bandwidth
        if model is QuantModel.GAUSSIAN:
            return cls(kern.gaussian_psi_from_c(c), model)
        return cls(np.exp2(c), model)


def _snr(scenario: Scenario, p_sc) -> np.ndarray:
    """Received SNR X[m, n] of the owner of each subcarrier."""
    s = scenario.noise_var
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, scenario.owner_gain() * p_sc[None, :] / s, 0.0)


def _mrc_gain(scenario: Scenario) -> np.ndarray:
    """Sum over RRHs of |h|^2 / sigma^2 for each subcarrier's owner."""
    s = scenario.noise_var
    return np.where(s > 0, scenario.owner_gain() / np.where(s > 0, s, 1.0), 0.0).sum(axis=0)


def per_user_water_filling(scenario: Scenario, a_sc) -> np.ndarray:
    """Water-fill each user's budget over its own subcarriers with SNR gains ``a_sc``."""
    p = np.zeros(scenario.num_subcarriers)
    for k in range(scenario.num_users):
        idx = scenario.subcarriers_of(k)
        if idx.size and np.any(a_sc[idx] > 0) and scenario.power_budget[k] > 0:
            p[idx] = _wf_powers(a_sc[idx], float(scenario.power_budget[k]))
    return p


def water_filling_multi(scenario: Scenario) -> PowerAllocation:
    """Per-user water-filling on the unquantized MRC gain, ignoring fronthaul."""
    return PowerAllocation.from_per_subcarrier(
        per_user_water_filling(scenario, _mrc_gain(scenario)), scenario)


def _power_step(scenario: Scenario, t, model: QuantModel, p_start=None):
    w = relative_quant_noise(t, scenario.sc_bandwidth, model)
    p, lam = kern.solve_power(scenario.owner_gain(), scenario.noise_var, w,
                              scenario.sc_owner, scenario.power_budget, p_start=p_start)
    return p, lam


def power_subproblem(scenario: Scenario, psi_hat, model: QuantModel = QuantModel.GAUSSIAN,
                     *, full_output: bool = False):
    """Optimal power for fixed fronthaul rates (given as ``psi``).

    Each user's budget is priced by its own dual variable; the per-subcarrier
    problems are concave and solved by safeguarded Newton steps.  With
    ``full_output`` the per-user prices (nats per watt) are returned too.
    """
    psi = psi_hat if isinstance(psi_hat, PsiAllocation) else PsiAllocation(psi_hat, model)
    t = psi.to_fronthaul(scenario).t
    p, lam = _power_step(scenario, t, psi.model)
    power = PowerAllocation.from_per_subcarrier(p, scenario)
    return (power, lam) if full_output else power


def _gauss_phi(snr, psi):
    return kern.phi_psi(snr, psi, 1.0)


def _gauss_objective(snr, psi):
    return float(np.sum(np.log1p(_gauss_phi(snr, psi).sum(axis=0))))


def _gauss_load_bits(psi):
    return np.log1p(psi).sum(axis=1) / kern.LN2


def fronthaul_sca_subproblem(scenario: Scenario, p_hat, psi_tilde) -> PsiAllocation:
    """One convexified fronthaul step around ``psi_tilde`` (Gaussian model).

    Block-coordinate ascent over the RRHs, each block solved exactly, until
    the objective stalls.  The result satisfies the true load constraints and
    is never worse than ``psi_tilde``.

    Raises
    ------
    ValueError
        If ``psi_tilde`` violates a fronthaul constraint.
    """
    p_sc = p_hat.per_subcarrier() if isinstance(p_hat, PowerAllocation) else np.asarray(p_hat, float)
    psi_t = psi_tilde.psi if isinstance(psi_tilde, PsiAllocation) else np.asarray(psi_tilde, float)
    snr = _snr(scenario, p_sc)
    budget_bits = scenario.fronthaul_cap / scenario.sc_bandwidth
    load = _gauss_load_bits(psi_t)
    if np.any(load > budget_bits * (1 + FEAS_TOL) + 1e-12):
        raise ValueError("psi_tilde violates the fronthaul constraint")

    psi = psi_t.copy()
    phi = _gauss_phi(snr, psi)
    obj = _gauss_objective(snr, psi)
    start_obj = obj
    for _ in range(_BCD_PASSES):
        before = obj
        for m in range(scenario.num_rrhs):
            other = phi.sum(axis=0) - phi[m]
            new_m, _ = kern.gaussian_sca_block(snr[m], other, psi_t[m], budget_bits[m] * kern.LN2)
            new_m = np.minimum(new_m, _PSI_MAX)
            phi_m = _gauss_phi(snr[m], new_m)
            if np.sum(np.log1p(other + phi_m)) >= np.sum(np.log1p(other + phi[m])):
                psi[m], phi[m] = new_m, phi_m
        obj = _gauss_objective(snr, psi)
        if obj - before <= _BCD_TOL * max(abs(obj), 1e-300):
            break

    load = _gauss_load_bits(psi)
    over = load > budget_bits * (1 + FEAS_TOL) + 1e-12
    if np.any(over):
        raise RuntimeError("tangent step left the true fronthaul region")
    if obj < start_obj:
        psi = psi_t.copy()
    return PsiAllocation(psi, QuantModel.GAUSSIAN)


def _initial_uniform_c(scenario: Scenario, p_sc=None) -> np.ndarray:
    """Equal split when it reaches one bit, else one bit on the strongest SCs."""
    n_sc = scenario.num_subcarriers
    budget_bits = scenario.fronthaul_cap / scenario.sc_bandwidth
    c = np.zeros((scenario.num_rrhs, n_sc))
    strength = scenario.owner_gain() / np.where(scenario.noise_var > 0, scenario.noise_var, np.inf)
    if p_sc is not None:
        strength = strength * p_sc[None, :]
    for m in range(scenario.num_rrhs):
        if budget_bits[m] >= 2.0 * n_sc:
            c[m] = budget_bits[m] / n_sc
        else:
            n_on = int(np.floor(budget_bits[m] / 2.0 + 1e-9))
            best = np.argsort(-strength[m], kind="stable")[:n_on]
            c[m, best] = 2.0
    return c


def _exact_fronthaul_step(scenario: Scenario, p_sc, psi, form: str):
    """Block-coordinate ascent over RRHs, each block solved by the exact kernel."""
    k = 1.0 if form == "gaussian" else 3.0
    snr = _snr(scenario, p_sc)
    budget_bits = scenario.fronthaul_cap / scenario.sc_bandwidth
    psi = psi.copy()
    phi = kern.phi_psi(snr, psi, k)
    if form == "uniform":
        phi = np.where(psi > 1.0, phi, 0.0)
    obj = float(np.sum(np.log1p(phi.sum(axis=0))))
    for _ in range(_BCD_PASSES):
        before = obj
        for m in range(scenario.num_rrhs):
            other = phi.sum(axis=0) - phi[m]
            psi[m] = np.minimum(kern.exact_block(snr[m], other, budget_bits[m], form,
                                                 psi_current=psi[m]), _PSI_MAX)
            phi[m] = kern.phi_psi(snr[m], psi[m], k)
            if form == "uniform":
                phi[m] = np.where(psi[m] > 1.0, phi[m], 0.0)
        obj = float(np.sum(np.log1p(phi.sum(axis=0))))
        if obj - before <= _BCD_TOL * max(abs(obj), 1e-300):
            break
    return psi


def _uniform_fronthaul_step(scenario: Scenario, p_sc, c):
    return np.log2(_exact_fronthaul_step(scenario, p_sc, np.exp2(c), "uniform"))


def fronthaul_given_power_multi(scenario: Scenario, power: PowerAllocation,
                                model: QuantModel = QuantModel.GAUSSIAN,
                                eps: float = DEFAULT_EPS,
                                max_iter: int = DEFAULT_MAX_ITER) -> FronthaulAllocation:
    """Best fronthaul rates for a fixed power allocation.

    Gaussian: repeated tangent steps from the equal split, then exact block
    steps.  Uniform: exact block steps from :func:`_initial_uniform_c`
    (continuous rates).
    """
    p_sc = power.per_subcarrier()
    if model is QuantModel.UNIFORM:
        c = _uniform_fronthaul_step(scenario, p_sc, _initial_uniform_c(scenario, p_sc))
        return FronthaulAllocation(c * scenario.sc_bandwidth)
    snr = _snr(scenario, p_sc)
    psi = _equal_psi(scenario)
    obj = _gauss_objective(snr, psi)
    for _ in range(max_iter):
        psi = fronthaul_sca_subproblem(scenario, p_sc, psi).psi
        new = _gauss_objective(snr, psi)
        if new - obj <= eps * max(abs(new), 1e-300):
            break
        obj = new
    psi = _exact_fronthaul_step(scenario, p_sc, psi, "gaussian")
    return PsiAllocation(psi).to_fronthaul(scenario)


def _equal_psi(scenario: Scenario) -> np.ndarray:
    c = scenario.fronthaul_cap / scenario.bandwidth_hz
    return np.repeat(kern.gaussian_psi_from_c(c)[:, None], scenario.num_subcarriers, axis=1)


def _alternate_gaussian(scenario: Scenario, psi, p, eps, max_iter, refine):
    trace: list[float] = []
    best = -np.inf if p is None else _gauss_objective(_snr(scenario, p), psi)
    converged = False
    it = 0
    phases = ("sca", "exact") if refine else ("sca",)
    phase_iters = {}
    for phase in phases:
        phase_conv = False
        for _ in range(max_iter - it):
            it += 1
            t = PsiAllocation(psi).to_fronthaul(scenario).t
            p_new, _ = _power_step(scenario, t, QuantModel.GAUSSIAN, p_start=p)
            if p is not None and _gauss_objective(_snr(scenario, p_new), psi) < \
                    _gauss_objective(_snr(scenario, p), psi):
                p_new = p
            if phase == "sca":
                psi_new = fronthaul_sca_subproblem(scenario, p_new, psi).psi
            else:
                psi_new = _exact_fronthaul_step(scenario, p_new, psi, "gaussian")
            obj = _gauss_objective(_snr(scenario, p_new), psi_new)
            if obj < best:
                it -= 1
                phase_conv = True
                break
            prev, best = best, obj
            p, psi = p_new, psi_new
            trace.append(_rate_bps(scenario, p, PsiAllocation(psi).to_fronthaul(scenario),
                                   QuantModel.GAUSSIAN))
            if obj - prev <= eps * max(abs(obj), 1e-300):
                phase_conv = True
                break
        phase_iters[phase] = it - sum(phase_iters.values())
        converged = phase_conv
    if p is None:
        p = np.zeros(scenario.num_subcarriers)
    # keep the trace non-decreasing when the bit/s evaluation rounds down
    trace = [float(v) for v in np.maximum.accumulate(trace)] if trace else [0.0]
    return p, psi, trace, it, converged, phase_iters


def algorithm_three(scenario: Scenario, eps: float = DEFAULT_EPS,
                    max_iter: int = DEFAULT_MAX_ITER, refine: bool = True,
                    starts: tuple[str, ...] = ("equal", "water-filling")) -> SolveReport:
    """Alternate the power step and tangent fronthaul steps (Gaussian model).

    The ``"equal"`` start is the equal split ``psi = 2^{T_m / B} - 1``; the
    ``"water-filling"`` start uses per-user water-filling power and the best
    fronthaul for it.  Each start is run separately and the better end point
    is returned along with its trace.

    With several RRHs the rate of one RRH is sigmoidal in its bit count and
    the tangent steps tend to settle on evenly spread bits.  With ``refine``
    the alternation continues after convergence using exact per-RRH block
    steps, which can switch subcarriers off on an RRH.  Every accepted step
    is an ascent step, so each trace is non-decreasing.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    runs = {}
    for name in starts:
        if name == "equal":
            psi0, p0 = _equal_psi(scenario), None
        elif name == "water-filling":
            power = water_filling_multi(scenario)
            fh = fronthaul_given_power_multi(scenario, power, QuantModel.GAUSSIAN, eps, max_iter)
            psi0 = PsiAllocation.from_fronthaul(fh, scenario).psi
            p0 = power.per_subcarrier()
        else:
            raise ValueError(f"unknown start {name!r}")
        runs[name] = _alternate_gaussian(scenario, psi0, p0, eps, max_iter, refine)

    def score(name):
        p, psi = runs[name][:2]
        return _rate_bps(scenario, p, PsiAllocation(psi).to_fronthaul(scenario),
                         QuantModel.GAUSSIAN)

    which = max(runs, key=score)
    p, psi, trace, it, converged, phase_iters = runs[which]
    power = PowerAllocation.from_per_subcarrier(p, scenario)
    fh = PsiAllocation(psi).to_fronthaul(scenario)
    obj_bps = max(gaussian_sum_rate(scenario, power, fh)[1], trace[-1])
    return SolveReport(power, fh, obj_bps, trace, it, converged,
                       meta={"solver": "algorithm_three", "model": "gaussian",
                             "phase_iterations": phase_iters, "selected_start": which,
                             "start_objectives_bps": {k: score(k) for k in runs}})


def _rate_bps(scenario, p_sc, fh, model):
    return sum_rate(scenario, PowerAllocation.from_per_subcarrier(p_sc, scenario), fh, model)


def _alternate_uniform(scenario: Scenario, c, p, eps, max_iter):
    scb = scenario.sc_bandwidth

    def rate(p_sc, c_):
        return _rate_bps(scenario, p_sc, FronthaulAllocation(c_ * scb), QuantModel.UNIFORM)

    best = -np.inf if p is None else rate(p, c)
    trace: list[float] = [] if p is None else [best]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p_new, _ = _power_step(scenario, c * scb, QuantModel.UNIFORM, p_start=p)
        if p is not None and rate(p_new, c) < rate(p, c):
            p_new = p
        c_new = _uniform_fronthaul_step(scenario, p_new, c)
        obj = rate(p_new, c_new)
        if obj < best:
            converged = True
            it -= 1
            break
        prev, best = best, obj
        p, c = p_new, c_new
        trace.append(obj)
        if obj - prev <= eps * max(abs(obj), 1e-300):
            converged = True
            break
    if p is None:
        p, best, trace = np.zeros(scenario.num_subcarriers), 0.0, [0.0]
    return p, c, best, trace, it, converged


def _uniform_runs(scenario: Scenario, eps, max_iter, starts, demote_width=4):
    runs = {}
    for name in starts:
        if name == "equal":
            c0, p0 = _initial_uniform_c(scenario), None
        elif name == "water-filling":
            power = water_filling_multi(scenario)
            p0 = power.per_subcarrier()
            c0 = _uniform_fronthaul_step(scenario, p0, _initial_uniform_c(scenario, p0))
        else:
            raise ValueError(f"unknown start {name!r}")
        runs[name] = _alternate_uniform(scenario, c0, p0, eps, max_iter)
    top = max(runs, key=lambda k: runs[k][2])
    if demote_width > 0 and np.any(runs[top][1] > 0):
        runs["demoted"] = _demote(scenario, runs[top], eps, max_iter, demote_width)
    return runs


def _demote(scenario: Scenario, run, eps, max_iter, width, finalists: int = 2):
    """Local search over which (RRH, subcarrier) pairs sit at one bit or at zero.

    Same move set as the single-link search: each of the ``width`` weakest
    pairs above one bit is tried at one bit and at zero, with the freed bits
    spread over that RRH's other served subcarriers.  Moves are ranked after
    a short alternation, the ``finalists`` best are run to convergence, and
    the best improving one is kept until none helps.
    """
    p, c, best, trace, it, converged = run
    trace = list(trace)
    while True:
        x = _snr(scenario, p)
        rows, cols = np.nonzero(c > 2.0 + 1e-9)
        order = np.argsort(x[rows, cols], kind="stable")[:width]
        moves = []
        for m, j in zip(rows[order], cols[order]):
            for target in (2.0, 0.0):
                rest = c[m] > 0
                rest[j] = False
                if not rest.any():
                    continue
                c_new = c.copy()
                c_new[m, rest] += (c[m, j] - target) / rest.sum()
                c_new[m, j] = target
                short = _alternate_uniform(scenario, c_new, None, eps, 2)
                it += short[4]
                moves.append((short[2], short))
        moves.sort(key=lambda mv: -mv[0])
        top = None
        for _, short in moves[:finalists]:
            cand = _alternate_uniform(scenario, short[1], short[0], eps, max_iter)
            it += cand[4]
            if cand[2] > best * (1 + 1e-9) and (top is None or cand[2] > top[2]):
                top = cand
        if top is None:
            return p, c, best, trace, it, converged
        p, c, best, converged = top[0], top[1], top[2], top[5]
        trace.append(best)


def _uniform_report(scenario, run, which, runs, solver):
    p, c, best, trace, it, converged = run
    return SolveReport(PowerAllocation.from_per_subcarrier(p, scenario),
                       FronthaulAllocation(c * scenario.sc_bandwidth), best, trace, it,
                       converged, meta={"solver": solver, "model": "uniform",
                                        "selected_start": which,
                                        "start_objectives_bps": {k: v[2] for k, v in runs.items()}})


def solve_p2_noint_multi(scenario: Scenario, eps: float = DEFAULT_EPS,
                         max_iter: int = DEFAULT_MAX_ITER,
                         starts: tuple[str, ...] = ("equal", "water-filling"),
                         demote_width: int = 4) -> SolveReport:
    """Continuous-rate alternation under uniform quantization.

    Served (RRH, subcarrier) pairs keep at least one bit per branch.  Starts
    are as in :func:`algorithm_three`; the equal start gives every subcarrier
    ``T_m / B`` bits, or one bit to the strongest ones when that is below one
    bit each.  The best end point is then improved by a local search that
    moves weak pairs to one bit or to zero (``demote_width`` pairs per round,
    0 disables it).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    runs = _uniform_runs(scenario, eps, max_iter, starts, demote_width)
    which = max(runs, key=lambda k: runs[k][2])
    return _uniform_report(scenario, runs[which], which, runs, "p2_noint_multi")


def round_bits_multi(continuous: FronthaulAllocation, scenario: Scenario) -> FronthaulAllocation:
    """Per-RRH threshold rounding, RRH 1 to M, each with its own alpha."""
    step = scenario.bit_rate_step
    bits = np.zeros(continuous.t.shape, dtype=np.int64)
    for m in range(scenario.num_rrhs):
        bits[m], _ = round_row(continuous.t[m] / step, float(scenario.fronthaul_cap[m]) / step)
    return FronthaulAllocation.from_bits(bits, scenario)


def solve_p2_multi(scenario: Scenario, eps: float = DEFAULT_EPS,
                   max_iter: int = DEFAULT_MAX_ITER, integer: bool = True,
                   starts: tuple[str, ...] = ("equal", "water-filling"),
                   demote_width: int = 4) -> SolveReport:
    """Uniform-quantizer problem: continuous stage, then per-RRH rounding.

    Every start is rounded, the power is re-solved for the rounded bits when
    that helps, and the best integer point is kept.
    """
    if not integer:
        return solve_p2_noint_multi(scenario, eps, max_iter, starts, demote_width)
    if eps <= 0:
        raise ValueError("eps must be positive")
    runs = _uniform_runs(scenario, eps, max_iter, starts, demote_width)
    rounded = {}
    for name, run in runs.items():
        power = PowerAllocation.from_per_subcarrier(run[0], scenario)
        fh = round_bits_multi(FronthaulAllocation(run[1] * scenario.sc_bandwidth), scenario)
        obj = uniform_sum_rate(scenario, power, fh)[1]
        p_new, _ = _power_step(scenario, fh.t, QuantModel.UNIFORM, p_start=run[0])
        p_new = PowerAllocation.from_per_subcarrier(p_new, scenario)
        obj_new = uniform_sum_rate(scenario, p_new, fh)[1]
        rounded[name] = (power, fh, obj, obj) if obj_new <= obj else (p_new, fh, obj_new, obj)
    which = max(rounded, key=lambda k: rounded[k][2])
    cont = _uniform_report(scenario, runs[which], which, runs, "p2_multi")
    return _integer_report(cont, *rounded[which])
