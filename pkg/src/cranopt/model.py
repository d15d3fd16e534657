"""Domain types and the analytic SNR / rate / fronthaul-load laws.

All quantities are SI internally: Hz, watts, bit/s.  Arrays follow a fixed
axis convention::

    channel_gain_sq  (M, K, N)   |h_{m,k,n}|^2
    noise_var        (M, N)      sigma^2_{m,n}
    power            (K, N)      p_{k,n}   (zero off the user's subcarriers)
    fronthaul        (M, N)      T_{m,n}

Subcarrier owners are stored zero-based (``sc_owner[n] in 0..K-1``); the JSON
scenario format in :mod:`cranopt.harness` uses one-based user ids.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "FEAS_TOL",
    "QuantModel",
    "Scenario",
    "PowerAllocation",
    "FronthaulAllocation",
    "SolveReport",
    "Violation",
    "ScenarioError",
    "InfiniteLoadError",
    "mrc_weights",
    "snr_with_weights",
    "snr_post_mrc",
    "relative_quant_noise",
    "mrc_snr_terms",
    "per_sc_rates",
    "gaussian_sum_rate",
    "uniform_sum_rate",
    "sum_rate",
    "gaussian_noise_for_rate",
    "gaussian_fronthaul_load",
    "uniform_fronthaul_load",
    "check_feasible",
]

# Relative slack for budget / capacity checks.
FEAS_TOL = 1e-9


class ScenarioError(ValueError):
    """Invalid or inconsistent problem data."""


class InfiniteLoadError(ArithmeticError):
    """Zero quantization noise on a carrying subcarrier needs infinite rate."""


class QuantModel(enum.Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Scenario:
    """One uplink OFDMA C-RAN instance.

    Attributes
    ----------
    bandwidth_hz : float
        Total bandwidth B, split equally over the N subcarriers.
    channel_gain_sq : ndarray, shape (M, K, N)
        Power gains |h_{m,k,n}|^2.
    noise_var : ndarray, shape (M, N)
        Noise-plus-interference power per RRH and subcarrier (W).
    power_budget : ndarray, shape (K,)
        Per-user transmit power budgets (W).
    fronthaul_cap : ndarray, shape (M,)
        Per-RRH fronthaul capacities (bit/s).
    sc_owner : ndarray, shape (N,)
        Zero-based owning user of each subcarrier.
    distance_m : ndarray, shape (M, K), optional
        RRH-user distances when the scenario came from a geometry.
    """

    bandwidth_hz: float
    channel_gain_sq: np.ndarray
    noise_var: np.ndarray
    power_budget: np.ndarray
    fronthaul_cap: np.ndarray
    sc_owner: np.ndarray
    distance_m: np.ndarray | None = None

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("bandwidth_hz", float(self.bandwidth_hz))
        set_("channel_gain_sq", _frozen(self.channel_gain_sq))
        set_("noise_var", _frozen(self.noise_var))
        set_("power_budget", _frozen(np.atleast_1d(self.power_budget)))
        set_("fronthaul_cap", _frozen(np.atleast_1d(self.fronthaul_cap)))
        set_("sc_owner", _frozen(np.atleast_1d(self.sc_owner), dtype=np.int64))
        if self.distance_m is not None:
            set_("distance_m", _frozen(self.distance_m))

        if not self.bandwidth_hz > 0:
            raise ScenarioError("bandwidth must be positive")
        if self.channel_gain_sq.ndim != 3:
            raise ScenarioError("channel_gain_sq must have shape (M, K, N)")
        m, k, n = self.channel_gain_sq.shape
        if n < 1 or m < 1 or k < 1:
            raise ScenarioError("need at least one RRH, user and subcarrier")
        expected = {
            "noise_var": (m, n),
            "power_budget": (k,),
            "fronthaul_cap": (m,),
            "sc_owner": (n,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ScenarioError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.distance_m is not None and self.distance_m.shape != (m, k):
            raise ScenarioError("distance_m must have shape (M, K)")
        for name in ("channel_gain_sq", "noise_var", "power_budget", "fronthaul_cap"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ScenarioError(f"{name} must be finite and nonnegative")
        if np.any(self.sc_owner < 0) or np.any(self.sc_owner >= k):
            raise ScenarioError("sc_owner entries must lie in 0..K-1")

    @property
    def num_rrhs(self) -> int:
        return self.channel_gain_sq.shape[0]

    @property
    def num_users(self) -> int:
        return self.channel_gain_sq.shape[1]

    @property
    def num_subcarriers(self) -> int:
        return self.channel_gain_sq.shape[2]

    @property
    def sc_bandwidth(self) -> float:
        return self.bandwidth_hz / self.num_subcarriers

    @property
    def bit_rate_step(self) -> float:
        """Fronthaul rate of one quantization bit on one subcarrier, 2B/N."""
        return 2.0 * self.sc_bandwidth

    @property
    def is_single_link(self) -> bool:
        return self.num_rrhs == 1 and self.num_users == 1

    def owner_gain(self) -> np.ndarray:
        """|h_{m,k(n),n}|^2 for the owner k(n) of each subcarrier, shape (M, N)."""
        n = np.arange(self.num_subcarriers)
        return self.channel_gain_sq[:, self.sc_owner, n]

    def subcarriers_of(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.sc_owner == k)

    def owner_mask(self) -> np.ndarray:
        """Boolean (K, N) mask, True where user k owns subcarrier n."""
        return self.sc_owner[None, :] == np.arange(self.num_users)[:, None]

    def with_fronthaul(self, cap) -> "Scenario":
        cap = np.broadcast_to(np.asarray(cap, dtype=float), (self.num_rrhs,))
        return dataclasses.replace(self, fronthaul_cap=cap)


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """Transmit powers p[k, n] in watts (zero unless user k owns n)."""

    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen(self.p))
        if self.p.ndim != 2:
            raise ScenarioError("power must have shape (K, N)")
        if np.any(self.p < 0) or not np.all(np.isfinite(self.p)):
            raise ScenarioError("powers must be finite and nonnegative")

    @classmethod
    def from_per_subcarrier(cls, p_sc, scenario: Scenario) -> "PowerAllocation":
        p_sc = np.asarray(p_sc, dtype=float)
        p = np.where(scenario.owner_mask(), p_sc[None, :], 0.0)
        return cls(p)

    @classmethod
    def zeros(cls, scenario: Scenario) -> "PowerAllocation":
        return cls(np.zeros((scenario.num_users, scenario.num_subcarriers)))

    def per_subcarrier(self) -> np.ndarray:
        return self.p.sum(axis=0)


@dataclass(frozen=True, eq=False)
class FronthaulAllocation:
    """Per-(RRH, subcarrier) fronthaul rates in bit/s.

    When ``bits`` is given the allocation lives on the integer grid of the
    uniform quantizer and ``t`` is derived as ``2 B bits / N``.
    """

    t: np.ndarray
    bits: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t))
        if self.t.ndim != 2:
            raise ScenarioError("fronthaul rates must have shape (M, N)")
        if np.any(self.t < 0) or np.any(np.isnan(self.t)):
            raise ScenarioError("fronthaul rates must be nonnegative")
        if self.bits is not None:
            bits = np.asarray(self.bits)
            if bits.shape != self.t.shape:
                raise ScenarioError("bits and t shapes differ")
            if np.any(bits != np.round(bits)) or np.any(bits < 0):
                raise ScenarioError("bit counts must be nonnegative integers")
            object.__setattr__(self, "bits", _frozen(bits, dtype=np.int64))

    @property
    def integer_bits(self) -> bool:
        return self.bits is not None

    @classmethod
    def from_bits(cls, bits, scenario: Scenario) -> "FronthaulAllocation":
        bits = np.asarray(bits)
        return cls(bits * scenario.bit_rate_step, bits)

    @classmethod
    def zeros(cls, scenario: Scenario) -> "FronthaulAllocation":
        return cls(np.zeros((scenario.num_rrhs, scenario.num_subcarriers)))

    def load(self) -> np.ndarray:
        return self.t.sum(axis=1)


@dataclass
class SolveReport:
    """Output of any solver or benchmark run."""

    power: PowerAllocation
    fronthaul: FronthaulAllocation
    objective_bps: float
    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    meta: dict[str, Any] = field(default_factory=dict)

    def spectral_efficiency(self, scenario: Scenario) -> float:
        return self.objective_bps / scenario.bandwidth_hz

    def to_dict(self) -> dict[str, Any]:
        out = {
            "objective_bps": self.objective_bps,
            "objective_trace": list(map(float, self.objective_trace)),
            "iterations": self.iterations,
            "converged": self.converged,
            "power_w": self.power.p.tolist(),
            "fronthaul_bps": self.fronthaul.t.tolist(),
            "integer_bits": self.fronthaul.integer_bits,
            "meta": _jsonable(self.meta),
        }
        if self.fronthaul.integer_bits:
            out["bits"] = self.fronthaul.bits.tolist()
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


# ---------------------------------------------------------------------------
# SNR after maximal-ratio combining
# ---------------------------------------------------------------------------

def _owner_column(scenario: Scenario, n: int) -> int:
    if not 0 <= n < scenario.num_subcarriers:
        raise IndexError(f"subcarrier {n} out of range")
    return int(scenario.sc_owner[n])


def mrc_weights(scenario: Scenario, noise_q, n: int) -> np.ndarray:
    """Combining vector (diag(sigma^2) + diag(q))^-1 h for subcarrier ``n``.

    Channels are stored as power gains, so h is taken real and nonnegative;
    the SNR is phase invariant.
    """
    k = _owner_column(scenario, n)
    q = np.asarray(noise_q, dtype=float)[:, n]
    h = np.sqrt(scenario.channel_gain_sq[:, k, n])
    return h / (scenario.noise_var[:, n] + q)


def snr_with_weights(scenario: Scenario, power: PowerAllocation, noise_q,
                     n: int, weights) -> float:
    """SNR of an arbitrary linear combiner ``weights`` on subcarrier ``n``."""
    k = _owner_column(scenario, n)
    w = np.asarray(weights, dtype=complex)
    h = np.sqrt(scenario.channel_gain_sq[:, k, n])
    q = np.asarray(noise_q, dtype=float)[:, n]
    num = power.p[k, n] * abs(np.vdot(w, h)) ** 2
    den = np.real(np.vdot(w, (scenario.noise_var[:, n] + q) * w))
    return float(num / den) if den > 0 else 0.0


def snr_post_mrc(scenario: Scenario, power: PowerAllocation, noise_q, n: int) -> float:
    """gamma_{k,n} = sum_m |h|^2 p / (sigma^2 + q) for the owner k of ``n``."""
    k = _owner_column(scenario, n)
    q = np.asarray(noise_q, dtype=float)
    if q.shape != scenario.noise_var.shape:
        raise ScenarioError("noise_q must have shape (M, N)")
    if np.any(q[:, n] < 0):
        raise ScenarioError("quantization noise must be nonnegative")
    x = scenario.channel_gain_sq[:, k, n] * power.p[k, n]
    den = scenario.noise_var[:, n] + q[:, n]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(x > 0, x / den, 0.0)
    return float(terms.sum())


# ---------------------------------------------------------------------------
# Rate laws.  Both quantization models give q = w * (|h|^2 p + sigma^2) with a
# relative noise w that depends only on the fronthaul rate:
#   Gaussian test channel  w = 1 / (2^{N t / B} - 1)
#   uniform quantizer      w = 3 * 2^{-N t / B}
# and w = inf (no contribution) when t = 0.
# ---------------------------------------------------------------------------

def relative_quant_noise(t, sc_bandwidth: float, model: QuantModel) -> np.ndarray:
    """Quantization noise relative to the received power for rates ``t``."""
    t = np.asarray(t, dtype=float)
    c = t / sc_bandwidth
    with np.errstate(divide="ignore", over="ignore"):
        if model is QuantModel.GAUSSIAN:
            # 1 / (2^c - 1) written to stay finite for large c
            w = np.exp2(-c) / -np.expm1(-c * np.log(2.0))
        else:
            w = 3.0 * np.exp2(-c)
    return np.where(t > 0, w, np.inf)


def mrc_snr_terms(x, s, w) -> np.ndarray:
    """Per-RRH SNR contributions x / (s + w (x + s)); zero where w is inf."""
    x, s, w = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, s, w)))
    off = np.isinf(w) | (x <= 0)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        out = x / (s + np.where(off, 0.0, w) * (x + s))
    return np.where(off, 0.0, out)


def per_sc_rates(scenario: Scenario, power: PowerAllocation, t,
                 model: QuantModel) -> np.ndarray:
    """End-to-end rate of each subcarrier in bit/s."""
    t = np.asarray(t, dtype=float)
    x = scenario.owner_gain() * power.per_subcarrier()[None, :]
    w = relative_quant_noise(t, scenario.sc_bandwidth, model)
    gamma = mrc_snr_terms(x, scenario.noise_var, w).sum(axis=0)
    return scenario.sc_bandwidth * np.log2(1.0 + gamma)


def gaussian_sum_rate(scenario: Scenario, power: PowerAllocation,
                      fronthaul: FronthaulAllocation):
    """Per-subcarrier rates and their total under the Gaussian test channel."""
    r = per_sc_rates(scenario, power, fronthaul.t, QuantModel.GAUSSIAN)
    return r, float(r.sum())


def uniform_sum_rate(scenario: Scenario, power: PowerAllocation,
                     fronthaul: FronthaulAllocation):
    """Per-subcarrier rates and their total under uniform scalar quantization.

    Integer allocations use q = 3 S 2^{-2D}; D = 0 contributes nothing.
    Continuous allocations (the relaxation without integer bits) apply the
    same law with 2D replaced by N t / B, and t = 0 again contributes nothing.
    """
    if fronthaul.integer_bits:
        expected = fronthaul.bits * scenario.bit_rate_step
        if not np.allclose(fronthaul.t, expected, rtol=1e-12, atol=0.0):
            raise ScenarioError("fronthaul rates are off the integer-bit grid")
    r = per_sc_rates(scenario, power, fronthaul.t, QuantModel.UNIFORM)
    return r, float(r.sum())


def sum_rate(scenario: Scenario, power: PowerAllocation,
             fronthaul: FronthaulAllocation, model: QuantModel) -> float:
    if model is QuantModel.GAUSSIAN:
        return gaussian_sum_rate(scenario, power, fronthaul)[1]
    return uniform_sum_rate(scenario, power, fronthaul)[1]


# ---------------------------------------------------------------------------
# Fronthaul loads
# ---------------------------------------------------------------------------

def _received_power(scenario: Scenario, power: PowerAllocation) -> np.ndarray:
    return scenario.owner_gain() * power.per_subcarrier()[None, :] + scenario.noise_var


def gaussian_noise_for_rate(scenario: Scenario, power: PowerAllocation, t) -> np.ndarray:
    """Quantization noise q that makes the per-SC Gaussian load equal ``t``."""
    w = relative_quant_noise(t, scenario.sc_bandwidth, QuantModel.GAUSSIAN)
    return w * _received_power(scenario, power)


def gaussian_fronthaul_load(scenario: Scenario, power: PowerAllocation, noise_q) -> np.ndarray:
    """Per-RRH load (B/N) sum_n log2(1 + (|h|^2 p + sigma^2) / q) in bit/s."""
    q = np.asarray(noise_q, dtype=float)
    if q.shape != scenario.noise_var.shape:
        raise ScenarioError("noise_q must have shape (M, N)")
    if np.any(q < 0):
        raise ScenarioError("quantization noise must be nonnegative")
    s = _received_power(scenario, power)
    if np.any((q == 0) & (s > 0)):
        raise InfiniteLoadError("zero quantization noise on a nonzero signal")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(s > 0, s / q, 0.0)
    return scenario.sc_bandwidth * np.log2(1.0 + ratio).sum(axis=1)


def uniform_fronthaul_load(fronthaul: FronthaulAllocation) -> np.ndarray:
    """Per-RRH load sum_n 2 B D / N in bit/s."""
    return fronthaul.load()


# ---------------------------------------------------------------------------
# Feasibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str          # "power", "fronthaul", "negative", "grid", "ownership"
    index: int
    amount: float

    def __str__(self):
        return f"{self.kind}[{self.index}]: {self.amount:.6g}"


def check_feasible(scenario: Scenario, power: PowerAllocation,
                   fronthaul: FronthaulAllocation, model: QuantModel,
                   require_integer: bool | None = None,
                   tol: float = FEAS_TOL) -> list[Violation]:
    """List every violated constraint; an empty list means feasible.

    ``require_integer`` defaults to True for the uniform model, i.e. the
    integer-bit problem; pass False to check the continuous relaxation.
    """
    out: list[Violation] = []
    p, t = power.p, fronthaul.t
    if p.shape != (scenario.num_users, scenario.num_subcarriers):
        raise ScenarioError("power allocation shape does not match scenario")
    if t.shape != (scenario.num_rrhs, scenario.num_subcarriers):
        raise ScenarioError("fronthaul allocation shape does not match scenario")

    for k in np.flatnonzero((p < 0).any(axis=1)):
        out.append(Violation("negative", int(k), float(p[k].min())))
    for m in np.flatnonzero((t < 0).any(axis=1)):
        out.append(Violation("negative", int(m), float(t[m].min())))
    for k in np.flatnonzero((p * ~scenario.owner_mask() > 0).any(axis=1)):
        out.append(Violation("ownership", int(k), float((p[k] * ~scenario.owner_mask()[k]).sum())))

    used = p.sum(axis=1)
    budget = scenario.power_budget
    for k in np.flatnonzero(used > budget * (1 + tol)):
        out.append(Violation("power", int(k), float(used[k] - budget[k])))

    load = t.sum(axis=1)
    cap = scenario.fronthaul_cap
    for m in np.flatnonzero(load > cap * (1 + tol)):
        out.append(Violation("fronthaul", int(m), float(load[m] - cap[m])))

    if require_integer is None:
        require_integer = model is QuantModel.UNIFORM
    if require_integer:
        d = t / scenario.bit_rate_step
        off = np.abs(d - np.round(d)) > 1e-9 * np.maximum(1.0, np.abs(d))
        for m in np.flatnonzero(off.any(axis=1)):
            out.append(Violation("grid", int(m), float(np.abs(d[m] - np.round(d[m])).max())))
    return out
