"""Uniform scalar I/Q quantizer and its Monte Carlo noise-power estimator.

Each branch of a complex sample is scaled by eta = 3 sqrt(S / 2) (three
standard deviations of a branch carrying half of the power S), clipped to
[-1, 1], and quantized with the mid-rise rule::

    y_check = ceil(2^(D-1) y_bar) / 2^(D-1) - 2^-D

which has 2^D levels spaced Delta = 2^(1-D) apart.  The analytic noise model
treats the in-range error as uniform over one step, q = eta^2 Delta^2 / 6 =
3 S 2^(-2D).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import norm

__all__ = [
    "QuantizerSpec",
    "ComplexSample",
    "scale_factor",
    "quantize_branch",
    "quantize_dequantize",
    "quantize_array",
    "analytic_noise_power",
    "overflow_probability",
    "NoisePowerEstimate",
    "monte_carlo_noise_power",
]


@dataclass(frozen=True)
class QuantizerSpec:
    bits: int
    scale: float

    def __post_init__(self):
        if int(self.bits) != self.bits or self.bits < 1:
            raise ValueError("bits must be an integer >= 1")
        if not self.scale >= 0:
            raise ValueError("scale must be nonnegative")

    @property
    def step(self) -> float:
        return 2.0 ** (1 - self.bits)

    @property
    def levels(self) -> int:
        return 2 ** self.bits

    def codebook(self) -> np.ndarray:
        """All normalized reconstruction levels, ascending."""
        half = 2 ** (self.bits - 1)
        k = np.arange(-half + 1, half + 1)
        return k / half - 2.0 ** -self.bits


@dataclass(frozen=True)
class ComplexSample:
    i_part: float
    q_part: float

    def __post_init__(self):
        if not (math.isfinite(self.i_part) and math.isfinite(self.q_part)):
            raise ValueError("sample must be finite")

    def __complex__(self):
        return complex(self.i_part, self.q_part)


def scale_factor(signal_power: float) -> float:
    """Three-sigma scaling eta = 3 sqrt(S / 2) shared by both branches."""
    if signal_power < 0:
        raise ValueError("signal power must be nonnegative")
    return 3.0 * math.sqrt(signal_power / 2.0)


def quantize_branch(y_bar, bits: int):
    """Quantize normalized branch values (any shape) to the mid-rise codebook.

    Inputs beyond [-1, 1] are clipped first.  ``y_bar == -1`` exactly would
    give an index one below the codebook, so the index is clamped to the
    bottom cell.
    """
    half = 2 ** (bits - 1)
    y = np.clip(np.asarray(y_bar, dtype=float), -1.0, 1.0)
    idx = np.clip(np.ceil(half * y), -half + 1, half)
    return idx / half - 2.0 ** -bits


def quantize_array(y, spec: QuantizerSpec):
    """Quantize and reconstruct complex samples ``y`` (any shape)."""
    y = np.asarray(y, dtype=complex)
    if spec.scale == 0:
        return np.zeros_like(y)
    eta = spec.scale
    re = quantize_branch(y.real / eta, spec.bits)
    im = quantize_branch(y.imag / eta, spec.bits)
    return eta * (re + 1j * im)


def quantize_dequantize(sample: ComplexSample, spec: QuantizerSpec) -> ComplexSample:
    out = quantize_array(complex(sample), spec)
    return ComplexSample(float(out.real), float(out.imag))


def analytic_noise_power(signal_power: float, bits: int) -> float:
    """Uniform-error model of the quantization noise power, 3 S 2^(-2D)."""
    return 3.0 * signal_power * 2.0 ** (-2 * bits)


def overflow_probability() -> float:
    """Per-branch probability that a Gaussian branch exceeds three sigma."""
    return float(2.0 * norm.sf(3.0))


class NoisePowerEstimate(NamedTuple):
    empirical_q: float      # in-range (granular) error power, complex sample
    overflow_rate: float    # fraction of branch samples beyond the clip level
    total_q: float          # error power including clipped samples
    num_samples: int
    seed: int | None


def monte_carlo_noise_power(signal_power: float, bits: int, num_samples: int = 10**6,
                            seed: int | None = 0, chunk: int = 2**18) -> NoisePowerEstimate:
    """Estimate the quantizer's noise power on CN(0, S) samples.

    ``empirical_q`` is the mean squared error per complex sample over branch
    values that did not overflow (twice the per-branch mean), which is the
    quantity the uniform-error model describes.  ``total_q`` also counts the
    clipping error of overflowing branches.  Samples are drawn in chunks from
    independent Philox sub-streams spawned from ``seed``, so the result does
    not depend on how the work is split.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    if num_samples < 1:
        raise ValueError("need at least one sample")
    if signal_power == 0:
        return NoisePowerEstimate(0.0, 0.0, 0.0, num_samples, seed)

    spec = QuantizerSpec(bits, scale_factor(signal_power))
    sigma = math.sqrt(signal_power / 2.0)
    n_chunks = -(-num_samples // chunk)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)

    sq_in = 0.0
    n_in = 0
    sq_all = 0.0
    n_over = 0
    for i, ss in enumerate(streams):
        size = min(chunk, num_samples - i * chunk)
        rng = np.random.Generator(np.random.Philox(ss))
        branches = sigma * rng.standard_normal((2, size))
        rec = spec.scale * quantize_branch(branches / spec.scale, bits)
        err2 = (rec - branches) ** 2
        over = np.abs(branches) > spec.scale
        sq_all += err2.sum()
        sq_in += err2[~over].sum()
        n_in += int((~over).sum())
        n_over += int(over.sum())

    total_branches = 2 * num_samples
    return NoisePowerEstimate(
        empirical_q=2.0 * sq_in / max(n_in, 1),
        overflow_rate=n_over / total_branches,
        total_q=sq_all / num_samples,
        num_samples=num_samples,
        seed=seed,
    )
