"""Gaussian function, Gaussian smoothing of sampled signals and the ideal
Gaussian magnitude target used to score rational approximants."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MemgaussError
from .waveform import Waveform

#: kernel support, in units of sigma, on either side of mu
TRUNCATION_SIGMAS = 6.0


class UnderResolved(MemgaussError):
    """Sampling step too coarse for the kernel width (needs dt <= sigma/4)."""


@dataclass(frozen=True)
class GaussianParams:
    """Shift ``mu`` and scale ``sigma`` (both in seconds) of a unit-area Gaussian."""

    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")


def gaussian_pdf(p: GaussianParams, x):
    """Unit-area Gaussian density evaluated at ``x`` (scalar or array)."""
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    out = np.exp(-0.5 * z * z) / (p.sigma * math.sqrt(2.0 * math.pi))
    return float(out) if out.ndim == 0 else out


def gaussian_magnitude_target(p: GaussianParams, f):
    """Modulus of the Fourier transform of the Gaussian at frequency ``f`` Hz.

    ``exp(-sigma**2 * (2*pi*f)**2 / 2)``; the shift only contributes phase.
    """
    w = 2.0 * math.pi * np.asarray(f, dtype=float)
    out = np.exp(-0.5 * (p.sigma * w) ** 2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class GaussianKernel:
    lags: np.ndarray  # integer sample lags, ascending
    weights: np.ndarray  # renormalized, sums to 1
    raw_mass: float  # trapezoidal mass before renormalization


def gaussian_kernel(p: GaussianParams, dt: float) -> GaussianKernel:
    """Discrete Gaussian kernel on lags ``k*dt`` covering ``mu +/- 6 sigma``.

    Trapezoidal quadrature weights (half weight at both ends), then scaled to
    a unit discrete sum.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    half = TRUNCATION_SIGMAS * p.sigma
    k_lo = math.ceil((p.mu - half) / dt - 1e-12)
    k_hi = math.floor((p.mu + half) / dt + 1e-12)
    lags = np.arange(k_lo, k_hi + 1)
    quad = np.full(lags.size, dt)
    if lags.size > 1:
        quad[0] = quad[-1] = 0.5 * dt
    raw = gaussian_pdf(p, lags * dt) * quad
    raw_mass = float(np.sum(raw))
    return GaussianKernel(lags=lags, weights=raw / raw_mass, raw_mass=raw_mass)


def gaussian_convolve(x: Waveform, p: GaussianParams) -> Waveform:
    """Smooth ``x`` with the Gaussian kernel, output on the input grid.

    The signal is extended by edge replication so a step stays a step at
    both ends. A positive ``mu`` delays the output.
    """
    if x.dt > p.sigma / 4.0:
        raise UnderResolved(
            f"dt={x.dt:g} s exceeds sigma/4={p.sigma / 4.0:g} s; resample the input"
        )
    kernel = gaussian_kernel(p, x.dt)
    n = x.samples.size
    k_lo, k_hi = int(kernel.lags[0]), int(kernel.lags[-1])
    pad_left = max(k_hi, 0)
    pad_right = max(-k_lo, 0)
    ext = np.concatenate(
        [np.full(pad_left, x.samples[0]), x.samples, np.full(pad_right, x.samples[-1])]
    )
    # y[n] = sum_k w_k x[n - k]; accumulate tap by tap so every output is
    # summed in the same order (keeps monotone inputs exactly monotone)
    out = np.zeros(n)
    for lag, w in zip(kernel.lags, kernel.weights):
        start = pad_left - int(lag)
        out += w * ext[start:start + n]
    return Waveform(t0=x.t0, dt=x.dt, samples=out)
