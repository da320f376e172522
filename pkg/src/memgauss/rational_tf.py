"""Real rational transfer functions H(s) and their frequency/time-domain analysis."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import MemgaussError
from .gaussian import GaussianParams, gaussian_magnitude_target
from .waveform import Waveform

__all__ = [
    "Polynomial",
    "RationalTransferFunction",
    "FrequencyResponse",
    "Waveform",
    "PoleEvaluation",
    "DcPole",
    "NoCutoffFound",
    "UnstableSystem",
    "PUBLISHED_APPROXIMANT",
    "HALF_POWER_DB",
    "eval_at",
    "freq_response",
    "dc_gain",
    "cutoff_frequency",
    "phase_at",
    "step_response",
    "overshoot",
    "gaussian_approx_error",
    "best_gaussian_sigma",
]

#: the "-3 dB" drop taken as the exact half-power point, 10 log10(2) dB
HALF_POWER_DB = 10.0 * math.log10(2.0)

CUTOFF_SEARCH_HZ = (1e-4, 1e9)
CUTOFF_BRACKET_POINTS = 50
# |den(s)| below this fraction of sum |b_k||s|^k counts as hitting a pole
_POLE_RTOL = 64 * np.finfo(float).eps


class PoleEvaluation(MemgaussError):
    """Transfer function evaluated at (numerically) a pole."""


class DcPole(MemgaussError):
    """Denominator vanishes at s = 0, so the DC gain is infinite."""


class NoCutoffFound(MemgaussError):
    """Magnitude never drops by the requested amount inside the search interval."""


class UnstableSystem(RuntimeWarning):
    """Simulated response diverged; the waveform is truncated at divergence."""


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial in s, coefficients in ascending degree."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise ValueError("polynomial needs at least one coefficient")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("polynomial coefficients must be finite")
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def descending(cls, coeffs: Sequence[float]) -> "Polynomial":
        return cls(tuple(reversed(list(coeffs))))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return self.coefficients == (0.0,)

    def __call__(self, s):
        # Horner, highest coefficient first
        acc = 0.0
        for c in reversed(self.coefficients):
            acc = acc * s + c
        return acc

    def abs_scale(self, s) -> float:
        """sum |c_k| |s|^k, the magnitude scale for cancellation checks."""
        r = abs(s)
        return sum(abs(c) * r**k for k, c in enumerate(self.coefficients))

    def roots(self) -> np.ndarray:
        return np.roots(list(reversed(self.coefficients)))


@dataclass(frozen=True)
class RationalTransferFunction:
    numerator: Polynomial
    denominator: Polynomial

    def __post_init__(self):
        if not isinstance(self.numerator, Polynomial):
            object.__setattr__(self, "numerator", Polynomial(tuple(self.numerator)))
        if not isinstance(self.denominator, Polynomial):
            object.__setattr__(self, "denominator", Polynomial(tuple(self.denominator)))
        if self.denominator.is_zero:
            raise ValueError("denominator is the zero polynomial")
        if self.numerator.degree > self.denominator.degree:
            raise ValueError(
                f"improper transfer function: deg num {self.numerator.degree} > "
                f"deg den {self.denominator.degree}"
            )

    @classmethod
    def from_coefficients(cls, num: Sequence[float], den: Sequence[float]):
        """Build from ascending-degree coefficient lists."""
        return cls(Polynomial(tuple(num)), Polynomial(tuple(den)))

    @classmethod
    def unit(cls):
        return cls(Polynomial((1.0,)), Polynomial((1.0,)))

    def poles(self) -> np.ndarray:
        return self.denominator.roots()

    def __call__(self, s):
        return eval_at(self, s)


#: 4th-order Gaussian approximant with the published coefficients
PUBLISHED_APPROXIMANT = RationalTransferFunction(
    Polynomial.descending([0.2, 1.2, -5.0, 40.0]),
    Polynomial.descending([2.9, 12.0, 27.4, 34.0, 19.0]),
)


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    """Complex gain sampled at strictly increasing positive frequencies (Hz)."""

    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if freqs.ndim != 1 or freqs.shape != values.shape:
            raise ValueError("freqs and values must be 1-D arrays of equal length")
        if freqs.size and (freqs[0] <= 0 or np.any(np.diff(freqs) <= 0)):
            raise ValueError("frequencies must be positive and strictly increasing")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.freqs.size

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(self.values))

    @property
    def phase_deg(self) -> np.ndarray:
        """Principal value in (-180, 180]."""
        return _principal_deg(np.angle(self.values, deg=True))

    @property
    def phase_unwrapped_deg(self) -> np.ndarray:
        return np.degrees(np.unwrap(np.angle(self.values)))

    def peak(self) -> tuple[float, float]:
        """(frequency, magnitude_db) of the largest sample."""
        k = int(np.argmax(np.abs(self.values)))
        return float(self.freqs[k]), float(self.magnitude_db[k])

    def cutoff(self, drop_db: float = HALF_POWER_DB, reference: str = "dc") -> float:
        """Interpolated frequency where the magnitude first falls ``drop_db``
        below the reference level.

        ``reference="dc"`` uses the lowest-frequency sample, ``"peak"`` the
        maximum (searching only above the peak). Interpolation is linear in
        dB against log frequency.
        """
        mag = self.magnitude_db
        if reference == "dc":
            start, ref = 0, mag[0]
        elif reference == "peak":
            start = int(np.argmax(mag))
            ref = mag[start]
        else:
            raise ValueError(f"reference must be 'dc' or 'peak', got {reference!r}")
        target = ref - drop_db
        below = np.nonzero(mag[start:] < target)[0]
        if below.size == 0:
            raise NoCutoffFound(
                f"response never drops {drop_db:.4g} dB below reference within "
                f"[{self.freqs[0]:g}, {self.freqs[-1]:g}] Hz"
            )
        k = start + int(below[0])
        if k == 0:
            return float(self.freqs[0])
        x0, x1 = np.log(self.freqs[k - 1]), np.log(self.freqs[k])
        y0, y1 = mag[k - 1], mag[k]
        return float(np.exp(x0 + (target - y0) * (x1 - x0) / (y1 - y0)))

    def slope_db_per_decade(self, f_lo: float, f_hi: float) -> float:
        """Least-squares slope of magnitude_db against log10(f) on [f_lo, f_hi]."""
        sel = (self.freqs >= f_lo) & (self.freqs <= f_hi)
        if np.count_nonzero(sel) < 2:
            raise ValueError("need at least two samples in the slope window")
        return float(np.polyfit(np.log10(self.freqs[sel]), self.magnitude_db[sel], 1)[0])


def _principal_deg(deg):
    # np.angle returns [-180, 180]; fold -180 onto +180
    return np.where(deg <= -180.0, deg + 360.0, deg)


def eval_at(tf: RationalTransferFunction, s: complex) -> complex:
    """Evaluate H(s) by Horner's scheme on numerator and denominator."""
    den = tf.denominator(s)
    scale = tf.denominator.abs_scale(s)
    if abs(den) <= _POLE_RTOL * scale:
        raise PoleEvaluation(f"denominator vanishes at s={s!r}")
    return tf.numerator(s) / den


def freq_response(tf: RationalTransferFunction, freqs: Sequence[float]) -> FrequencyResponse:
    freqs = np.asarray(freqs, dtype=float)
    if freqs.size and (freqs[0] <= 0 or np.any(np.diff(freqs) <= 0)):
        raise ValueError("frequencies must be positive and strictly increasing")
    values = [complex(eval_at(tf, 2j * math.pi * f)) for f in freqs]
    return FrequencyResponse(freqs, np.array(values, dtype=complex))


def dc_gain(tf: RationalTransferFunction) -> float:
    b0 = tf.denominator.coefficients[0]
    if b0 == 0.0:
        raise DcPole("denominator has a root at s = 0")
    return tf.numerator.coefficients[0] / b0


def dc_gain_exact(tf: RationalTransferFunction) -> Fraction:
    """DC gain as an exact rational of the (binary) stored coefficients."""
    b0 = Fraction(tf.denominator.coefficients[0])
    if b0 == 0:
        raise DcPole("denominator has a root at s = 0")
    return Fraction(tf.numerator.coefficients[0]) / b0


def _mag_db(tf, f):
    return 20.0 * math.log10(abs(eval_at(tf, 2j * math.pi * f)))


def cutoff_frequency(
    tf: RationalTransferFunction,
    drop_db: float = HALF_POWER_DB,
    reference: str = "dc",
    search: tuple[float, float] = CUTOFF_SEARCH_HZ,
) -> float:
    """Lowest frequency (Hz) where the magnitude is ``drop_db`` below the reference.

    The reference is the DC magnitude by default; ``reference="peak"`` uses
    the response maximum instead and searches above it. The crossing is
    bracketed on 50 log-spaced points, then refined by bisection in log f.
    """
    f_lo, f_hi = search
    grid = np.logspace(math.log10(f_lo), math.log10(f_hi), CUTOFF_BRACKET_POINTS)
    mags = np.array([_mag_db(tf, f) for f in grid])
    if reference == "dc":
        g = dc_gain(tf)
        if g == 0.0:
            raise NoCutoffFound("zero DC gain; a DC-referenced cutoff is undefined")
        ref = 20.0 * math.log10(abs(g))
    elif reference == "peak":
        # refine the peak location on a dense grid first
        dense = np.logspace(math.log10(f_lo), math.log10(f_hi), 4000)
        dmags = np.array([_mag_db(tf, f) for f in dense])
        k = int(np.argmax(dmags))
        ref = float(dmags[k])
        grid, mags = dense[k:], dmags[k:]
    else:
        raise ValueError(f"reference must be 'dc' or 'peak', got {reference!r}")
    target = ref - drop_db
    below = np.nonzero(mags < target)[0]
    if below.size == 0:
        raise NoCutoffFound(
            f"magnitude never drops {drop_db:.4g} dB below reference in [{f_lo:g}, {f_hi:g}] Hz"
        )
    k = int(below[0])
    if k == 0:
        raise NoCutoffFound(f"magnitude already below target at {grid[0]:g} Hz")
    lo, hi = math.log(grid[k - 1]), math.log(grid[k])
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if _mag_db(tf, math.exp(mid)) < target:
            hi = mid
        else:
            lo = mid
    return math.exp(0.5 * (lo + hi))


def phase_at(tf: RationalTransferFunction, f: float) -> float:
    """Principal-value phase of H(j 2 pi f) in degrees, in (-180, 180]."""
    if not f > 0:
        raise ValueError(f"frequency must be positive, got {f}")
    return float(_principal_deg(math.degrees(np.angle(eval_at(tf, 2j * math.pi * f)))))


def state_space(tf: RationalTransferFunction):
    """Controllable canonical realization (A, B, C, D)."""
    den = np.array(tf.denominator.coefficients)
    n = den.size - 1
    lead = den[-1]
    num = np.zeros(n + 1)
    num[: len(tf.numerator.coefficients)] = tf.numerator.coefficients
    beta = den / lead
    alpha = num / lead
    d = alpha[n]
    a = np.zeros((n, n))
    if n:
        a[:-1, 1:] = np.eye(n - 1)
        a[-1, :] = -beta[:n]
    b = np.zeros(n)
    if n:
        b[-1] = 1.0
    c = alpha[:n] - beta[:n] * d
    return a, b, c, float(d)


def step_response(tf: RationalTransferFunction, t_end: float, dt: float) -> Waveform:
    """Unit-step response from rest, trapezoidal integration with fixed ``dt``.

    Emits :class:`UnstableSystem` and truncates the waveform if the output
    exceeds ``1e6 * |dc_gain|``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not t_end >= dt:
        raise ValueError("t_end must be at least dt")
    a, b, c, d = state_space(tf)
    n_steps = int(round(t_end / dt))
    out = np.empty(n_steps + 1)
    n = a.shape[0]
    if n == 0:
        out[:] = d
        return Waveform(0.0, dt, out)
    try:
        limit = 1e6 * max(abs(dc_gain(tf)), 1.0)
    except DcPole:
        limit = 1e6
    eye = np.eye(n)
    lhs = eye - 0.5 * dt * a
    # x_{k+1} = P x_k + q  (u = 1 throughout)
    p = np.linalg.solve(lhs, eye + 0.5 * dt * a)
    q = np.linalg.solve(lhs, dt * b)
    x = np.zeros(n)
    out[0] = d
    for k in range(1, n_steps + 1):
        x = p @ x + q
        y = c @ x + d
        out[k] = y
        if not abs(y) <= limit:
            warnings.warn(
                UnstableSystem(f"step response diverged at t={k * dt:g} s"), stacklevel=2
            )
            return Waveform(0.0, dt, out[: k + 1])
    return Waveform(0.0, dt, out)


def overshoot(w: Waveform, final_value: float) -> float:
    """Peak excursion above ``final_value`` in percent of ``|final_value|``."""
    if final_value == 0:
        raise ValueError("final_value must be nonzero")
    return max(0.0, (float(np.max(w.samples)) - final_value) / abs(final_value)) * 100.0


def _approx_residual(tf, sigma, grid):
    g = dc_gain(tf)
    if g == 0.0:
        raise DcPole("zero DC gain; cannot normalize the magnitude")
    mag = np.abs(freq_response(tf, grid).values) / abs(g)
    return mag - gaussian_magnitude_target(GaussianParams(0.0, sigma), grid)


def gaussian_approx_error(
    tf: RationalTransferFunction, sigma: float, grid: Sequence[float], norm: str = "L2"
) -> float:
    """Distance between the DC-normalized magnitude and the Gaussian target.

    ``norm="L2"`` is the root-mean-square over the grid, ``"Linf"`` the
    maximum absolute deviation.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    r = _approx_residual(tf, sigma, grid)
    if norm == "L2":
        return float(np.sqrt(np.mean(r * r)))
    if norm == "Linf":
        return float(np.max(np.abs(r)))
    raise ValueError(f"norm must be 'L2' or 'Linf', got {norm!r}")


def best_gaussian_sigma(
    tf: RationalTransferFunction,
    grid: Sequence[float],
    norm: str = "L2",
    bounds: tuple[float, float] | None = None,
    tol: float = 1e-8,
) -> tuple[float, float]:
    """Sigma minimizing :func:`gaussian_approx_error`, returned with the error.

    A coarse log-spaced scan brackets the minimum, golden-section search
    refines it in log sigma.
    """
    grid = np.asarray(grid, dtype=float)
    if bounds is None:
        bounds = (0.01 / (2 * math.pi * grid[-1]), 100.0 / (2 * math.pi * grid[0]))

    def err(log_sigma):
        return gaussian_approx_error(tf, math.exp(log_sigma), grid, norm)

    lo, hi = math.log(bounds[0]), math.log(bounds[1])
    scan = np.linspace(lo, hi, 81)
    vals = [err(x) for x in scan]
    k = int(np.argmin(vals))
    a, b = scan[max(k - 1, 0)], scan[min(k + 1, scan.size - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = err(c), err(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = err(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = err(d)
    x = 0.5 * (a + b)
    return math.exp(x), err(x)
