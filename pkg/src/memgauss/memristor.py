"""Linear ion-drift memristor with a Joglekar window.

The device is a doped region of width ``w`` inside a film of thickness ``d``;
its memristance interpolates linearly between ``r_on`` (fully doped) and
``r_off`` (undoped). Charge and flux are tracked alongside the state so the
constitutive relations ``dphi = M dq`` can be checked after the fact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MemgaussError


class OpenLoop(MemgaussError):
    """Trajectory endpoints do not coincide, so no enclosed area is defined."""


@dataclass(frozen=True)
class MemristorParams:
    """Device constants.

    Parameters
    ----------
    r_on : float
        Memristance with the film fully doped (ohms).
    r_off : float
        Memristance with the film undoped (ohms).
    d : float
        Film thickness (m).
    mu_v : float
        Dopant mobility (m^2 V^-1 s^-1).
    window_p : int
        Joglekar window exponent; 0 disables the window (F = 1).
    """

    r_on: float = 100.0
    r_off: float = 16e3
    d: float = 10e-9
    mu_v: float = 1e-14
    window_p: int = 1

    def __post_init__(self):
        if not (0 < self.r_on < self.r_off and math.isfinite(self.r_off)):
            raise ValueError(f"need 0 < r_on < r_off, got {self.r_on}, {self.r_off}")
        if not (self.d > 0 and math.isfinite(self.d)):
            raise ValueError(f"d must be positive, got {self.d}")
        if not (self.mu_v > 0 and math.isfinite(self.mu_v)):
            raise ValueError(f"mu_v must be positive, got {self.mu_v}")
        if int(self.window_p) != self.window_p or self.window_p < 0:
            raise ValueError(f"window_p must be a non-negative integer, got {self.window_p}")

    def fraction_for(self, resistance: float) -> float:
        """Doped fraction w/d at which the memristance equals ``resistance``."""
        return (self.r_off - resistance) / (self.r_off - self.r_on)


@dataclass(frozen=True)
class MemristorState:
    w: float  # doped width, m
    q: float = 0.0  # charge, C
    phi: float = 0.0  # flux linkage, Wb

    @classmethod
    def from_fraction(cls, p: MemristorParams, fraction: float) -> "MemristorState":
        if not 0.0 <= fraction <= 1.0:
            raise ValueError(f"state fraction must lie in [0, 1], got {fraction}")
        return cls(w=fraction * p.d)

    def fraction(self, p: MemristorParams) -> float:
        return self.w / p.d


def memristance(p: MemristorParams, s: MemristorState) -> float:
    u = s.w / p.d
    return p.r_on * u + p.r_off * (1.0 - u)


def window(p: MemristorParams, u: float) -> float:
    """Joglekar window F(u) = 1 - (2u - 1)^(2p); vanishes at both film edges."""
    if p.window_p == 0:
        return 1.0
    return 1.0 - (2.0 * u - 1.0) ** (2 * p.window_p)


def step_state(p: MemristorParams, s: MemristorState, i: float, dt: float) -> MemristorState:
    """Advance the state by one explicit step under current ``i``.

    The flux increment uses the memristance at the start of the step, so
    ``phi`` accumulates exactly ``v * dt`` with ``v = M * i``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if i == 0.0:
        return s
    m = memristance(p, s)
    drift = p.mu_v * p.r_on / p.d * i * window(p, s.w / p.d) * dt
    w = min(max(s.w + drift, 0.0), p.d)
    return MemristorState(w=w, q=s.q + i * dt, phi=s.phi + m * i * dt)


@dataclass(frozen=True, eq=False)
class IVTrajectory:
    """Sampled voltage-driven run; arrays share the time index."""

    t: np.ndarray
    v: np.ndarray
    i: np.ndarray
    m: np.ndarray  # memristance used at each sample
    final: MemristorState
    steps_per_cycle: int

    def __len__(self):
        return self.t.size

    def __iter__(self):
        # (v, i, t) triples
        return zip(self.v.tolist(), self.i.tolist(), self.t.tolist())

    def cycle(self, k: int) -> np.ndarray:
        """(v, i) points of cycle ``k`` (negative indexes count from the end),
        endpoints included."""
        n_cycles = (self.t.size - 1) // self.steps_per_cycle
        if k < 0:
            k += n_cycles
        if not 0 <= k < n_cycles:
            raise IndexError(f"cycle {k} out of range for {n_cycles} cycles")
        a = k * self.steps_per_cycle
        b = a + self.steps_per_cycle + 1
        return np.column_stack([self.v[a:b], self.i[a:b]])


def simulate_iv(
    p: MemristorParams,
    amplitude: float,
    freq: float,
    cycles: int,
    steps_per_cycle: int,
    initial: MemristorState,
) -> IVTrajectory:
    """Drive the device with ``amplitude * sin(2 pi freq t)``.

    Current follows from ``i = v / M`` at each sample; the state is then
    advanced with :func:`step_state`. The returned trajectory holds
    ``cycles * steps_per_cycle + 1`` samples so each cycle is closed.
    """
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    if steps_per_cycle < 100:
        raise ValueError("steps_per_cycle must be >= 100")
    if not freq > 0:
        raise ValueError(f"freq must be positive, got {freq}")
    n = cycles * steps_per_cycle
    dt = 1.0 / (freq * steps_per_cycle)
    # phase from the integer step index keeps whole cycles landing on v = 0
    k = np.arange(n + 1)
    t = k * dt
    v = amplitude * np.sin(2.0 * math.pi * k / steps_per_cycle)
    i = np.empty(n + 1)
    m = np.empty(n + 1)
    s = initial
    for j in range(n + 1):
        m[j] = memristance(p, s)
        i[j] = v[j] / m[j]
        if j < n:
            s = step_state(p, s, i[j], dt)
    return IVTrajectory(t=t, v=v, i=i, m=m, final=s, steps_per_cycle=steps_per_cycle)


def _shoelace(x: np.ndarray, y: np.ndarray) -> float:
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _with_zero_crossings(v: np.ndarray, i: np.ndarray):
    """Insert linearly interpolated points where v changes sign between samples."""
    flips = np.nonzero(v[:-1] * v[1:] < 0)[0]
    if flips.size == 0:
        return v, i
    frac = v[flips] / (v[flips] - v[flips + 1])
    i_zero = i[flips] + frac * (i[flips + 1] - i[flips])
    v = np.insert(v, flips + 1, 0.0)
    i = np.insert(i, flips + 1, i_zero)
    return v, i


def loop_area(iv, rtol: float = 1e-6) -> float:
    """Enclosed area of a closed i-v cycle.

    A pinched loop has two lobes of opposite orientation that would cancel in
    a plain signed shoelace sum, so the v >= 0 and v <= 0 parts are measured
    separately and their absolute areas added. For a simple loop of one
    orientation this equals the ordinary absolute shoelace area.
    """
    pts = np.asarray(iv, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (v, i) points")
    v, i = pts[:, 0], pts[:, 1]
    # each axis is judged against its own amplitude
    v_gap = abs(v[0] - v[-1]) > rtol * np.max(np.abs(v))
    i_gap = abs(i[0] - i[-1]) > rtol * np.max(np.abs(i))
    if v_gap or i_gap:
        raise OpenLoop(
            f"endpoints differ: ({v[0]:.3g}, {i[0]:.3g}) vs ({v[-1]:.3g}, {i[-1]:.3g})"
        )
    v, i = _with_zero_crossings(v, i)
    # each half-plane subsequence, taken in cyclic order, traces one lobe
    # closed along the v = 0 axis
    total = 0.0
    for keep in (v >= 0, v <= 0):
        if np.count_nonzero(keep) >= 3:
            total += abs(_shoelace(v[keep], i[keep]))
    return total
