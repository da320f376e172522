"""Circuit constructors: the lumped Gaussian ladder, unity-gain Sallen-Key
stages and cascades, and resistor-to-memristor substitution."""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from math import factorial
from pathlib import Path

import numpy as np

from .errors import MemgaussError, ParseError
from .memristor import MemristorParams
from .netlist import (
    GROUND,
    AcSweep,
    Circuit,
    Element,
    ElementKind,
    MemristorSpec,
    SourceSpec,
)
from .rational_tf import Polynomial, RationalTransferFunction, cutoff_frequency

_K = ElementKind


class OutOfRange(MemgaussError):
    """Resistor value cannot be realized by the memristor's [r_on, r_off] range."""

    def __init__(self, name, value, params):
        self.name = name
        self.value = value
        super().__init__(
            f"{name} = {value:g} ohm outside memristor range "
            f"[{params.r_on:g}, {params.r_off:g}] ohm"
        )


class PoleTableError(ParseError):
    pass


# --------------------------------------------------------------------------
# ladder


@dataclass(frozen=True)
class LadderSpec:
    """Component values of the five-section ladder (SI units)."""

    r_end: float = 500.0  # R1, R5
    r_shunt_series: float = 1e3  # R2..R4
    r_parallel: float = 2e3  # R6..R9
    c_end: float = 0.6e-6  # C1, C5
    c_mid: float = 1.2e-6  # C2..C4
    l: float = 0.1  # L1..L4

    def __post_init__(self):
        for name in ("r_end", "r_shunt_series", "r_parallel", "c_end", "c_mid", "l"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")

    def scaled(self, reactive: float) -> "LadderSpec":
        """Same resistors, all L and C multiplied by ``reactive``."""
        return LadderSpec(
            self.r_end,
            self.r_shunt_series,
            self.r_parallel,
            self.c_end * reactive,
            self.c_mid * reactive,
            self.l * reactive,
        )


LADDER_SWEEP = AcSweep(20, 10.0, 10e6)


def build_gaussian_ladder(spec: LadderSpec = LadderSpec()) -> Circuit:
    """Source -> R1 -> four L||R series sections with shunt legs -> load R5.

    Node ``n1`` carries shunt C1; each series section k joins ``n{k}`` to
    ``n{k+1}`` through L_k in parallel with R_{5+k}. Nodes n2..n4 are shunted
    by R_k in series with C_k, node n5 by C5 directly and by the load R5.
    The output is probed at ``n5``.
    """
    els = [
        Element("V1", _K.VOLTAGE_SOURCE, ("in", GROUND), source=SourceSpec(dc=1.0, ac=1.0)),
        Element("R1", _K.RESISTOR, ("in", "n1"), value=spec.r_end),
        Element("C1", _K.CAPACITOR, ("n1", GROUND), value=spec.c_end),
    ]
    for k in range(1, 5):
        a, b = f"n{k}", f"n{k + 1}"
        els.append(Element(f"L{k}", _K.INDUCTOR, (a, b), value=spec.l))
        els.append(Element(f"R{5 + k}", _K.RESISTOR, (a, b), value=spec.r_parallel))
        if k < 4:
            mid = f"m{k + 1}"
            els.append(Element(f"R{k + 1}", _K.RESISTOR, (b, mid), value=spec.r_shunt_series))
            els.append(Element(f"C{k + 1}", _K.CAPACITOR, (mid, GROUND), value=spec.c_mid))
        else:
            els.append(Element("C5", _K.CAPACITOR, (b, GROUND), value=spec.c_end))
    els.append(Element("R5", _K.RESISTOR, ("n5", GROUND), value=spec.r_end))
    return Circuit(tuple(els), (LADDER_SWEEP,), ("n5",))


# --------------------------------------------------------------------------
# Sallen-Key


@dataclass(frozen=True)
class SallenKeyStage:
    """Unity-gain low-pass biquad; ``c1`` is the feedback capacitor, ``c2``
    the capacitor to ground."""

    omega0: float
    q_factor: float
    c1: float
    c2: float
    r1: float
    r2: float

    def __post_init__(self):
        if not (self.omega0 > 0 and self.q_factor > 0):
            raise ValueError("omega0 and q_factor must be positive")
        # realizable with real resistors only if c1/c2 >= 4 Q^2
        if self.c1 / self.c2 < 4.0 * self.q_factor**2 * (1.0 - 1e-12):
            raise ValueError(
                f"c1/c2 = {self.c1 / self.c2:g} below 4Q^2 = {4 * self.q_factor**2:g}"
            )

    def transfer_function(self) -> RationalTransferFunction:
        w2 = self.omega0**2
        return RationalTransferFunction(
            Polynomial((w2,)), Polynomial((w2, self.omega0 / self.q_factor, 1.0))
        )


def design_sallen_key_stage(omega0: float, q_factor: float, c2: float) -> SallenKeyStage:
    """Equal-resistor design: ``c1 = 4 Q^2 c2``, ``r = 1 / (2 Q omega0 c2)``."""
    if not (omega0 > 0 and q_factor > 0 and c2 > 0):
        raise ValueError("omega0, q_factor and c2 must be positive")
    c1 = 4.0 * q_factor**2 * c2
    r = 1.0 / (2.0 * q_factor * omega0 * c2)
    return SallenKeyStage(omega0, q_factor, c1, c2, r, r)


def build_sallen_key_cascade(stages, sweep: AcSweep | None = None) -> Circuit:
    """Chain unity-gain Sallen-Key stages; stage k's op-amp output feeds stage k+1.

    Stage k uses nodes ``s{k}a`` (resistor junction), ``s{k}b`` (op-amp
    input) and ``out{k}``. The last output is probed.
    """
    stages = list(stages)
    if not 1 <= len(stages) <= 8:
        raise ValueError(f"cascade takes 1 to 8 stages, got {len(stages)}")
    els = [Element("V1", _K.VOLTAGE_SOURCE, ("in", GROUND), source=SourceSpec(dc=0.0, ac=1.0))]
    prev = "in"
    for k, st in enumerate(stages, start=1):
        a, b, out = f"s{k}a", f"s{k}b", f"out{k}"
        els += [
            Element(f"R{k}a", _K.RESISTOR, (prev, a), value=st.r1),
            Element(f"R{k}b", _K.RESISTOR, (a, b), value=st.r2),
            Element(f"C{k}a", _K.CAPACITOR, (a, out), value=st.c1),
            Element(f"C{k}b", _K.CAPACITOR, (b, GROUND), value=st.c2),
            Element(f"E{k}", _K.IDEAL_OPAMP, (b, out, out)),
        ]
        prev = out
    if sweep is None:
        w = [s.omega0 for s in stages]
        f_lo = min(w) / (2 * math.pi) / 100.0
        f_hi = max(w) / (2 * math.pi) * 100.0
        sweep = AcSweep(20, 10.0 ** math.floor(math.log10(f_lo)), 10.0 ** math.ceil(math.log10(f_hi)))
    return Circuit(tuple(els), (sweep,), (prev,))


def cascade_transfer_function(stages) -> RationalTransferFunction:
    num = np.array([1.0])
    den = np.array([1.0])
    for st in stages:
        tf = st.transfer_function()
        num = np.polymul(num, tf.numerator.coefficients[::-1])
        den = np.polymul(den, tf.denominator.coefficients[::-1])
    return RationalTransferFunction(Polynomial.descending(num), Polynomial.descending(den))


# --------------------------------------------------------------------------
# pole tables


def parse_pole_table(text: str) -> list[tuple[float, float]]:
    """``omega0 q`` pairs, one per line; ``#`` starts a comment."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 2:
            raise PoleTableError("expected 'omega0 q'", lineno)
        try:
            w0, q = float(parts[0]), float(parts[1])
        except ValueError:
            raise PoleTableError(f"non-numeric entry {body!r}", lineno) from None
        if not (w0 > 0 and q > 0 and math.isfinite(w0) and math.isfinite(q)):
            raise PoleTableError("omega0 and q must be positive and finite", lineno)
        pairs.append((w0, q))
    if not 1 <= len(pairs) <= 8:
        raise PoleTableError(f"pole table needs 1 to 8 pairs, got {len(pairs)}")
    return pairs


def load_pole_table(path=None) -> list[tuple[float, float]]:
    """Read a pole table file; ``None`` loads the bundled 8th-order Bessel table."""
    if path is None:
        text = resources.files("memgauss").joinpath("data/bessel8.poles").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_pole_table(text)


def format_pole_table(pairs, header: str = "") -> str:
    lines = [f"# {h}" for h in header.splitlines()] if header else []
    lines.append("# omega0_rad_s q")
    lines += [f"{w!r} {q!r}" for w, q in pairs]
    return "\n".join(lines) + "\n"


def bessel_pole_pairs(order: int, cutoff_hz: float) -> list[tuple[float, float]]:
    """(omega0, Q) of each pole pair of a Bessel low-pass whose -3 dB point
    sits at ``cutoff_hz``.

    Built from the reverse Bessel polynomial; the -3 dB frequency of the
    delay-normalized prototype is located numerically and the poles rescaled.
    """
    if order < 2 or order % 2:
        raise ValueError("order must be an even integer >= 2")
    n = order
    # theta_n(s) = sum_k (2n-k)! / (2^(n-k) k! (n-k)!) s^k
    coeffs = [factorial(2 * n - k) / (2 ** (n - k) * factorial(k) * factorial(n - k)) for k in range(n + 1)]
    proto = RationalTransferFunction(Polynomial((coeffs[0],)), Polynomial(tuple(coeffs)))
    f3 = cutoff_frequency(proto)
    scale = cutoff_hz / f3
    poles = np.roots(coeffs[::-1]) * scale
    upper = sorted((p for p in poles if p.imag > 0), key=lambda p: abs(p))
    return [(float(abs(p)), float(abs(p) / (-2.0 * p.real))) for p in upper]


# --------------------------------------------------------------------------
# memristor substitution


def substitute_memristors(c: Circuit, params: MemristorParams) -> Circuit:
    """Replace every resistor by a memristor whose initial memristance equals it.

    The memristor keeps the resistor's terminals and is named ``M`` + the
    resistor name; its initial fraction is ``(r_off - R) / (r_off - r_on)``.
    """
    taken = {e.name.upper() for e in c.elements}
    out = []
    for e in c.elements:
        if e.kind is not _K.RESISTOR:
            out.append(e)
            continue
        if not params.r_on <= e.value <= params.r_off:
            raise OutOfRange(e.name, e.value, params)
        name = "M" + e.name
        while name.upper() in taken:
            name += "_"
        taken.add(name.upper())
        spec = MemristorSpec(params, params.fraction_for(e.value))
        out.append(Element(name, _K.MEMRISTOR, e.terminals, memristor=spec))
    return c.with_elements(out)
