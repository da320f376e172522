"""SPICE-subset netlist: circuit data model, parser, serializer and validator.

Grammar, one statement per line::

    * comment
    R<name> <n+> <n-> <value>
    L<name> <n+> <n-> <value>
    C<name> <n+> <n-> <value>
    V<name> <n+> <n-> [DC] <v> [AC <mag>] [SIN(<amplitude> <freq>)]
    M<name> <n+> <n-> RON=<v> ROFF=<v> D=<v> MU=<v> P=<int> W0=<fraction>
    E<name> <in+> <in-> <out>          (ideal op-amp)
    .ac dec <points/decade> <f_start> <f_stop>
    .tran <dt> <t_end>
    .probe <node> [<node> ...]
    .end

Values accept the suffixes p, n, u, m, k, meg (case-insensitive). Node
``"0"`` is ground.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum

import numpy as np

from .errors import ParseError
from .memristor import MemristorParams

GROUND = "0"


class NetlistSyntaxError(ParseError):
    pass


class UnknownElement(ParseError):
    pass


class DanglingNode(ParseError):
    pass


class MissingGround(ParseError):
    pass


class DuplicateName(ParseError):
    pass


class InvalidCircuit(ParseError):
    """Structurally parsed but violates a circuit invariant (shorted element,
    non-positive value, ...)."""


class ElementKind(Enum):
    RESISTOR = "R"
    INDUCTOR = "L"
    CAPACITOR = "C"
    VOLTAGE_SOURCE = "V"
    MEMRISTOR = "M"
    IDEAL_OPAMP = "E"

    @property
    def arity(self) -> int:
        return 3 if self is ElementKind.IDEAL_OPAMP else 2


PASSIVE_KINDS = (ElementKind.RESISTOR, ElementKind.INDUCTOR, ElementKind.CAPACITOR)


@dataclass(frozen=True)
class SourceSpec:
    dc: float = 0.0
    ac: float | None = None
    sin: tuple[float, float] | None = None  # (amplitude V, frequency Hz)

    def value_at(self, t: float) -> float:
        v = self.dc
        if self.sin is not None:
            amp, freq = self.sin
            v += amp * math.sin(2.0 * math.pi * freq * t)
        return v


@dataclass(frozen=True)
class MemristorSpec:
    params: MemristorParams
    w0: float  # initial doped fraction w/d


@dataclass(frozen=True)
class Element:
    name: str
    kind: ElementKind
    terminals: tuple[str, ...]
    value: float | None = None
    source: SourceSpec | None = None
    memristor: MemristorSpec | None = None
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class AcSweep:
    points_per_decade: int
    f_start: float
    f_stop: float

    def frequencies(self) -> np.ndarray:
        """Log-spaced grid with ``points_per_decade`` points per decade,
        both endpoints included."""
        decades = math.log10(self.f_stop / self.f_start)
        n = max(int(math.ceil(decades * self.points_per_decade - 1e-9)), 1) + 1
        return np.logspace(math.log10(self.f_start), math.log10(self.f_stop), n)


@dataclass(frozen=True)
class Transient:
    dt: float
    t_end: float


@dataclass(frozen=True)
class Circuit:
    elements: tuple[Element, ...]
    analyses: tuple[AcSweep | Transient, ...] = ()
    probes: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "analyses", tuple(self.analyses))
        object.__setattr__(self, "probes", tuple(self.probes))

    @property
    def nodes(self) -> frozenset[str]:
        return frozenset(n for e in self.elements for n in e.terminals)

    def element(self, name: str) -> Element:
        key = name.upper()
        for e in self.elements:
            if e.name.upper() == key:
                return e
        raise KeyError(name)

    def of_kind(self, kind: ElementKind) -> list[Element]:
        return [e for e in self.elements if e.kind is kind]

    @property
    def ac_sweep(self) -> AcSweep | None:
        return next((a for a in self.analyses if isinstance(a, AcSweep)), None)

    @property
    def transient(self) -> Transient | None:
        return next((a for a in self.analyses if isinstance(a, Transient)), None)

    def with_elements(self, elements) -> "Circuit":
        return Circuit(tuple(elements), self.analyses, self.probes)


# --------------------------------------------------------------------------
# values

_VALUE_RE = re.compile(
    r"^([+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)(meg|[pnumk])?$",
    re.IGNORECASE,
)
_SUFFIX_EXP = {"p": -12, "n": -9, "u": -6, "m": -3, "k": 3, "meg": 6}


def parse_value(token: str, line: int | None = None) -> float:
    """Decimal number with an optional SI suffix, e.g. ``4.7k`` or ``1MEG``."""
    m = _VALUE_RE.match(token)
    if m is None:
        raise NetlistSyntaxError(f"bad numeric value {token!r}", line)
    # decimal scaling keeps "100n" == 1e-7 exactly (correct rounding once)
    mantissa = Decimal(m.group(1))
    if m.group(2):
        mantissa = mantissa.scaleb(_SUFFIX_EXP[m.group(2).lower()])
    value = float(mantissa)
    if not math.isfinite(value):
        raise NetlistSyntaxError(f"value {token!r} is not finite", line)
    return value


def format_value(x: float) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    severity: str = "error"  # or "warning"
    subject: str | None = None  # element or node the diagnostic is about
    line: int | None = None

    def __str__(self):
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{self.severity}: {where}{self.code}: {self.message}"


_RAISES = {
    "MissingGround": MissingGround,
    "DuplicateName": DuplicateName,
    "DanglingNode": DanglingNode,
}


def validate(c: Circuit) -> list[Diagnostic]:
    """All invariant violations of ``c``, one diagnostic each; empty if clean."""
    out: list[Diagnostic] = []
    if GROUND not in c.nodes:
        out.append(Diagnostic("MissingGround", "no element connects to ground node '0'"))
    seen: dict[str, Element] = {}
    for e in c.elements:
        key = e.name.upper()
        if key in seen:
            out.append(
                Diagnostic(
                    "DuplicateName",
                    f"element name {e.name!r} already used (case-insensitive)",
                    subject=e.name,
                    line=e.line,
                )
            )
        else:
            seen[key] = e
        if len(e.terminals) != e.kind.arity:
            out.append(
                Diagnostic(
                    "BadArity",
                    f"{e.name} needs {e.kind.arity} terminals, has {len(e.terminals)}",
                    subject=e.name,
                    line=e.line,
                )
            )
        elif len(set(e.terminals)) == 1:
            out.append(
                Diagnostic(
                    "ShortedElement",
                    f"all terminals of {e.name} are on node {e.terminals[0]!r}",
                    subject=e.name,
                    line=e.line,
                )
            )
        if e.kind in PASSIVE_KINDS and not (
            e.value is not None and e.value > 0 and math.isfinite(e.value)
        ):
            out.append(
                Diagnostic(
                    "NonPositiveValue",
                    f"{e.name} value must be positive, got {e.value}",
                    subject=e.name,
                    line=e.line,
                )
            )
        if e.kind is ElementKind.MEMRISTOR and (
            e.memristor is None or not 0.0 <= e.memristor.w0 <= 1.0
        ):
            out.append(
                Diagnostic(
                    "BadMemristor",
                    f"{e.name} needs a memristor spec with W0 in [0, 1]",
                    subject=e.name,
                    line=e.line,
                )
            )
        if e.kind is ElementKind.VOLTAGE_SOURCE and e.source is None:
            out.append(
                Diagnostic("BadSource", f"{e.name} has no source spec", subject=e.name, line=e.line)
            )
    nodes = c.nodes
    for node in c.probes:
        if node not in nodes:
            out.append(
                Diagnostic(
                    "DanglingNode",
                    f"probed node {node!r} is not connected to any element",
                    subject=node,
                )
            )
    if not c.of_kind(ElementKind.VOLTAGE_SOURCE):
        out.append(Diagnostic("NoExcitation", "circuit has no voltage source", "warning"))
    return out


# --------------------------------------------------------------------------
# parser


def _parse_source(name, tokens, line) -> SourceSpec:
    # "SIN(1 10)" / "SIN (1, 10)" -> SIN 1 10
    toks = re.sub(r"[(),]", " ", " ".join(tokens)).split()
    dc, ac, sin = 0.0, None, None
    k = 0
    if toks and _VALUE_RE.match(toks[0]):
        dc = parse_value(toks[0], line)
        k = 1
    while k < len(toks):
        key = toks[k].upper()
        if key in ("DC", "AC"):
            if k + 1 >= len(toks):
                raise NetlistSyntaxError(f"{name}: {key} needs a value", line)
            val = parse_value(toks[k + 1], line)
            if key == "DC":
                dc = val
            else:
                ac = val
            k += 2
        elif key == "SIN":
            if k + 2 >= len(toks):
                raise NetlistSyntaxError(f"{name}: SIN needs amplitude and frequency", line)
            amp = parse_value(toks[k + 1], line)
            freq = parse_value(toks[k + 2], line)
            if freq < 0:
                raise NetlistSyntaxError(f"{name}: SIN frequency must be >= 0", line)
            sin = (amp, freq)
            k += 3
        else:
            raise NetlistSyntaxError(f"{name}: unexpected token {toks[k]!r}", line)
    return SourceSpec(dc=dc, ac=ac, sin=sin)


_MEM_KEYS = {"RON": "r_on", "ROFF": "r_off", "D": "d", "MU": "mu_v", "P": "window_p"}


def _parse_memristor(name, tokens, line) -> MemristorSpec:
    defaults = MemristorParams()
    kw = {v: getattr(defaults, v) for v in _MEM_KEYS.values()}
    w0 = 0.5
    seen = set()
    for tok in tokens:
        if "=" not in tok:
            raise NetlistSyntaxError(f"{name}: expected KEY=value, got {tok!r}", line)
        key, _, raw = tok.partition("=")
        key = key.upper()
        if key in seen:
            raise NetlistSyntaxError(f"{name}: {key} given twice", line)
        seen.add(key)
        if key == "P":
            if not re.fullmatch(r"[0-9]+", raw):
                raise NetlistSyntaxError(f"{name}: P must be a non-negative integer", line)
            kw["window_p"] = int(raw)
        elif key == "W0":
            w0 = parse_value(raw, line)
        elif key in _MEM_KEYS:
            kw[_MEM_KEYS[key]] = parse_value(raw, line)
        else:
            raise NetlistSyntaxError(f"{name}: unknown memristor parameter {key!r}", line)
    try:
        params = MemristorParams(**kw)
    except ValueError as exc:
        raise NetlistSyntaxError(f"{name}: {exc}", line) from None
    if not 0.0 <= w0 <= 1.0:
        raise NetlistSyntaxError(f"{name}: W0 must lie in [0, 1], got {w0}", line)
    return MemristorSpec(params, w0)


def _parse_element(tokens, line) -> Element:
    name = tokens[0]
    try:
        kind = ElementKind(name[0].upper())
    except ValueError:
        raise UnknownElement(f"unknown element type {name[0]!r} in {name!r}", line) from None
    arity = kind.arity
    if len(tokens) < 1 + arity:
        raise NetlistSyntaxError(f"{name}: expected {arity} terminals", line)
    terminals = tuple(tokens[1:1 + arity])
    rest = tokens[1 + arity:]
    if kind in PASSIVE_KINDS:
        if len(rest) != 1:
            raise NetlistSyntaxError(f"{name}: expected exactly one value", line)
        value = parse_value(rest[0], line)
        if value <= 0:
            raise NetlistSyntaxError(f"{name}: value must be positive", line)
        return Element(name, kind, terminals, value=value, line=line)
    if kind is ElementKind.VOLTAGE_SOURCE:
        return Element(name, kind, terminals, source=_parse_source(name, rest, line), line=line)
    if kind is ElementKind.MEMRISTOR:
        return Element(name, kind, terminals, memristor=_parse_memristor(name, rest, line), line=line)
    if rest:
        raise NetlistSyntaxError(f"{name}: ideal op-amp takes only three nodes", line)
    return Element(name, kind, terminals, line=line)


def _parse_directive(tokens, line, analyses, probes) -> bool:
    """Handle a dot-statement; returns False on ``.end``."""
    word = tokens[0].lower()
    args = tokens[1:]
    if word == ".end":
        return False
    if word == ".ac":
        if len(args) != 4 or args[0].lower() != "dec":
            raise NetlistSyntaxError(".ac expects: dec <N> <f_start> <f_stop>", line)
        if not re.fullmatch(r"[0-9]+", args[1]) or int(args[1]) < 1:
            raise NetlistSyntaxError(".ac points per decade must be a positive integer", line)
        f0, f1 = parse_value(args[2], line), parse_value(args[3], line)
        if not 0 < f0 < f1:
            raise NetlistSyntaxError(".ac needs 0 < f_start < f_stop", line)
        analyses.append(AcSweep(int(args[1]), f0, f1))
    elif word == ".tran":
        if len(args) != 2:
            raise NetlistSyntaxError(".tran expects: <dt> <t_end>", line)
        dt, t_end = parse_value(args[0], line), parse_value(args[1], line)
        if not dt > 0:
            raise NetlistSyntaxError(".tran dt must be positive", line)
        if not t_end >= dt:
            raise NetlistSyntaxError(".tran t_end must be >= dt", line)
        analyses.append(Transient(dt, t_end))
    elif word == ".probe":
        if not args:
            raise NetlistSyntaxError(".probe needs at least one node", line)
        probes.extend(args)
    else:
        raise NetlistSyntaxError(f"unknown directive {tokens[0]!r}", line)
    return True


def parse(text: str, strict: bool = True) -> Circuit:
    """Parse netlist text into a :class:`Circuit`.

    With ``strict`` (the default) the result is validated and the first
    error-level diagnostic is raised. ``strict=False`` stops after the
    syntax pass so callers can collect every diagnostic via :func:`validate`.
    """
    elements: list[Element] = []
    analyses: list = []
    probes: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens or tokens[0].startswith("*"):
            continue
        if tokens[0].startswith("."):
            if not _parse_directive(tokens, lineno, analyses, probes):
                break
            continue
        elements.append(_parse_element(tokens, lineno))
    circuit = Circuit(tuple(elements), tuple(analyses), tuple(probes))
    if strict:
        for d in validate(circuit):
            if d.severity == "error":
                raise _RAISES.get(d.code, InvalidCircuit)(f"{d.code}: {d.message}", d.line)
    return circuit


# --------------------------------------------------------------------------
# serializer


def _element_line(e: Element) -> str:
    head = " ".join((e.name,) + tuple(e.terminals))
    if e.kind in PASSIVE_KINDS:
        return f"{head} {format_value(e.value)}"
    if e.kind is ElementKind.VOLTAGE_SOURCE:
        s = e.source or SourceSpec()
        parts = [head, "DC", format_value(s.dc)]
        if s.ac is not None:
            parts += ["AC", format_value(s.ac)]
        if s.sin is not None:
            parts.append(f"SIN({format_value(s.sin[0])} {format_value(s.sin[1])})")
        return " ".join(parts)
    if e.kind is ElementKind.MEMRISTOR:
        p = e.memristor.params
        return (
            f"{head} RON={format_value(p.r_on)} ROFF={format_value(p.r_off)} "
            f"D={format_value(p.d)} MU={format_value(p.mu_v)} P={int(p.window_p)} "
            f"W0={format_value(e.memristor.w0)}"
        )
    return head


def serialize(c: Circuit) -> str:
    """Canonical netlist text; ``parse(serialize(c)) == c`` for valid circuits."""
    lines = [_element_line(e) for e in c.elements]
    for a in c.analyses:
        if isinstance(a, AcSweep):
            lines.append(
                f".ac dec {a.points_per_decade} {format_value(a.f_start)} {format_value(a.f_stop)}"
            )
        else:
            lines.append(f".tran {format_value(a.dt)} {format_value(a.t_end)}")
    if c.probes:
        lines.append(".probe " + " ".join(c.probes))
    return "\n".join(lines) + "\n"
