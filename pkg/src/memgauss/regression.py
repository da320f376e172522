"""Tabulated ladder magnitude response and its y = a ln(x) + b least-squares fit."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import MemgaussError, ParseError


class DegenerateAbscissae(MemgaussError):
    """All abscissae share one value (or fewer than two points were given)."""


class CsvFormatError(ParseError):
    pass


@dataclass(frozen=True)
class ResponsePoint:
    f_khz: float
    mag_db: float

    def __post_init__(self):
        if not (self.f_khz > 0 and math.isfinite(self.f_khz)):
            raise ValueError(f"frequency must be positive, got {self.f_khz}")
        if not math.isfinite(self.mag_db):
            raise ValueError(f"magnitude must be finite, got {self.mag_db}")


@dataclass(frozen=True)
class LogFit:
    slope: float  # dB per unit ln(kHz)
    intercept: float  # dB
    rss: float  # dB^2
    r_squared: float
    n: int


# Frequencies in kHz; the first nine entries were converted from Hz.
_LADDER_TABLE = (
    (10.0, 0.000),
    (20.0, 0.136),
    (40.0, 0.516),
    (100.0, 2.496),
    (174.48, 3.969),
    (236.56, 2.585),
    (297.23, 0.028),
    (397.63, -4.200),
    (615.77, -11.130),
    (1000.0, -20.060),
    (2000.0, -32.010),
    (3000.0, -38.080),
    (4000.0, -41.410),
    (5000.0, -43.640),
    (6000.0, -44.870),
    (7000.0, -45.770),
    (8000.0, -46.340),
    (9000.0, -47.020),
    (10000.0, -48.450),
    (15000.0, -48.460),
)

#: coefficients as published for the fit of the table above
PUBLISHED_SLOPE = -9.087
PUBLISHED_INTERCEPT = 38.758


def table1_dataset() -> list[ResponsePoint]:
    """The 20 reported (frequency, magnitude) rows, frequencies in kHz."""
    return [ResponsePoint(f, m) for f, m in _LADDER_TABLE]


def log_fit(points: Sequence[ResponsePoint]) -> LogFit:
    """Ordinary least squares of ``mag_db`` on ``ln(f_khz)``."""
    pts = list(points)
    if len(pts) < 2:
        raise DegenerateAbscissae(f"need at least two points, got {len(pts)}")
    xs = [math.log(p.f_khz) for p in pts]
    ys = [p.mag_db for p in pts]
    n = len(pts)
    x_bar = math.fsum(xs) / n
    y_bar = math.fsum(ys) / n
    sxx = math.fsum((x - x_bar) ** 2 for x in xs)
    if sxx == 0.0:
        raise DegenerateAbscissae("all frequencies are equal")
    sxy = math.fsum((x - x_bar) * (y - y_bar) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = y_bar - slope * x_bar
    rss = math.fsum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    tss = math.fsum((y - y_bar) ** 2 for y in ys)
    r_squared = 1.0 - rss / tss if tss > 0 else 1.0
    return LogFit(slope, intercept, rss, r_squared, n)


def fit_predict(fit: LogFit, f_khz: float) -> float:
    if not f_khz > 0:
        raise ValueError(f"frequency must be positive, got {f_khz}")
    return fit.slope * math.log(f_khz) + fit.intercept


def residuals(fit: LogFit, points: Iterable[ResponsePoint]) -> list[float]:
    return [p.mag_db - fit_predict(fit, p.f_khz) for p in points]


def dataset_to_csv(points: Iterable[ResponsePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["freq_khz", "mag_db"])
    for p in points:
        w.writerow([repr(p.f_khz), repr(p.mag_db)])
    return buf.getvalue()


def dataset_from_csv(text: str) -> list[ResponsePoint]:
    """Parse ``freq_khz,mag_db`` CSV (header required)."""
    rows = [
        (lineno, row)
        for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1)
        if any(cell.strip() for cell in row)
    ]
    if not rows or [c.strip().lower() for c in rows[0][1]] != ["freq_khz", "mag_db"]:
        raise CsvFormatError("expected header 'freq_khz,mag_db'", 1)
    out = []
    for lineno, row in rows[1:]:
        if len(row) != 2:
            raise CsvFormatError(f"expected 2 columns, got {len(row)}", lineno)
        try:
            out.append(ResponsePoint(float(row[0]), float(row[1])))
        except ValueError as exc:
            raise CsvFormatError(str(exc), lineno) from None
    return out
