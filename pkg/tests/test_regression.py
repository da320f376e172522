import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from memgauss.regression import (
    PUBLISHED_INTERCEPT,
    PUBLISHED_SLOPE,
    CsvFormatError,
    DegenerateAbscissae,
    LogFit,
    ResponsePoint,
    dataset_from_csv,
    dataset_to_csv,
    fit_predict,
    log_fit,
    residuals,
    table1_dataset,
)


def normal_equations(xs, ys):
    """Closed-form OLS via the 2x2 normal equations (Cramer's rule)."""
    n = len(xs)
    sx, sy = sum(xs), sum(ys)
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, ys))
    det = n * sxx - sx * sx
    return (n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det


def test_dataset_rows():
    d = table1_dataset()
    assert len(d) == 20
    assert d[0] == ResponsePoint(10.0, 0.0)
    assert d[4] == ResponsePoint(174.48, 3.969)
    assert d[19] == ResponsePoint(15000.0, -48.46)


def test_table_fit_matches_published():
    fit = log_fit(table1_dataset())
    assert fit.slope == pytest.approx(PUBLISHED_SLOPE, abs=0.01)
    assert fit.intercept == pytest.approx(PUBLISHED_INTERCEPT, abs=0.02)
    d = table1_dataset()
    slope, intercept = normal_equations([math.log(p.f_khz) for p in d], [p.mag_db for p in d])
    assert fit.slope == pytest.approx(slope, rel=1e-12)
    assert fit.intercept == pytest.approx(intercept, rel=1e-12)
    assert 0.0 < fit.r_squared < 1.0 and fit.n == 20


def test_two_point_exact():
    fit = log_fit([ResponsePoint(math.e, 0.0), ResponsePoint(math.e**2, -1.0)])
    assert fit.slope == pytest.approx(-1.0, rel=1e-14)
    assert fit.intercept == pytest.approx(1.0, rel=1e-14)
    assert fit.rss == pytest.approx(0.0, abs=1e-28)


def test_points_on_curve():
    pts = [ResponsePoint(f, -3.0 * math.log(f) + 2.0) for f in (0.5, 2.0, 7.0, 100.0)]
    fit = log_fit(pts)
    assert fit.rss == pytest.approx(0.0, abs=1e-24)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_degenerate():
    with pytest.raises(DegenerateAbscissae):
        log_fit([ResponsePoint(1.0, 0.0)])
    with pytest.raises(DegenerateAbscissae):
        log_fit([ResponsePoint(3.0, 0.0), ResponsePoint(3.0, 1.0)])


def test_predict():
    fit = LogFit(PUBLISHED_SLOPE, PUBLISHED_INTERCEPT, 0.0, 1.0, 2)
    assert fit_predict(fit, 15000.0) == pytest.approx(-48.6, abs=0.05)
    assert fit_predict(fit, 1.0) == PUBLISHED_INTERCEPT
    assert fit_predict(fit, math.e) == pytest.approx(PUBLISHED_SLOPE + PUBLISHED_INTERCEPT)
    with pytest.raises(ValueError):
        fit_predict(fit, 0.0)


points = st.lists(
    st.tuples(st.floats(1e-3, 1e6), st.floats(-100.0, 100.0)), min_size=3, max_size=40
)


def spread(pts):
    xs = [math.log(f) for f, _ in pts]
    return max(xs) - min(xs)


@settings(max_examples=100, deadline=None)
@given(points)
def test_residuals_sum_to_zero(pts):
    assume(spread(pts) > 1e-3)
    data = [ResponsePoint(f, m) for f, m in pts]
    fit = log_fit(data)
    scale = max(abs(m) for _, m in pts) + 1.0
    assert abs(math.fsum(residuals(fit, data))) <= 1e-9 * scale * len(pts)


@settings(max_examples=100, deadline=None)
@given(points, st.randoms(use_true_random=False))
def test_order_invariance(pts, rnd):
    assume(spread(pts) > 1e-3)
    data = [ResponsePoint(f, m) for f, m in pts]
    shuffled = list(data)
    rnd.shuffle(shuffled)
    a, b = log_fit(data), log_fit(shuffled)
    assert b.slope == pytest.approx(a.slope, rel=1e-9, abs=1e-9)
    assert b.intercept == pytest.approx(a.intercept, rel=1e-9, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(points, st.floats(1e-3, 1e3))
def test_abscissa_scaling_moves_intercept_only(pts, c):
    assume(spread(pts) > 1e-2)
    a = log_fit([ResponsePoint(f, m) for f, m in pts])
    b = log_fit([ResponsePoint(f * c, m) for f, m in pts])
    tol = 1e-7 * (1 + abs(a.slope))
    assert b.slope == pytest.approx(a.slope, abs=tol)
    assert b.intercept == pytest.approx(a.intercept - a.slope * math.log(c), abs=tol * (1 + abs(math.log(c))) * 10)


def test_unit_ambiguity_quantified():
    # the same rows read in Hz instead of kHz keep the slope, move the intercept
    khz = log_fit(table1_dataset())
    hz = log_fit([ResponsePoint(p.f_khz * 1e3, p.mag_db) for p in table1_dataset()])
    assert hz.slope == pytest.approx(khz.slope, rel=1e-12)
    assert hz.intercept == pytest.approx(khz.intercept - khz.slope * math.log(1e3), rel=1e-12)
    assert abs(hz.intercept - PUBLISHED_INTERCEPT) > 50


def test_csv_round_trip():
    d = table1_dataset()
    assert dataset_from_csv(dataset_to_csv(d)) == d


@pytest.mark.parametrize(
    "text, line",
    [
        ("", 1),
        ("f,m\n1,2\n", 1),
        ("freq_khz,mag_db\n1,2\n3\n", 3),
        ("freq_khz,mag_db\n1,2\n\nx,4\n", 4),
        ("freq_khz,mag_db\n-1,2\n", 2),
    ],
)
def test_csv_errors(text, line):
    with pytest.raises(CsvFormatError) as info:
        dataset_from_csv(text)
    assert info.value.line == line
