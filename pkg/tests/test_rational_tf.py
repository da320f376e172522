import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from memgauss.rational_tf import (
    HALF_POWER_DB,
    PUBLISHED_APPROXIMANT,
    DcPole,
    NoCutoffFound,
    PoleEvaluation,
    Polynomial,
    RationalTransferFunction,
    UnstableSystem,
    best_gaussian_sigma,
    cutoff_frequency,
    dc_gain,
    dc_gain_exact,
    eval_at,
    freq_response,
    gaussian_approx_error,
    overshoot,
    phase_at,
    step_response,
)
from memgauss.gaussian import GaussianParams, gaussian_magnitude_target

TF = RationalTransferFunction.from_coefficients


def first_order(w0):
    return TF([1.0], [1.0, 1.0 / w0])


def polyval_oracle(tf, s):
    num = np.polyval(tf.numerator.coefficients[::-1], s)
    den = np.polyval(tf.denominator.coefficients[::-1], s)
    return num / den


def stable_tf(rng, max_pairs=3):
    """Random strictly stable TF with nonzero DC gain, built from its poles."""
    poles = []
    for _ in range(int(rng.integers(1, max_pairs + 1))):
        re = -float(rng.uniform(0.1, 10.0))
        if rng.random() < 0.5:
            poles.append(complex(re, 0.0))
        else:
            im = float(rng.uniform(0.1, 10.0))
            poles += [complex(re, im), complex(re, -im)]
    den = np.real(np.poly(poles))[::-1]
    m = int(rng.integers(0, len(poles) + 1))
    num = rng.uniform(-2.0, 2.0, m + 1)
    num[0] = float(rng.uniform(0.5, 3.0)) * (1 if rng.random() < 0.5 else -1)
    return TF(num, den)


# ---------------------------------------------------------------- evaluation


def test_published_approximant_value_at_one_rad():
    h = eval_at(PUBLISHED_APPROXIMANT, 1j)
    assert h == pytest.approx(polyval_oracle(PUBLISHED_APPROXIMANT, 1j), rel=1e-14)
    assert abs(h) == pytest.approx(1.72628, abs=5e-5)


def test_pole_evaluation_raises():
    tf = TF([1.0], [1.0, 1.0])
    with pytest.raises(PoleEvaluation):
        eval_at(tf, -1.0)


def test_improper_rejected():
    with pytest.raises(ValueError):
        TF([1.0, 0.0, 1.0], [1.0, 1.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-50, 50), st.floats(-50, 50))
def test_conjugate_symmetry(seed, re, im):
    tf = stable_tf(np.random.default_rng(seed))
    s = complex(re, im)
    try:
        h = eval_at(tf, s)
    except PoleEvaluation:
        assume(False)
    h_conj = eval_at(tf, s.conjugate())
    assert h_conj == pytest.approx(h.conjugate(), rel=1e-12, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_eval_matches_polyval(seed):
    rng = np.random.default_rng(seed)
    tf = stable_tf(rng)
    for f in np.logspace(-3, 3, 7):
        s = 2j * math.pi * f
        assert eval_at(tf, s) == pytest.approx(polyval_oracle(tf, s), rel=1e-10)


# ---------------------------------------------------------------- dc gain


def test_dc_gain_published_exact():
    assert dc_gain(PUBLISHED_APPROXIMANT) == pytest.approx(40.0 / 19.0, rel=1e-15)
    assert dc_gain_exact(PUBLISHED_APPROXIMANT) == Fraction(40, 19)


def test_dc_pole():
    with pytest.raises(DcPole):
        dc_gain(TF([1.0], [0.0, 1.0]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dc_gain_is_low_frequency_limit(seed):
    tf = stable_tf(np.random.default_rng(seed))
    g = dc_gain(tf)
    assert abs(eval_at(tf, 2j * math.pi * 1e-9)) == pytest.approx(abs(g), rel=1e-6)


# ---------------------------------------------------------------- cutoff


@pytest.mark.parametrize("w0", [1e-2, 0.3, 1.0, 17.0, 1e3, 1e5, 1e6])
def test_first_order_cutoff(w0):
    assert cutoff_frequency(first_order(w0)) == pytest.approx(w0 / (2 * math.pi), rel=1e-9)


def test_first_order_literal_three_db():
    # a literal 3.000 dB drop sits at sqrt(10**0.3 - 1) * w0
    w0 = 250.0
    x = math.sqrt(10 ** 0.3 - 1.0)
    fc = cutoff_frequency(first_order(w0), drop_db=3.0)
    assert fc == pytest.approx(x * w0 / (2 * math.pi), rel=1e-9)


def dense_cutoff_oracle(tf, f_lo=1e-3, f_hi=1e2, n=100_000):
    f = np.logspace(math.log10(f_lo), math.log10(f_hi), n)
    mag = 20 * np.log10(np.abs(polyval_oracle(tf, 2j * np.pi * f)))
    ref = 20 * math.log10(abs(dc_gain(tf)))
    k = int(np.argmax(mag < ref - HALF_POWER_DB))
    return f[k - 1], f[k]


def test_published_approximant_cutoff():
    fc = cutoff_frequency(PUBLISHED_APPROXIMANT)
    lo, hi = dense_cutoff_oracle(PUBLISHED_APPROXIMANT)
    assert lo <= fc <= hi
    assert fc == pytest.approx(0.207, rel=0.02)


def test_unit_tf_has_no_cutoff():
    with pytest.raises(NoCutoffFound):
        cutoff_frequency(RationalTransferFunction.unit())


def test_peak_reference_cutoff():
    # resonant biquad: the peak-referenced point lies above the DC-referenced one
    w0, q = 10.0, 3.0
    tf = TF([w0**2], [w0**2, w0 / q, 1.0])
    f_dc = cutoff_frequency(tf)
    f_pk = cutoff_frequency(tf, reference="peak")
    f = np.logspace(-1, 2, 100_000)
    mag = 20 * np.log10(np.abs(polyval_oracle(tf, 2j * np.pi * f)))
    k = int(np.argmax(mag))
    j = k + int(np.argmax(mag[k:] < mag[k] - HALF_POWER_DB))
    assert f[j - 1] <= f_pk <= f[j]
    assert w0 / (2 * math.pi) < f_pk < f_dc


def test_frequency_response_cutoff_interpolation():
    w0 = 2 * math.pi * 100.0
    r = freq_response(first_order(w0), np.logspace(0, 4, 401))
    assert r.cutoff() == pytest.approx(cutoff_frequency(first_order(w0)), rel=1e-4)


# ---------------------------------------------------------------- phase


def test_phase_first_order():
    w0 = 3.0
    assert phase_at(first_order(w0), w0 / (2 * math.pi)) == pytest.approx(-45.0, abs=1e-9)


def test_phase_is_principal_value():
    tf = TF([1.0], [1.0, 3.0, 3.0, 1.0])  # (1+s)^-3
    f = math.sqrt(3.0) / (2 * math.pi)  # -180 deg exactly
    assert -180.0 < phase_at(tf, f * 1.01) <= 180.0
    r = freq_response(tf, np.logspace(-2, 2, 200))
    assert np.all((r.phase_deg > -180.0) & (r.phase_deg <= 180.0))
    assert r.phase_unwrapped_deg[-1] == pytest.approx(-270.0, abs=0.5)


def test_published_phase_at_cutoff():
    tf = PUBLISHED_APPROXIMANT
    fc = cutoff_frequency(tf)
    expected = np.degrees(np.angle(polyval_oracle(tf, 2j * np.pi * fc)))
    assert phase_at(tf, fc) == pytest.approx(expected, abs=1e-9)


# ---------------------------------------------------------------- step response


def test_step_first_order_analytic():
    w0 = 2.0
    w = step_response(first_order(w0), 5.0, 1e-3)
    exact = 1.0 - np.exp(-w0 * w.times)
    assert np.max(np.abs(w.samples - exact)) < 1e-6


def test_step_biquad_overshoot_analytic():
    zeta = 0.3
    tf = TF([1.0], [1.0, 2 * zeta, 1.0])
    w = step_response(tf, 40.0, 1e-3)
    expected = 100 * math.exp(-zeta * math.pi / math.sqrt(1 - zeta**2))
    assert overshoot(w, 1.0) == pytest.approx(expected, rel=1e-4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_step_final_value_is_dc_gain(seed):
    tf = stable_tf(np.random.default_rng(seed))
    decay = float(np.min(np.abs(tf.poles().real)))
    t_end = 40.0 / decay
    w = step_response(tf, t_end, t_end / 20000)
    g = dc_gain(tf)
    assert w.final_value == pytest.approx(g, rel=1e-3)


def test_unstable_warns_and_truncates():
    tf = TF([1.0], [-1.0, 1.0])
    with pytest.warns(UnstableSystem):
        w = step_response(tf, 100.0, 1e-2)
    assert len(w) < 10001


def test_published_step():
    w = step_response(PUBLISHED_APPROXIMANT, 50.0, 1e-3)
    assert w.final_value == pytest.approx(40.0 / 19.0, rel=1e-4)
    assert 0.0 <= overshoot(w, 40.0 / 19.0) < 5.0


# ---------------------------------------------------------------- Gaussian fit


def test_approx_error_zero_on_exact_match():
    # a TF cannot be Gaussian, so compare against itself through the target:
    # error is zero iff the grid magnitudes agree
    grid = np.logspace(-2, 1, 50)
    tf = first_order(5.0)
    e = gaussian_approx_error(tf, 0.05, grid, "Linf")
    resid = np.abs(np.abs(polyval_oracle(tf, 2j * np.pi * grid))
                   - gaussian_magnitude_target(GaussianParams(0, 0.05), grid))
    assert e == pytest.approx(float(np.max(resid)), rel=1e-12)
    assert e > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 10.0))
def test_approx_error_non_negative(seed, sigma):
    tf = stable_tf(np.random.default_rng(seed))
    grid = np.logspace(-2, 1, 40)
    for norm in ("L2", "Linf"):
        assert gaussian_approx_error(tf, sigma, grid, norm) >= 0.0
    assert gaussian_approx_error(tf, sigma, grid, "L2") <= gaussian_approx_error(tf, sigma, grid, "Linf")


def test_best_sigma_is_a_minimum():
    grid = np.logspace(-2, 1, 151)
    sigma, err = best_gaussian_sigma(PUBLISHED_APPROXIMANT, grid)
    assert err == pytest.approx(gaussian_approx_error(PUBLISHED_APPROXIMANT, sigma, grid))
    for k in (0.9, 0.99, 1.01, 1.1):
        assert gaussian_approx_error(PUBLISHED_APPROXIMANT, sigma * k, grid) >= err
    scan = [gaussian_approx_error(PUBLISHED_APPROXIMANT, s, grid) for s in np.logspace(-2, 1, 400)]
    assert err <= min(scan) + 1e-12


def test_polynomial_helpers():
    p = Polynomial.descending([1.0, -3.0, 2.0])  # s^2 - 3s + 2
    assert p.coefficients == (2.0, -3.0, 1.0)
    assert p.degree == 2
    assert sorted(p.roots().real) == pytest.approx([1.0, 2.0])
    assert p(3.0) == 2.0
