import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from resetfet import DegenerateConditioning, DomainError, ResettingParams, analytic

SETS = [
    ResettingParams(0.0, 0.5, 0.125),
    ResettingParams(0.0, 1.0, 0.5),
    ResettingParams(1.0, 1.0, 0.25),
    ResettingParams(1.0, 5.0, 0.25),
    ResettingParams(-0.7, 2.0, 0.6, b=2.0),
]


def pi0_printed(p, x):
    """Left-exit probability transcribed from the closed form (independent of the stable evaluation)."""
    b0 = math.sqrt(p.mu**2 + 2 * p.r)
    b, xr, mu = p.b, p.x_reset, p.mu
    num = math.sinh((b - xr) * b0) + math.exp(mu * (b - x)) * math.sinh((xr - x) * b0)
    den = math.sinh((b - xr) * b0) + math.exp(b * mu) * math.sinh(xr * b0)
    return num / den


# ------------------------------------------------------------------ exit law


@pytest.mark.parametrize("p", SETS)
def test_exit_probability_matches_transcription(p):
    for x in np.linspace(0.05, 0.95, 7) * p.b:
        assert analytic.exit_prob_left(p, x) == pytest.approx(pi0_printed(p, x), abs=1e-13)


def test_exit_probability_fig8_setting():
    p = ResettingParams(1.0, 1.0, 0.25)
    assert analytic.exit_prob_left(p, 0.3) == pytest.approx(0.52286, abs=1e-5)
    law = analytic.exit_law(p, 0.3)
    assert law.p_left + law.p_right == pytest.approx(1.0, abs=1e-15)


def test_exit_probability_boundaries_and_vector():
    p = SETS[2]
    v = analytic.exit_prob_left(p, np.array([0.0, 1.0]))
    assert v[0] == pytest.approx(1.0) and v[1] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("xr,expected", [(0.2, 1.0), (0.5, 1 / (1 + math.e)), (0.8, 0.0)])
def test_large_reset_rate_trichotomy(xr, expected):
    p = ResettingParams(1.0, 1e5, xr)
    assert analytic.exit_prob_left(p, xr) == pytest.approx(expected, abs=1e-6)


def test_trichotomy_midpoint_exact_for_every_rate():
    for r in (0.1, 1.0, 10.0):
        assert analytic.exit_prob_left(ResettingParams(2.0, r, 0.5), 0.5) == pytest.approx(1 / (1 + math.exp(2)),
                                                                                              abs=1e-14)


def test_small_rate_limit_drifted():
    mu, b = 0.8, 1.5
    for x in (0.2, 0.7, 1.3):
        exact = (math.exp(2 * (b - x) * mu) - 1) / (math.exp(2 * b * mu) - 1)
        assert analytic.exit_prob_left(ResettingParams(mu, 0.0, 0.5, b=b), x) == pytest.approx(exact, abs=1e-14)
        assert analytic.exit_prob_left(ResettingParams(mu, 1e-10, 0.5, b=b), x) == pytest.approx(exact, abs=1e-8)


def test_no_drift_no_reset_linear():
    p = ResettingParams(0.0, 0.0, 0.5, b=2.0)
    xs = np.linspace(0, 2, 9)
    assert np.allclose(analytic.exit_prob_left(p, xs), (2 - xs) / 2, atol=1e-15)


def test_large_drift_no_overflow():
    p = ResettingParams(400.0, 3.0, 0.5)
    v = analytic.exit_prob_left(p, np.linspace(0.01, 0.99, 11))
    assert np.all(np.isfinite(v)) and np.all((v >= 0) & (v <= 1))


@settings(max_examples=60, deadline=None)
@given(mu=st.floats(-3, 3), r=st.floats(0, 20), fr=st.floats(0.05, 0.95), b=st.floats(0.3, 3))
def test_exit_probability_is_a_decreasing_probability(mu, r, fr, b):
    p = ResettingParams(mu, r, fr * b, b=b)
    v = np.asarray(analytic.exit_prob_left(p, np.linspace(0, b, 41)))
    assert np.all((v >= -1e-12) & (v <= 1 + 1e-12))
    assert np.all(np.diff(v) <= 1e-12)


# --------------------------------------------------------------- transforms


def test_darling_siegert_grid():
    p = ResettingParams(0.0, 0.0, 0.5)
    for x in np.linspace(0.05, 0.95, 20):
        lam = np.linspace(0.1, 20, 20)
        k = np.sqrt(2 * lam)
        ds = np.cosh(k * (x - 0.5)) / np.cosh(k / 2)
        assert np.max(np.abs(analytic.fet_lt(p, x, lam) - ds)) < 1e-10


@pytest.mark.parametrize("p", SETS)
def test_survival_transform_relation(p):
    lam = np.array([0.05, 0.7, 3.0, 40.0])
    x = 0.4 * p.b
    q = analytic.survival_lt(p, x, lam)
    m = analytic.fet_lt(p, x, lam)
    assert np.allclose(q, (1 - m) / lam, atol=1e-13)


@pytest.mark.parametrize("p", SETS)
def test_transform_moments_by_differentiation(p):
    for x in (0.3 * p.b, p.x_reset, 0.8 * p.b):
        assert analytic.fet_moment_numeric(p, x, 1) == pytest.approx(float(analytic.fet_mean(p, x)), rel=1e-7)
        assert analytic.fet_moment_numeric(p, x, 2) == pytest.approx(float(analytic.fet_second_moment(p, x)),
                                                                     rel=1e-6)


def test_transform_at_reset_and_large_interval():
    p = ResettingParams(0.0, 1.0, 0.3)
    assert analytic.fet_lt_at_reset(p, 0.9) == pytest.approx(analytic.fet_lt(p, 0.3, 0.9), abs=1e-14)
    big = ResettingParams(0.0, 1.0, 1.0, b=50.0)
    lam = 0.6
    a = math.sqrt(2 * (1 + lam))
    lim = (lam + 1) * math.exp(-a) / (lam + math.exp(-a))
    assert analytic.fet_lt_at_reset(big, lam) == pytest.approx(lim, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(-2, 2), r=st.floats(0, 10), fx=st.floats(0.05, 0.95), lam=st.floats(0.01, 50))
def test_transform_is_in_unit_interval_and_decreasing(mu, r, fx, lam):
    p = ResettingParams(mu, r, 0.4)
    m1, m2 = analytic.fet_lt(p, fx, lam), analytic.fet_lt(p, fx, 1.5 * lam)
    assert 0 < m2 <= m1 <= 1


def test_complex_transform_is_analytic():
    p = SETS[2]
    lam = 0.7 + 0.0j
    assert analytic.fet_lt(p, 0.3, lam).real == pytest.approx(analytic.fet_lt(p, 0.3, 0.7), abs=1e-14)
    z = analytic.fet_lt(p, 0.3, np.array([1 + 2j, 1 - 2j]))
    assert z[0] == pytest.approx(np.conj(z[1]), abs=1e-14)


def test_transform_rejects_nonpositive_lambda():
    with pytest.raises(DomainError):
        analytic.survival_lt(SETS[0], 0.3, 0.0)


# ------------------------------------------------------------- FET moments


def test_mean_no_reset_no_drift():
    p = ResettingParams(0.0, 0.0, 0.5, b=2.0)
    for x in (0.3, 1.0, 1.7):
        assert analytic.fet_mean(p, x) == pytest.approx(x * (2 - x), abs=1e-14)


def test_mean_drifted_no_reset():
    mu, b = 1.0, 1.0
    for x in (0.2, 0.5, 0.9):
        exact = (b * (1 - math.exp(-2 * mu * x)) / (1 - math.exp(-2 * mu * b)) - x) / mu
        assert analytic.fet_mean(ResettingParams(mu, 0.0, 0.5), x) == pytest.approx(exact, abs=1e-14)


def test_mean_at_reset_closed_display():
    r, b, xr = 0.8, 1.3, 0.4
    k = math.sqrt(2 * r)
    disp = (math.sinh(b * k) / (math.sinh(xr * k) + math.sinh((b - xr) * k)) - 1) / r
    assert analytic.fet_mean(ResettingParams(0.0, r, xr, b=b), xr) == pytest.approx(disp, rel=1e-13)


def test_mean_large_interval_limit():
    r, xr = 1.0, 0.6
    p = ResettingParams(0.0, r, xr, b=50.0)
    assert analytic.fet_mean(p, xr) == pytest.approx((math.exp(xr * math.sqrt(2 * r)) - 1) / r, abs=1e-6)


def test_mean_undrifted_peak_at_midpoint():
    p = ResettingParams(0.0, 3.0, 0.15)
    xs = np.linspace(0.0, 1.0, 2001)
    assert xs[np.argmax(analytic.fet_mean(p, xs))] == pytest.approx(0.5, abs=1e-12)


def test_mean_grows_without_bound_in_rate():
    maxima = [float(np.max(analytic.fet_mean(ResettingParams(0.0, r, 0.3), np.linspace(0, 1, 201))))
              for r in (1, 100, 5000)]
    assert maxima[0] < maxima[1] < maxima[2] and maxima[2] > 1e3


def test_second_moment_small_rate_limit():
    b = 2.0
    for x in (0.3, 1.0, 1.5):
        corrected = x / 3 * (b**3 - 2 * b * x**2 + x**3)
        assert analytic.fet_second_moment(ResettingParams(0.0, 0.0, 0.5, b=b), x) == pytest.approx(corrected,
                                                                                                      rel=1e-12)
        assert analytic.fet_second_moment(ResettingParams(0.0, 1e-7, 0.5, b=b), x) == pytest.approx(corrected,
                                                                                                       rel=1e-5)


def test_second_moment_drifted_small_rate_continuity():
    p0 = ResettingParams(1.0, 0.0, 0.25)
    p1 = ResettingParams(1.0, 1e-8, 0.25)
    for x in (0.2, 0.6):
        assert analytic.fet_second_moment(p0, x) == pytest.approx(float(analytic.fet_second_moment(p1, x)), rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(-2, 2), r=st.floats(0, 10), fr=st.floats(0.05, 0.95), fx=st.floats(0.01, 0.99))
def test_moments_are_consistent(mu, r, fr, fx):
    p = ResettingParams(mu, r, fr)
    m = analytic.fet_moments(p, fx)
    assert m.mean > 0 and m.variance >= -1e-12 * m.second


def test_mean_with_negative_drift_mirrors():
    p = ResettingParams(0.9, 2.0, 0.3)
    q = ResettingParams(-0.9, 2.0, 0.7)
    for x in (0.2, 0.5, 0.8):
        assert analytic.fet_mean(p, x) == pytest.approx(float(analytic.fet_mean(q, 1 - x)), rel=1e-12)
        assert analytic.fet_second_moment(p, x) == pytest.approx(float(analytic.fet_second_moment(q, 1 - x)),
                                                                 rel=1e-11)


def test_moment_order_check():
    with pytest.raises(DomainError):
        analytic.fet_moment_numeric(SETS[0], 0.4, 5)


# ----------------------------------------------------------------- FEA


def test_area_mean_no_reset():
    p = ResettingParams(0.0, 0.0, 0.5, b=1.5)
    for x in (0.1, 0.75, 1.2):
        assert analytic.fea_mean_undrifted(p, x) == pytest.approx(x * (1.5**2 - x**2) / 3, rel=1e-12)


def test_area_requires_no_drift():
    with pytest.raises(DomainError):
        analytic.fea_mean_undrifted(ResettingParams(1.0, 1.0, 0.5), 0.3)


def test_area_moments_bounded_by_time_moments():
    # 0 <= A <= b tau pathwise
    p = ResettingParams(0.0, 2.0, 0.3)
    for x in (0.2, 0.5, 0.9):
        m = analytic.fea_moments_undrifted(p, x)
        assert 0 < m.mean < float(analytic.fet_mean(p, x))
        assert 0 < m.second < float(analytic.fet_second_moment(p, x))


def test_area_second_moment_small_rate_continuity():
    p0 = ResettingParams(0.0, 0.0, 0.5)
    p1 = ResettingParams(0.0, 1e-5, 0.5)
    for x in (0.3, 0.6):
        assert analytic.fea_second_moment_undrifted(p0, x) == pytest.approx(
            float(analytic.fea_second_moment_undrifted(p1, x)), rel=1e-4)


def test_joint_moment_and_covariance():
    p = ResettingParams(0.0, 0.5, 0.4)
    v = analytic.joint_moment_tau_area_undrifted(p, 0.4)
    c = analytic.cov_tau_area_undrifted(p, 0.4)
    assert c == pytest.approx(v - float(analytic.fet_mean(p, 0.4)) * float(analytic.fea_mean_undrifted(p, 0.4)),
                              abs=1e-15)
    assert c > 0
    # Cauchy-Schwarz against the second moments
    assert v**2 <= float(analytic.fet_second_moment(p, 0.4)) * float(analytic.fea_second_moment_undrifted(p, 0.4))


@pytest.mark.parametrize("r", [1e-9, 1e-6, 1e-3, 0.2, 0.6])
def test_small_rate_path_matches_extended_precision(r):
    import mpmath as mp

    x, xr = 0.3, 0.4
    with mp.workdps(80):
        args = (mp.mpf(1), mp.mpf(x), mp.mpf(r), mp.mpf(xr), mp)
        ref2 = float(analytic._fea_second(*args))
        refj = float(analytic._joint(*args))
    p = ResettingParams(0.0, r, xr)
    assert analytic.fea_second_moment_undrifted(p, x) == pytest.approx(ref2, rel=1e-12)
    assert analytic.joint_moment_tau_area_undrifted(p, x) == pytest.approx(refj, rel=1e-12)


def test_area_formula_overflow_guard():
    from resetfet import NumericalError

    with pytest.raises(NumericalError):
        analytic.fea_mean_undrifted(ResettingParams(0.0, 1e5, 0.5, b=1.0), 0.5)


# ------------------------------------------------------------ extremes


def test_max_law_reaches_exit_probability():
    for p in SETS[:4]:
        x = 0.3 * p.b
        assert analytic.max_exit_joint_cdf(p, x, p.b) == pytest.approx(float(analytic.exit_prob_left(p, x)),
                                                                       abs=1e-13)
        assert analytic.max_exit_joint_cdf(p, x, x) == 0.0


def test_max_law_monotone_and_continuous_at_reset_point():
    p = ResettingParams(1.0, 1.0, 0.5)
    zs = np.linspace(0.3, 1.0, 701)
    v = np.asarray(analytic.max_exit_joint_cdf(p, 0.3, zs))
    assert np.all(np.diff(v) >= -1e-14)
    lo, hi = analytic.max_exit_joint_cdf(p, 0.3, 0.5 - 1e-9), analytic.max_exit_joint_cdf(p, 0.3, 0.5 + 1e-9)
    assert abs(hi - lo) < 1e-7


def test_max_cdf_at_reset_display():
    # x = x_R on (0, z): sinh((z-x) b0) / (sinh((z-x) b0) + e^{z mu} sinh(x b0))
    mu, r, x = 1.0, 1.0, 0.3
    b0 = math.sqrt(mu**2 + 2 * r)
    p = ResettingParams(mu, r, x)
    for z in (0.4, 0.7, 1.0):
        disp = math.sinh((z - x) * b0) / (math.sinh((z - x) * b0) + math.exp(z * mu) * math.sinh(x * b0))
        assert analytic.max_exit_joint_cdf(p, x, z) == pytest.approx(disp, abs=1e-14)


def test_conditional_density_normalised_and_consistent():
    p = ResettingParams(1.0, 1.0, 0.3)
    mass = integrate.quad(lambda z: analytic.max_conditional_density_at_reset(p, z), 0.3, 1.0, epsabs=1e-13)[0]
    assert mass == pytest.approx(1.0, abs=1e-10)
    z, h = 0.6, 1e-5
    d = (analytic.max_conditional_cdf(p, 0.3, z + h) - analytic.max_conditional_cdf(p, 0.3, z - h)) / (2 * h)
    assert analytic.max_conditional_density_at_reset(p, z) == pytest.approx(d, rel=1e-7)


def test_conditional_density_no_reset_display():
    mu, x = 1.0, 0.3
    p = ResettingParams(mu, 0.0, x)
    for z in (0.4, 0.8):
        disp = mu * math.sinh(mu * x) * math.exp(-mu * x) / math.sinh(mu * z) ** 2
        assert analytic.max_conditional_density_at_reset(p, z, conditional=False) == pytest.approx(disp, rel=1e-12)


def test_min_law_limits():
    p = ResettingParams(1.0, 1.0, 0.25)
    assert analytic.min_exit_joint_survival(p, 0.3, 0.0) == pytest.approx(float(analytic.exit_prob_right(p, 0.3)),
                                                                          abs=1e-13)
    assert analytic.min_exit_joint_survival(p, 0.3, 0.3) == 0.0
    zs = np.linspace(0, 0.3, 301)
    v = np.asarray(analytic.min_exit_joint_survival(p, 0.3, zs))
    assert np.all(np.diff(v) <= 1e-14)
    c = np.asarray(analytic.min_conditional_survival(p, 0.3, zs))
    assert c[0] == pytest.approx(1.0, abs=1e-13)


def test_min_law_domain_and_degenerate_conditioning():
    p = ResettingParams(1.0, 1.0, 0.25)
    with pytest.raises(DomainError):
        analytic.min_exit_joint_survival(p, 0.3, 0.5)
    q = ResettingParams(60.0, 1.0, 0.5)
    with pytest.raises(DegenerateConditioning):
        analytic.max_conditional_cdf(q, 0.95, 0.99)
