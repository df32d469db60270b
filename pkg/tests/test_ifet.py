import math

import numpy as np
import pytest
from scipy import integrate

from resetfet import DomainError, NumericalError, ResettingParams, VerificationFailed, analytic, ifet
from resetfet import montecarlo as mc
from resetfet._numdiff import derivative

THETAS = (-3.0, -1.0, 0.5, 2.0, 5.0)
EX1 = ResettingParams(0.0, 1.0, 0.5, b=1.0)
EX6 = ResettingParams(0.0, 1.0, 0.5, b=2.0)

CONTINUOUS = {
    "uniform1": ifet.UniformOn(1.0),
    "uniform2": ifet.UniformOn(2.0),
    "beta22": ifet.BetaDensity(2.0, 2.0),
    "beta1525": ifet.BetaDensity(1.5, 2.5),
    "beta3_07": ifet.BetaDensity(3.0, 0.7),
    "truncexp": ifet.TruncatedExponential(2.0),
    "linear": ifet.Linear2x(),
}


def quad_lt(d, theta, reflected=False):
    def f(x):
        y = d.b - x if reflected else x
        return math.exp(-theta * y) * float(d.pdf(x))

    return integrate.quad(f, 0, d.b, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


@pytest.mark.parametrize("name", CONTINUOUS)
def test_transform_against_quadrature(name):
    d = CONTINUOUS[name]
    for t in THETAS:
        assert ifet.g_lt(d, t) == pytest.approx(quad_lt(d, t), abs=1e-10)
        assert d.lt_reflected(t) == pytest.approx(quad_lt(d, t, reflected=True), abs=1e-10)


@pytest.mark.parametrize("name", CONTINUOUS)
def test_densities_normalised(name):
    d = CONTINUOUS[name]
    assert integrate.quad(lambda x: float(d.pdf(x)), 0, d.b, limit=200)[0] == pytest.approx(1.0, abs=1e-10)
    assert ifet.g_lt(d, 1e-9) == pytest.approx(1.0, abs=1e-8)


def test_discrete_and_mixture_transforms():
    d = ifet.DiscreteUniform((0.0, 1.0, 2.0), b=2.0)
    for t in THETAS:
        assert d.lt(t) == pytest.approx((1 + math.exp(-t) + math.exp(-2 * t)) / 3, rel=1e-14)
    m = ifet.Mixture((ifet.UniformOn(1.0), ifet.BetaDensity(2.0, 2.0)), (0.3, 0.7))
    for t in THETAS:
        assert m.lt(t) == pytest.approx(0.3 * ifet.UniformOn(1.0).lt(t) + 0.7 * ifet.BetaDensity(2.0, 2.0).lt(t),
                                        rel=1e-14)
    with pytest.raises(DomainError):
        ifet.DiscreteUniform((0.0, 3.0), b=2.0)


def test_truncated_exponential_display():
    g = 2.0
    d = ifet.TruncatedExponential(g)
    for t in (0.5, 2.0, 5.0):
        disp = g * (math.exp(g) - math.exp(-t)) / ((math.exp(g) - 1) * (g + t))
        assert d.lt(t) == pytest.approx(disp, rel=1e-13)


def test_linear_density_convention():
    # the displayed transform 2/s^2 (1 - e^s (1 - s)) is E[exp(s eta)] for g(x) = 2x
    d = ifet.Linear2x()
    for s in (0.5, 1.0, 3.0):
        disp = 2 / s**2 * (1 - math.exp(s) * (1 - s))
        assert d.lt(-s) == pytest.approx(disp, rel=1e-13)
        assert math.exp(-s) * disp == pytest.approx(d.lt_reflected(s), rel=1e-13)


def test_beta_matches_polynomial_formula():
    for k in (1, 2, 3):
        d = ifet.BetaDensity(k + 1.0, k + 1.0)
        for t in (0.5, 2.0, 5.0, 12.0):
            assert d.lt(t) == pytest.approx(float(ifet._beta_sym_lt_prop(k, t)), rel=1e-11)


# ---------------------------------------------------------------- J_k


def test_jk_values():
    assert ifet.jk(1.0, 0) == pytest.approx(1 - math.exp(-1), abs=1e-14)
    for k in range(7):
        for t in (-2.0, 0.3, 1.5, 8.0, 30.0):
            ref = integrate.quad(lambda x: math.exp(-t * x) * x**k, 0, 1, epsabs=1e-15)[0]
            assert ifet.jk(t, k) == pytest.approx(ref, rel=1e-12, abs=1e-15)
        assert ifet.jk(1e-12, k) == pytest.approx(1 / (k + 1), rel=1e-10)
    with pytest.raises(DomainError):
        ifet.jk(1.0, -1)


# ------------------------------------------------------------- forward map


def test_point_mass_reduces_to_fet_lt():
    lam = np.linspace(0.1, 10, 25)
    for x in (0.2, 0.5, 0.9):
        f = ifet.forward_fet_lt(ifet.PointMass(x, 1.0), EX1, lam)
        assert np.max(np.abs(f - analytic.fet_lt(EX1, x, lam))) < 1e-12


def test_uniform_start_gives_example1_and_beta_gives_example2():
    lam = ifet.EXAMPLE_GRID
    assert np.max(np.abs(ifet.forward_fet_lt(ifet.UniformOn(1.0), EX1, lam) - ifet._printed_ex1(lam))) < 1e-9
    assert np.max(np.abs(ifet.forward_fet_lt(ifet.BetaDensity(2.0, 2.0), EX1, lam) - ifet._printed_ex2(lam))) < 1e-9


def test_forward_map_is_linear_in_the_density():
    comps = (ifet.UniformOn(1.0), ifet.BetaDensity(1.5, 2.5), ifet.PointMass(0.3))
    w = (0.2, 0.5, 0.3)
    lam = np.linspace(0.1, 10, 30)
    mixed = ifet.forward_fet_lt(ifet.Mixture(comps, w), EX1, lam)
    parts = sum(wi * ifet.forward_fet_lt(c, EX1, lam) for c, wi in zip(comps, w))
    assert np.max(np.abs(mixed - parts)) < 1e-12


@pytest.mark.parametrize("d", [ifet.UniformOn(1.0), ifet.BetaDensity(3.0, 3.0), ifet.UniformOn(2.0),
                               ifet.DiscreteUniform((0.0, 1.0, 2.0), b=2.0)])
def test_symmetry_identity(d):
    for t in (0.5, 1.0, 3.0):
        assert d.lt(t) == pytest.approx(math.exp(-d.b * t) * d.lt(-t), abs=1e-12)


def test_forward_requires_undrifted_and_matching_interval():
    with pytest.raises(DomainError):
        ifet.forward_fet_lt(ifet.UniformOn(1.0), ResettingParams(1.0, 1.0, 0.5), 1.0)
    with pytest.raises(DomainError):
        ifet.forward_fet_lt(ifet.UniformOn(1.0), EX6, 1.0)


@pytest.mark.parametrize("d,p", [(ifet.UniformOn(1.0), EX1), (ifet.TruncatedExponential(2.0), EX1),
                                 (ifet.DiscreteUniform((0.0, 1.0, 2.0), b=2.0), EX6)])
def test_forward_transform_is_completely_monotone_spot_check(d, p):
    f = lambda lam: ifet.forward_fet_lt(d, p, lam)  # noqa: E731
    assert f(1e-9) == pytest.approx(1.0, abs=1e-6)
    vals = f(np.linspace(0.1, 20, 50))
    assert np.all(np.diff(vals) < 0)
    signs = [np.sign(derivative(f, 1.0, k, h0=0.05)[0]) for k in (1, 2, 3)]
    assert signs == [-1, 1, -1]


# ---------------------------------------------------------------- recovery

TH0 = math.sqrt(2.0)
THETA_GRID = np.concatenate([np.linspace(0.05, TH0 - 1e-3, 30), [TH0 - 1e-4, TH0 + 1e-4],
                             np.linspace(TH0 + 1e-3, 3 * TH0, 30)])


@pytest.mark.parametrize("d,p", [(ifet.UniformOn(1.0), EX1), (ifet.BetaDensity(2.0, 2.0), EX1),
                                 (ifet.BetaDensity(3.0, 3.0), EX1),
                                 (ifet.DiscreteUniform((0.0, 1.0, 2.0), b=2.0), EX6)],
                         ids=["uniform", "beta22", "beta33", "discrete_b2"])
def test_round_trip_recovery(d, p):
    prob = ifet.IFETProblem(p, ifet.forward_transform(d, p))
    rec = ifet.recover_g_lt_symmetric(prob, THETA_GRID)
    assert np.max(np.abs(rec - d.lt(THETA_GRID))) < 1e-8


def test_recovery_from_example1_display():
    prob = ifet.IFETProblem(EX1, ifet._printed_ex1)
    rec = ifet.recover_g_lt_symmetric(prob, THETA_GRID)
    assert np.max(np.abs(rec - (1 - np.exp(-THETA_GRID)) / THETA_GRID)) < 1e-8


def test_recovery_from_example6_display():
    # the displayed Example 6 transform is not the forward image of the stated start law
    prob = ifet.IFETProblem(EX6, ifet._printed_ex6)
    th = np.linspace(0.1, 3 * TH0, 20)
    th = th[np.abs(th - TH0) > 1e-2]
    rec = ifet.recover_g_lt_symmetric(prob, th)
    assert np.max(np.abs(rec - (1 + np.exp(-th) + np.exp(-2 * th)) / 3)) < 1e-8


def test_recovery_errors():
    with pytest.raises(DomainError):
        ifet.recover_g_lt_symmetric(ifet.IFETProblem(EX1, ifet._printed_ex1, symmetry_assumed=False), 1.0)
    with pytest.raises(DomainError):
        ifet.recover_g_lt_symmetric(ifet.IFETProblem(EX1, ifet._printed_ex1), -1.0)
    with pytest.raises(DomainError):
        ifet.IFETProblem(EX1, lambda lam: 2.0 + 0 * lam).check()


# ------------------------------------------------------------ beta mixtures


def test_beta_mixture():
    lam = ifet.EXAMPLE_GRID
    assert np.max(np.abs(ifet.beta_mixture_fet_lt([1.0], lam) - ifet._printed_ex2(lam))) < 1e-12
    w = (0.3, 0.7)
    dens = ifet.beta_mixture_density(w)
    assert np.max(np.abs(ifet.beta_mixture_fet_lt(w, lam) - ifet.forward_fet_lt(dens, EX1, lam))) < 1e-12
    prob = ifet.IFETProblem(EX1, lambda l: ifet.beta_mixture_fet_lt(w, l))
    assert np.max(np.abs(ifet.recover_g_lt_symmetric(prob, THETA_GRID) - dens.lt(THETA_GRID))) < 1e-8
    assert ifet.beta_mixture_fet_lt(w, 1e-10) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(DomainError):
        ifet.beta_mixture_fet_lt((0.5, 0.6), 1.0)


# ----------------------------------------------------------------- moments


def test_example1_moments():
    m = ifet.moments_from_lt(ifet._printed_ex1)
    for got, ref in zip((m.m1, m.m2, m.m3, m.m4), (0.175, 0.074, 0.047, 0.041)):
        assert got == pytest.approx(ref, abs=1e-3)
    assert m.gamma1 == pytest.approx(2.139, abs=5e-3)
    assert m.gamma2 == pytest.approx(6.632, abs=0.02)


def test_example1_moments_agree_with_inversion():
    # independent route: inverted density quadrature
    from resetfet import laplace

    m = ifet.moments_from_lt(ifet._printed_ex1)
    dm = laplace.density_moments(ifet.forward_transform(ifet.UniformOn(1.0), EX1), 12.0)
    assert m.gamma2 == pytest.approx(dm.excess_kurtosis, abs=1e-3)
    assert m.m4 == pytest.approx(dm.m4, rel=1e-5)


def test_example6_moments():
    m = ifet.moments_from_lt(ifet._printed_ex6, n=2)
    assert m.m1 == pytest.approx(0.991, abs=1e-3)
    assert m.m2 == pytest.approx(8.148, abs=5e-3)


def test_point_mass_moment():
    p = ResettingParams(0.0, 2.0, 0.3)
    m = ifet.moments_from_lt(ifet.forward_transform(ifet.PointMass(0.6), p), n=2)
    assert m.m1 == pytest.approx(float(analytic.fet_mean(p, 0.6)), rel=1e-5)
    assert m.m2 == pytest.approx(float(analytic.fet_second_moment(p, 0.6)), rel=1e-5)
    with pytest.raises(DomainError):
        ifet.moments_from_lt(ifet._printed_ex1, n=5)
    with pytest.raises(NumericalError):
        # no derivative at the origin: the central differences oscillate
        ifet.moments_from_lt(lambda lam: 1 - lam * np.cos(1 / np.where(lam == 0, 1, lam)), n=1)


# ----------------------------------------------------------- compatibility


def test_compatibility_example1():
    rep = ifet.compatibility_check(ifet.IFETProblem(EX1, ifet._printed_ex1))
    assert rep.feasible_hint and rep.E_tau == pytest.approx(0.17515, abs=1e-5)
    assert rep.T_bar == pytest.approx(float(analytic.fet_mean(EX1, 0.5)), rel=1e-9)


def test_compatibility_violation_and_boundary():
    t_bar = ifet.compatibility_check(ifet.IFETProblem(EX1, ifet._printed_ex1)).T_bar
    bad = ifet.compatibility_check(ifet.IFETProblem(EX1, lambda lam: np.exp(-2 * t_bar * lam)))
    assert not bad.feasible_hint and bad.E_tau == pytest.approx(2 * t_bar, rel=1e-6)
    p = ResettingParams(0.0, 1.0, 0.2)
    arg = ifet.compatibility_check(ifet.IFETProblem(p, ifet._printed_ex1)).argmax
    edge = ifet.compatibility_check(ifet.IFETProblem(p, ifet.forward_transform(ifet.PointMass(arg), p)))
    assert edge.feasible_hint
    assert edge.E_tau == pytest.approx(edge.T_bar, rel=1e-6)


# --------------------------------------------------------------- examples


@pytest.mark.parametrize("example", [1, 2, 4, 5])
def test_verify_examples(example):
    rep = ifet.verify_example(example)
    assert rep.passed


def test_example5_is_a_nonuniqueness_witness():
    rep = ifet.verify_example(5)
    assert rep.details["linear_error"] < 1e-9 and rep.details["uniform_error"] < 1e-9
    assert rep.details["transform_gap"] > 1e-3


def test_example3_series_as_displayed():
    rep = ifet.verify_example(3, raise_on_fail=False)
    assert all(v["error_reindexed_series"] < 1e-7 for v in rep.details.values())
    assert rep.passed


def test_example6_display():
    rep = ifet.verify_example(6, raise_on_fail=False)
    assert rep.passed
    with pytest.raises(VerificationFailed):
        ifet.verify_example(6)


# -------------------------------------------------------- random-start MC


@pytest.fixture(scope="module")
def ex1_mc():
    return mc.estimate_with_random_start(ifet.UniformOn(1.0), EX1, mc.SimConfig(n_paths=100_000, seed=3))


def test_example1_monte_carlo(ex1_mc):
    assert ex1_mc.tau_mean.within(0.175)
    assert ex1_mc.tau_second.within(0.074)


def test_example6_monte_carlo_against_stated_mean():
    e = mc.estimate_with_random_start(ifet.DiscreteUniform((0.0, 1.0, 2.0), b=2.0), EX6,
                                      mc.SimConfig(n_paths=30_000, seed=3))
    assert e.tau_mean.within(0.991)


@pytest.mark.parametrize("d,p", [(ifet.UniformOn(1.0), EX1), (ifet.BetaDensity(2.0, 2.0), EX1),
                                 (ifet.TruncatedExponential(2.0), EX1),
                                 (ifet.DiscreteUniform((0.0, 1.0, 2.0), b=2.0), EX6)],
                         ids=["uniform", "beta22", "truncexp", "discrete_b2"])
def test_random_start_matches_forward_moments(d, p):
    m = ifet.moments_from_lt(ifet.forward_transform(d, p), n=2)
    e = mc.estimate_with_random_start(d, p, mc.SimConfig(n_paths=20_000, seed=4))
    assert e.tau_mean.within(m.m1)
    assert e.tau_second.within(m.m2)
