import math

import numpy as np
import pytest
from scipy import integrate, special

from idsubdiff import exponents as ex
from idsubdiff import path_engine as pe
from idsubdiff import reference as ref
from idsubdiff.errors import ConfigError, ParameterDomainError
from idsubdiff.exponents import LawSpec
from idsubdiff.laplace import talbot
from idsubdiff.sampler import NoiseSpec


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_inverse_density_normalized(alpha):
    total, _ = integrate.quad(lambda s: ref.inv_stable_density(alpha, s, 1.0), 0, np.inf, limit=200)
    assert total == pytest.approx(1.0, abs=1e-5)


def test_inverse_density_first_moment():
    m1, _ = integrate.quad(lambda s: s * ref.inv_stable_density(0.5, s, 1.0), 0, np.inf, limit=200)
    assert m1 == pytest.approx(1.1283792, rel=1e-4)


def test_inverse_density_self_similar():
    assert ref.inv_stable_density(0.5, 2.0, 4.0) == pytest.approx(
        0.5 * ref.inv_stable_density(0.5, 1.0, 1.0), rel=1e-8)


def test_inverse_density_half_closed_form():
    # S(t) for alpha = 1/2 is |N(0, 2t)|: h(s, t) = exp(-s^2 / 4t) / sqrt(pi t)
    s = np.array([0.1, 0.7, 2.0, 5.0])
    np.testing.assert_allclose(ref.inv_stable_density(0.5, s, 1.3),
                               np.exp(-s ** 2 / (4 * 1.3)) / np.sqrt(np.pi * 1.3), rtol=1e-9)


def test_inverse_density_domain():
    with pytest.raises(ParameterDomainError):
        ref.inv_stable_density(0.5, 0.0, 1.0)
    with pytest.raises(ParameterDomainError):
        ref.inv_stable_density(1.0, 1.0, 1.0)


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_subordination_integral_moments(alpha):
    for t in (0.5, 2.0):
        assert ref.subordination_integral(lambda s: 1.0, alpha, t) == pytest.approx(1.0, abs=1e-6)
        assert ref.subordination_integral(lambda s: s, alpha, t) == pytest.approx(
            t ** alpha / special.gamma(1 + alpha), rel=1e-6)
        # E S^2 = 2 t^(2 alpha) / Gamma(1 + 2 alpha)
        assert ref.subordination_integral(lambda s: s * s, alpha, t) == pytest.approx(
            2 * t ** (2 * alpha) / special.gamma(1 + 2 * alpha), rel=1e-6)


def test_free_density_second_moment_and_mass():
    x = np.linspace(-20, 20, 20001)
    w = ref.subordination_curve(ref.free_density(1.0), 0.7, x, 1.0)
    assert np.all(w >= 0)
    assert np.trapezoid(w, x) == pytest.approx(1.0, abs=1e-4)
    assert np.trapezoid(x * x * w, x) == pytest.approx(1 / special.gamma(1.7), rel=1e-4)


def test_curve_matches_adaptive_quadrature():
    p = ref.ou_density(1.0, 1.0)
    x = np.array([-1.0, 0.2, 1.5])
    curve = ref.subordination_curve(p, 0.8, x, 2.0)
    direct = [ref.subordination_density(p, 0.8, xi, 2.0) for xi in x]
    np.testing.assert_allclose(curve, direct, rtol=1e-6)


def test_narrow_gaussian_passes_through():
    sd = 0.05
    p = lambda x, s: np.exp(-0.5 * (x / sd) ** 2) / (sd * math.sqrt(2 * math.pi)) + 0 * s
    x = np.array([0.0, 0.03, 0.1])
    np.testing.assert_allclose(ref.subordination_curve(p, 0.6, x, 1.0),
                               p(x, 0.0), rtol=1e-6)


def test_ou_variance_near_stationary():
    var = ref.subordination_integral(ref.ou_variance(), 0.8, 10.0)
    assert var == pytest.approx(0.5, rel=0.05)
    # large-s limit of the integrand is the stationary value
    assert ref.ou_variance()(50.0) == pytest.approx(0.5, rel=1e-15)


def test_free_density_center_vs_monte_carlo():
    scn = pe.Scenario.build(LawSpec.stable(0.7), sigma="1", t_max=1.0, delta=1e-3,
                            obs_times=(1.0,), master_seed=8)
    x = pe.simulate_block(scn, np.arange(20_000)).X[:, 0]
    half = 0.1
    frac = np.mean(np.abs(x) < half)
    grid = np.linspace(-half, half, 201)
    w = ref.subordination_curve(ref.free_density(1.0), 0.7, grid, 1.0)
    expected = np.trapezoid(w, grid)
    se = math.sqrt(expected * (1 - expected) / x.size)
    assert abs(frac - expected) < 3 * se + 2e-3


def test_subordinator_mean_stable():
    assert ref.subordinator_mean_via_laplace(LawSpec.stable(0.5), 1.0) == pytest.approx(
        1.1283791670955126, rel=1e-14)
    law = LawSpec.stable(0.7)
    ratio = ref.subordinator_mean_via_laplace(law, 2.0) / ref.subordinator_mean_via_laplace(law, 1.0)
    assert ratio == pytest.approx(2 ** 0.7, rel=1e-8)


def test_subordinator_mean_tempered_long_time():
    # E S(t) ~ t / psi'(0) for large t
    law = LawSpec.tempered(0.5, 1.0)
    t = 200.0
    assert ref.subordinator_mean_via_laplace(law, t) == pytest.approx(t / ex.psi_prime_at_zero(law),
                                                                     rel=0.02)


def test_consistency_triangle_stable():
    law = LawSpec.stable(0.6)
    delta = 1e-3
    analytic = ref.subordinator_mean_via_laplace(law, 1.0)
    inverted = talbot(lambda u: 1.0 / (u * ex.psi_complex(law, u)), 1.0)
    S = pe.simulate_inverse_subordinator(law, delta, [1.0], np.arange(10_000), master_seed=4)[:, 0]
    se = S.std(ddof=1) / math.sqrt(S.size)
    tol = max(3 * se + delta, 1e-3 * analytic)
    assert abs(inverted - analytic) < tol
    assert abs(S.mean() - analytic) < tol
    assert abs(S.mean() - inverted) < tol


def test_tempered_mean_vs_monte_carlo():
    law = LawSpec.tempered(0.5, 1.0)
    S = pe.simulate_inverse_subordinator(law, 1e-3, [1.0], np.arange(10_000), master_seed=6)[:, 0]
    assert S.mean() == pytest.approx(ref.subordinator_mean_via_laplace(law, 1.0), rel=0.03)


def test_levy_flight_cf_is_mittag_leffler():
    u = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(ref.levy_flight_cf(0.8, 1.5, u, 1.0),
                               ex.mittag_leffler(0.8, -u ** 1.5), rtol=1e-15)


def _scn(F="0", sigma="1", E="0", noise=None, law=None):
    return pe.Scenario.build(law or LawSpec.stable(0.7), F=F, sigma=sigma, E=E, t_max=1.0,
                             delta=1e-3, obs_times=(1.0,), noise=noise or NoiseSpec.none())


def test_classify_cases():
    assert ref.classify_reference_case(_scn(), "free") == {"sigma": 1.0}
    assert ref.classify_reference_case(_scn(F="-2 * x", sigma="0.5"), "ou") == {
        "sigma": 0.5, "theta": 2.0}
    lf = _scn(sigma="0", E="2", noise=NoiseSpec.symmetric_stable(1.5))
    assert ref.classify_reference_case(lf, "levy-flight") == {"beta": 1.5, "scale": 2.0}


@pytest.mark.parametrize("scn, case", [
    (_scn(F="cos(t)"), "free"),
    (_scn(F="-x", sigma="1 + t"), "ou"),
    (_scn(F="-x^3"), "ou"),
    (_scn(F="1 - x"), "ou"),
    (_scn(sigma="x"), "free"),
    (_scn(law=LawSpec.tempered(0.5, 1.0)), "free"),
    (_scn(E="1", noise=NoiseSpec.symmetric_stable(1.2)), "free"),
    (_scn(), "levy-flight"),
    (_scn(), "nonsense"),
])
def test_classify_refuses_coupled(scn, case):
    with pytest.raises(ConfigError):
        ref.classify_reference_case(scn, case)
