"""Semi-analytic oracles for decoupled scenarios.

When the parent process does not see physical time (space-only F and sigma,
no Levy noise) it is independent of the clock, and the density of
X(t) is the mixture of the parent's transition density over the law of the
inverse stable subordinator S(t). These functions evaluate that mixture by
quadrature; they share no code with the Monte Carlo engine beyond the
one-sided stable density.
"""

import functools
import math

import numpy as np
from scipy import integrate, special

from . import exponents as ex
from .errors import ConfigError, NumericFailure, ParameterDomainError
from .laplace import talbot
from .sampler import NoiseKind

QUAD_EPSABS = 1e-8
QUAD_EPSREL = 1e-6


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ParameterDomainError(f"alpha must lie in (0, 1), got {alpha}")


def inv_stable_density(alpha, s, t):
    """Density h(s, t) of S(t) for the inverse alpha-stable subordinator."""
    _check_alpha(alpha)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0) or not t > 0:
        raise ParameterDomainError("inv_stable_density needs s > 0 and t > 0")
    arg = t * s_arr ** (-1.0 / alpha)
    h = t / alpha * s_arr ** (-1.0 - 1.0 / alpha) * ex.stable_density_onesided(alpha, arg)
    return float(h) if np.ndim(s) == 0 else h


def _quad(f, lo, hi, what, **kw):
    val, err = integrate.quad(f, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200, **kw)
    if not math.isfinite(val) or err > max(QUAD_EPSABS, QUAD_EPSREL * abs(val)) * 100:
        raise NumericFailure(f"{what}: quadrature did not converge (estimate {val}, error {err})")
    return val


def _v_window(alpha, t):
    # S(t) = t**alpha * S(1); S(1) has mass essentially in [1e-12, 40]
    centre = alpha * math.log(t)
    return centre + math.log(1e-12), centre + math.log(40.0)


def subordination_integral(func, alpha, t):
    """int_0^inf func(s) h(s, t) ds with the substitution s = exp(v)."""
    _check_alpha(alpha)
    lo, hi = _v_window(alpha, t)

    def integrand(v):
        s = math.exp(v)
        return func(s) * inv_stable_density(alpha, s, t) * s

    return _quad(integrand, lo, hi, "subordination integral")


def subordination_density(markov_density, alpha, x, t):
    """w(x, t) = int_0^inf p(x, s) h(s, t) ds for a caller-supplied parent
    transition density p(x, s)."""
    return subordination_integral(lambda s: markov_density(x, s), alpha, t)


@functools.lru_cache(maxsize=32)
def _mixing_rule(alpha, t, n_nodes):
    # trapezoid rule in v = log s; h(e^v, t) e^v decays super-exponentially
    # at both ends, so the rule converges geometrically
    lo, hi = _v_window(alpha, t)
    v = np.linspace(lo, hi, n_nodes)
    s = np.exp(v)
    w = inv_stable_density(alpha, s, t) * s * (v[1] - v[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return s, w


def subordination_curve(markov_density, alpha, x_values, t, n_nodes=1201):
    """Vectorized w(x, t) on a grid of x using a cached fixed quadrature rule.

    ``markov_density`` must broadcast over arrays x (shape (m, 1)) and s
    (shape (1, k)).
    """
    _check_alpha(alpha)
    s, w = _mixing_rule(float(alpha), float(t), int(n_nodes))
    x = np.asarray(x_values, dtype=float)
    vals = markov_density(x[:, None], s[None, :])
    return vals @ w


def mixing_weights(alpha, t, n_nodes=1201):
    """Nodes and weights of the cached rule approximating the law of S(t)."""
    return _mixing_rule(float(alpha), float(t), int(n_nodes))


def subordinator_mean_via_laplace(law, t):
    """E S(t), the inverse Laplace transform of 1/(u Psi(u))."""
    if not t > 0:
        raise ParameterDomainError(f"t must be positive, got {t}")
    if law.family is ex.Family.STABLE:
        return t ** law.alpha / special.gamma(1.0 + law.alpha)
    return float(talbot(lambda u: 1.0 / (u * ex.psi_complex(law, u)), t))


# --- parent transition densities --------------------------------------------

def free_density(sigma=1.0):
    """Brownian motion sigma B(s): Normal(0, sigma^2 s)."""
    def p(x, s):
        var = sigma * sigma * s
        return np.exp(-0.5 * x * x / var) / np.sqrt(2.0 * math.pi * var)
    return p


def ou_density(sigma=1.0, theta=1.0, x0=0.0):
    """Ornstein-Uhlenbeck dY = -theta Y ds + sigma dB from Y(0) = x0."""
    def p(x, s):
        mean = x0 * np.exp(-theta * s)
        var = sigma * sigma * (1.0 - np.exp(-2.0 * theta * s)) / (2.0 * theta)
        return np.exp(-0.5 * (x - mean) ** 2 / var) / np.sqrt(2.0 * math.pi * var)
    return p


def ou_variance(sigma=1.0, theta=1.0):
    return lambda s: sigma * sigma * (1.0 - math.exp(-2.0 * theta * s)) / (2.0 * theta)


def levy_flight_cf(alpha, beta, u, t, scale=1.0):
    """E exp(iuX(t)) for X = scale * L(S(t)) with symmetric beta-stable L."""
    u = np.abs(np.asarray(u, dtype=float))
    return ex.mittag_leffler(alpha, -(scale * u) ** beta * t ** alpha)


# --- scenario inspection ---------------------------------------------------

CASES = ("free", "ou", "levy-flight")


def _const(expr):
    return not expr.variables


def classify_reference_case(scn, case):
    """Check that ``scn`` is decoupled in the way ``case`` needs and return the
    parameters the oracle uses. Raises ConfigError otherwise."""
    if case not in CASES:
        raise ConfigError(f"unknown reference case {case!r}; choose from {CASES}")
    if scn.law.family is not ex.Family.STABLE:
        raise ConfigError("reference densities exist for the stable law only")
    if scn.F.depends_on("t") or scn.sigma.depends_on("t"):
        raise ConfigError("time-dependent coefficients couple the parent process to the "
                          "clock; the subordination formula does not apply")
    if case in ("free", "ou"):
        if scn.noise_active:
            raise ConfigError(f"case {case!r} needs E = 0 or no Levy noise")
        if not _const(scn.sigma):
            raise ConfigError(f"case {case!r} needs a constant sigma")
        sigma = float(scn.sigma(0.0, 0.0))
        if case == "free":
            if not scn.F.is_zero:
                raise ConfigError("case 'free' needs F = 0")
            return {"sigma": sigma}
        theta = -float(scn.F(1.0, 0.0))
        if abs(float(scn.F(0.0, 0.0))) > 0 or not np.allclose(
                scn.F(np.array([-2.0, 0.5, 3.0]), 0.0), -theta * np.array([-2.0, 0.5, 3.0])):
            raise ConfigError("case 'ou' needs a linear restoring force F = -theta * x")
        if not theta > 0:
            raise ConfigError("case 'ou' needs theta > 0")
        return {"sigma": sigma, "theta": theta}
    if not (scn.F.is_zero and scn.sigma.is_zero):
        raise ConfigError("case 'levy-flight' needs F = 0 and sigma = 0")
    if scn.noise.kind is not NoiseKind.SYMMETRIC_STABLE or not _const(scn.E):
        raise ConfigError("case 'levy-flight' needs symmetric stable noise and constant E")
    return {"beta": scn.noise.beta, "scale": abs(float(scn.E(0.0, 0.0)))}
