"""Catalog of subordinator laws.

Each law is described by its Laplace exponent ``psi``; everything else
(Levy tail, memory kernel, their running integrals) is derived from it.
Three families are supported:

* ``stable``            psi(u) = u**alpha
* ``tempered``          psi(u) = (u + lam)**alpha - lam**alpha
* ``distributed``       psi(u) = sum_i w_i * Gamma(1 - beta_i) * u**beta_i,
                        i.e. tail nu((u, inf)) = sum_i w_i * u**(-beta_i)

The tempered Levy density is alpha/Gamma(1-alpha) x**(-1-alpha) exp(-lam x),
which reproduces the exponent above exactly.
"""

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import NumericFailure, ParameterDomainError
from .laplace import talbot


class Family(str, enum.Enum):
    STABLE = "stable"
    TEMPERED = "tempered"
    DISTRIBUTED = "distributed"


class KernelClampWarning(RuntimeWarning):
    """Raw Talbot inversion of the memory kernel went noticeably negative."""


@dataclass(frozen=True)
class LawSpec:
    family: Family
    alpha: float | None = None
    lam: float | None = None
    mixture: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        fam = self.family
        if fam in (Family.STABLE, Family.TEMPERED):
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ParameterDomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if fam is Family.TEMPERED:
            if self.lam is None or not self.lam > 0.0:
                raise ParameterDomainError(f"lambda must be positive, got {self.lam}")
        if fam is Family.DISTRIBUTED:
            mix = tuple((float(w), float(b)) for w, b in self.mixture)
            if not mix:
                raise ParameterDomainError("distributed-order mixture is empty")
            for w, b in mix:
                if not w > 0.0:
                    raise ParameterDomainError(f"mixture weight must be positive, got {w}")
                if not 0.0 < b < 1.0:
                    raise ParameterDomainError(f"mixture order must lie in (0, 1), got {b}")
            if abs(sum(w for w, _ in mix) - 1.0) > 1e-12:
                raise ParameterDomainError("mixture weights must sum to 1")
            object.__setattr__(self, "mixture", mix)

    @classmethod
    def stable(cls, alpha):
        return cls(Family.STABLE, alpha=float(alpha))

    @classmethod
    def tempered(cls, alpha, lam):
        return cls(Family.TEMPERED, alpha=float(alpha), lam=float(lam))

    @classmethod
    def distributed(cls, mixture):
        return cls(Family.DISTRIBUTED, mixture=tuple(mixture))

    @property
    def leading_order(self):
        """Exponent governing psi(u) ~ c u**order as u -> inf."""
        if self.family is Family.DISTRIBUTED:
            return max(b for _, b in self.mixture)
        return self.alpha


def _as_real(u, name, strict):
    arr = np.asarray(u, dtype=float)
    bad = arr <= 0 if strict else arr < 0
    if np.any(bad) or np.any(np.isnan(arr)):
        cmp = ">" if strict else ">="
        raise ParameterDomainError(f"{name} must be {cmp} 0")
    return arr


def _ret(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def psi_complex(law, s):
    """Laplace exponent on the cut complex plane (principal branches)."""
    s = np.asarray(s, dtype=complex)
    if law.family is Family.STABLE:
        return s ** law.alpha
    if law.family is Family.TEMPERED:
        return (s + law.lam) ** law.alpha - law.lam ** law.alpha
    out = np.zeros_like(s)
    for w, b in law.mixture:
        out = out + w * special.gamma(1.0 - b) * s ** b
    return out


def psi(law, u):
    """Laplace exponent psi(u) for real u >= 0."""
    arr = _as_real(u, "u", strict=False)
    if law.family is Family.STABLE:
        out = arr ** law.alpha
    elif law.family is Family.TEMPERED:
        out = (arr + law.lam) ** law.alpha - law.lam ** law.alpha
    else:
        out = sum(w * special.gamma(1.0 - b) * arr ** b for w, b in law.mixture)
    return _ret(out, u)


def psi_prime_at_zero(law):
    """Mean subordinator growth rate E T(1); infinite unless tempered."""
    if law.family is Family.TEMPERED:
        return law.alpha * law.lam ** (law.alpha - 1.0)
    return math.inf


def tail_G(law, u):
    """Levy tail G(u) = nu((u, inf)) for u > 0."""
    arr = _as_real(u, "u", strict=True)
    if law.family is Family.STABLE:
        out = arr ** (-law.alpha) / special.gamma(1.0 - law.alpha)
    elif law.family is Family.TEMPERED:
        a, lam = law.alpha, law.lam
        out = (arr ** (-a) * np.exp(-lam * arr) / special.gamma(1.0 - a)
               - lam ** a * special.gammaincc(1.0 - a, lam * arr))
    else:
        out = sum(w * arr ** (-b) for w, b in law.mixture)
    return _ret(out, u)


def tail_integral(law, x):
    """Running integral of the tail, int_0^x G(u) du (zero at x = 0)."""
    arr = _as_real(x, "x", strict=False)
    if law.family is Family.STABLE:
        out = arr ** (1.0 - law.alpha) / special.gamma(2.0 - law.alpha)
    elif law.family is Family.TEMPERED:
        a, lam = law.alpha, law.lam
        pos = np.where(arr > 0, arr, 1.0)
        out = a * lam ** (a - 1.0) * special.gammainc(1.0 - a, lam * arr) + np.where(
            arr > 0, pos * tail_G(law, pos), 0.0)
    else:
        out = sum(w * arr ** (1.0 - b) / (1.0 - b) for w, b in law.mixture)
    return _ret(out, x)


def tail_moment(law, x):
    """int_0^x u G(u) du."""
    arr = _as_real(x, "x", strict=False)
    if law.family is Family.STABLE:
        a = law.alpha
        out = arr ** (2.0 - a) / ((2.0 - a) * special.gamma(1.0 - a))
    elif law.family is Family.TEMPERED:
        a, lam = law.alpha, law.lam
        pos = np.where(arr > 0, arr, 1.0)
        out = (0.5 * a * (1.0 - a) * lam ** (a - 2.0) * special.gammainc(2.0 - a, lam * arr)
               + np.where(arr > 0, 0.5 * pos ** 2 * tail_G(law, pos), 0.0))
    else:
        out = sum(w * arr ** (2.0 - b) / (2.0 - b) for w, b in law.mixture)
    return _ret(out, x)


_CLAMP_TOL = 1e-9


def _invert(law, transform, t, clamp):
    arr = _as_real(t, "t", strict=True)
    raw = talbot(transform, arr.ravel()).reshape(arr.shape)
    if clamp:
        if np.any(raw < -_CLAMP_TOL):
            warnings.warn(
                f"Talbot inversion for {law.family.value} kernel dipped to "
                f"{raw.min():.3e}; clamped to zero", KernelClampWarning, stacklevel=3)
        raw = np.maximum(raw, 0.0)
    return _ret(raw, t)


def _invert_from_zero(law, transform, x):
    # running integrals vanish at the origin; Talbot needs x > 0
    arr = _as_real(x, "x", strict=False)
    out = np.zeros(arr.shape)
    pos = arr > 0
    if np.any(pos):
        out[pos] = np.maximum(talbot(transform, arr[pos]), 0.0)
    return _ret(out, x)


def kernel_M(law, t):
    """Memory kernel M(t) with Laplace transform 1/psi(u), for t > 0."""
    if law.family is Family.STABLE:
        arr = _as_real(t, "t", strict=True)
        return _ret(arr ** (law.alpha - 1.0) / special.gamma(law.alpha), t)
    return _invert(law, lambda s: 1.0 / psi_complex(law, s), t, clamp=True)


def kernel_integral(law, x):
    """int_0^x M(u) du, which is also the mean of the inverse subordinator."""
    if law.family is Family.STABLE:
        arr = _as_real(x, "x", strict=False)
        return _ret(arr ** law.alpha / special.gamma(1.0 + law.alpha), x)
    return _invert_from_zero(law, lambda s: 1.0 / (s * psi_complex(law, s)), x)


def kernel_moment(law, x):
    """int_0^x u M(u) du = x K1(x) - int_0^x K1, with K1 = kernel_integral."""
    if law.family is Family.STABLE:
        arr = _as_real(x, "x", strict=False)
        a = law.alpha
        return _ret(arr ** (a + 1.0) / ((a + 1.0) * special.gamma(a)), x)
    arr = _as_real(x, "x", strict=False)
    k1 = kernel_integral(law, arr)
    k2 = _invert_from_zero(law, lambda s: 1.0 / (s * s * psi_complex(law, s)), arr)
    return _ret(arr * k1 - k2, x)


# --- special functions used by the reference oracles -----------------------

def _ml_series(alpha, z):
    total = 0.0
    term_k = 0
    while True:
        term = z ** term_k * special.rgamma(alpha * term_k + 1.0)
        total += term
        if abs(term) < 1e-17 * max(1.0, abs(total)) and term_k > 2:
            return total
        term_k += 1
        if term_k > 400:
            raise NumericFailure("Mittag-Leffler series did not converge", at=z)


def _ml_integral(alpha, z):
    # E_a(-x) = sin(a pi)/(a pi) int_0^inf exp(-x**(1/a) rho**(1/a)) / (rho^2 + 2 rho cos(a pi) + 1) d rho
    t = (-z) ** (1.0 / alpha)
    c = math.cos(alpha * math.pi)

    def f(rho):
        return math.exp(-t * rho ** (1.0 / alpha)) / (rho * rho + 2.0 * rho * c + 1.0)

    head, _ = integrate.quad(f, 0.0, 2.0, points=[1.0], limit=400, epsabs=1e-15, epsrel=1e-12)
    tail, _ = integrate.quad(f, 2.0, np.inf, limit=400, epsabs=1e-15, epsrel=1e-12)
    return math.sin(alpha * math.pi) / (alpha * math.pi) * (head + tail)


def mittag_leffler(alpha, z):
    """One-parameter Mittag-Leffler function E_alpha(z) for z <= 0.

    Small |z| uses the power series; beyond that the completely monotone
    integral representation is integrated numerically (the alternating
    series loses too many digits there).
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterDomainError(f"alpha must lie in (0, 1], got {alpha}")
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr > 0) or np.any(np.isnan(z_arr)):
        raise ParameterDomainError("Mittag-Leffler evaluation supports z <= 0 only")
    if alpha == 1.0:
        return _ret(np.exp(z_arr), z)
    flat = z_arr.ravel()
    out = np.empty_like(flat)
    for i, zi in enumerate(flat):
        out[i] = _ml_series(alpha, zi) if zi >= -1.0 else _ml_integral(alpha, zi)
    return _ret(out.reshape(z_arr.shape), z)


_TAIL_SWITCH = 0.2


def _zolotarev_A(alpha, u):
    return ((np.sin(alpha * u) ** alpha * np.sin((1.0 - alpha) * u) ** (1.0 - alpha)
             / np.sin(u)) ** (1.0 / (1.0 - alpha)))


def _stable_pdf_scalar(alpha, x):
    log_scale = -alpha / (1.0 - alpha) * math.log(x)
    if log_scale > 700.0:
        return 0.0  # below exp(-1e300): the left tail has underflowed
    scale = math.exp(log_scale)

    def f(u):
        a = _zolotarev_A(alpha, u)
        return a * math.exp(-scale * a)

    val, err = integrate.quad(f, 0.0, math.pi, limit=400, epsabs=1e-14, epsrel=1e-11)
    if not math.isfinite(val) or (val > 0 and err > 1e-6 * val + 1e-12):
        raise NumericFailure("Zolotarev quadrature did not converge", at=x)
    if val <= 0.0:
        return 0.0
    # prefactor x**(-1/(1-alpha)) can overflow on its own where val underflows
    return alpha / ((1.0 - alpha) * math.pi) * math.exp(math.log(val) - math.log(x) / (1.0 - alpha))


def _stable_pdf_tail(alpha, x):
    # convergent expansion in x**-alpha; only used where it converges fast
    z = x ** -alpha
    k = np.arange(1, 80)
    terms = (-1.0) ** (k + 1) * np.exp(special.gammaln(k * alpha + 1.0) - special.gammaln(k + 1.0)
                                        + k * math.log(z)) * np.sin(k * math.pi * alpha)
    return float(terms.sum()) / (math.pi * x)


def stable_density_onesided(alpha, x):
    """Density of the positive stable law with Laplace transform exp(-u**alpha)."""
    if not 0.0 < alpha < 1.0:
        raise ParameterDomainError(f"alpha must lie in (0, 1), got {alpha}")
    x_arr = _as_real(x, "x", strict=True)
    flat = x_arr.ravel()
    out = np.array([_stable_pdf_tail(alpha, float(v)) if v ** -alpha < _TAIL_SWITCH
                    else _stable_pdf_scalar(alpha, float(v)) for v in flat])
    return _ret(out.reshape(x_arr.shape), x)
