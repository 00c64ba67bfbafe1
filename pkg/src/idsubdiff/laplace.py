"""Numerical Laplace transforms: fixed-Talbot and Gaver-Stehfest inversion,
plus a forward transform by quadrature in logarithmic time."""

import math

import numpy as np
from scipy import integrate

from .errors import NumericFailure

TALBOT_NODES = 32


def talbot(transform, t, n_nodes=TALBOT_NODES):
    """Invert a Laplace transform with the fixed-Talbot contour.

    Parameters
    ----------
    transform : callable
        Vectorized function of a complex argument returning the transform.
    t : float or array_like
        Positive evaluation times.
    n_nodes : int
        Number of contour nodes (Abate-Valko parameter M).

    Returns
    -------
    float or ndarray
        The inverse transform at ``t``.
    """
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if np.any(t_arr <= 0):
        raise NumericFailure("Talbot inversion needs t > 0", at=t)

    m = n_nodes
    r = 2.0 * m / (5.0 * t_arr)
    theta = np.arange(1, m) * math.pi / m
    cot = 1.0 / np.tan(theta)
    sigma = theta + (theta * cot - 1.0) * cot

    s = r[:, None] * theta[None, :] * (cot[None, :] + 1j)
    with np.errstate(all="ignore"):
        head = 0.5 * np.exp(r * t_arr) * np.real(transform(r + 0j))
        body = np.exp(t_arr[:, None] * s) * transform(s) * (1.0 + 1j * sigma[None, :])
        out = (r / m) * (head + np.real(body).sum(axis=1))
    if not np.all(np.isfinite(out)):
        bad = t_arr[~np.isfinite(out)]
        raise NumericFailure("non-convergent Talbot sum", at=float(bad[0]))
    return float(out[0]) if scalar else out


def _stehfest_weights(n):
    half = n // 2
    v = np.zeros(n)
    for k in range(1, n + 1):
        acc = 0.0
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += (j ** half * math.factorial(2 * j)
                    / (math.factorial(half - j) * math.factorial(j)
                       * math.factorial(j - 1) * math.factorial(k - j)
                       * math.factorial(2 * j - k)))
        v[k - 1] = (-1) ** (k + half) * acc
    return v


def gaver_stehfest(transform, t, n_terms=14):
    """Gaver-Stehfest inversion. Real-axis only; amplifies noise, so it is
    kept as a cross-check for :func:`talbot`, never as the primary route."""
    if n_terms % 2:
        raise ValueError("n_terms must be even")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    weights = _stehfest_weights(n_terms)
    ln2 = math.log(2.0)
    k = np.arange(1, n_terms + 1)
    s = (k[None, :] * ln2) / t_arr[:, None]
    out = (ln2 / t_arr) * (np.real(transform(s + 0j)) * weights[None, :]).sum(axis=1)
    return float(out[0]) if np.ndim(t) == 0 else out


def laplace_transform(func, u, t_min=1e-40, epsrel=1e-10):
    """Forward Laplace transform of ``func`` on (0, inf) at real ``u > 0``.

    Integrates in log-time (t = e^v), which turns integrable power-law
    singularities at the origin into exponentially decaying tails. The mass
    below ``t_min`` is dropped.
    """
    if u <= 0:
        raise ValueError("u must be positive")
    v_lo = math.log(t_min)
    v_hi = math.log(80.0 / u)

    def integrand(v):
        t = math.exp(v)
        return math.exp(-u * t) * float(func(t)) * t

    # split at the exponential cut-off scale so quad sees both regimes
    v_mid = math.log(1.0 / u)
    total = 0.0
    for a, b in ((v_lo, v_mid - 8.0), (v_mid - 8.0, v_mid), (v_mid, v_hi)):
        val, _ = integrate.quad(integrand, a, b, limit=400, epsabs=0.0, epsrel=epsrel)
        total += val
    return total
