"""Discrete memory operators on uniform grids.

``theta_apply`` convolves with the Levy tail G; ``phi_apply`` convolves with
the memory kernel M and then differentiates. Both use product quadrature:
the sampled function is interpolated piecewise linearly and integrated
exactly against the kernel on each panel, so the weakly singular kernels are
never sampled at the origin.

Images of Theta behave like t**(1 - order) near the origin, which a
piecewise-linear interpolant resolves badly on the first panels. The memory
convolution therefore adds starting weights on the first few samples, chosen
so the rule is also exact for t**g and t**(g + 1), g = 1 - order (one pair
per mixture component).
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from . import exponents as ex
from .errors import GridTooShortError, ParameterDomainError
from .laplace import talbot

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class TimeGrid:
    h: float
    n: int
    t0: float = 0.0

    def __post_init__(self):
        if not self.h > 0:
            raise ParameterDomainError(f"grid step must be positive, got {self.h}")
        if self.n < 1:
            raise ParameterDomainError(f"grid needs at least one step, got n={self.n}")
        if self.t0 != 0.0:
            raise ParameterDomainError("grids start at t0 = 0")

    @classmethod
    def covering(cls, t_max, h):
        return cls(h=h, n=int(round(t_max / h)))

    @property
    def t(self):
        return self.h * np.arange(self.n + 1)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n + 1,):
            raise ParameterDomainError(
                f"expected {self.grid.n + 1} samples, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def sample(cls, func, grid):
        vals = np.broadcast_to(np.asarray(func(grid.t), dtype=float), (grid.n + 1,))
        return cls(grid, vals.copy())


def _weights_from_moments(integral, moment, h, n):
    # panel m covers lags [m h, (m+1) h]; w0 multiplies the sample at the
    # panel's near end (lag m h), w1 the far end.
    edges = h * np.arange(n + 1)
    k1 = integral(edges)
    k2 = moment(edges)
    i0 = np.diff(k1)
    i1 = (np.diff(k2) - edges[:-1] * i0) / h
    return i0 - i1, i1


def _weights_gauss(kernel, integral, moment, h, n):
    # first panel carries the singularity: use exact running moments there;
    # the remaining panels are smooth and take 8-point Gauss-Legendre.
    near = np.empty(n)
    far = np.empty(n)
    near[0], far[0] = (a[0] for a in _weights_from_moments(integral, moment, h, 1))
    if n > 1:
        xi = 0.5 * (_GL_NODES + 1.0)
        lags = h * (np.arange(1, n)[:, None] + xi[None, :])
        vals = np.asarray(kernel(lags.ravel())).reshape(lags.shape)
        wq = 0.5 * h * _GL_WEIGHTS
        far[1:] = (vals * (wq * xi)[None, :]).sum(axis=1)
        near[1:] = (vals * (wq * (1.0 - xi))[None, :]).sum(axis=1)
    return near, far


def theta_weights(law, h, n):
    return _weights_from_moments(
        lambda x: ex.tail_integral(law, x), lambda x: ex.tail_moment(law, x), h, n)


def kernel_weights(law, h, n):
    integral = lambda x: ex.kernel_integral(law, x)
    moment = lambda x: ex.kernel_moment(law, x)
    if law.family is ex.Family.STABLE:
        return _weights_from_moments(integral, moment, h, n)
    return _weights_gauss(lambda x: ex.kernel_M(law, x), integral, moment, h, n)


def _product_convolve(near, far, f):
    # out[j] = sum_{m<j} near[m] f[j-m] + far[m] f[j-m-1]
    n = len(f) - 1
    out = np.zeros(n + 1)
    if n == 0:
        return out
    out[1:] = np.convolve(near, f[1:])[:n] + np.convolve(far, f[:-1])[:n]
    return out


def theta_apply(law, f):
    """Convolution with the Levy tail: (Theta f)(t) = int_0^t G(t - z) f(z) dz."""
    grid = f.grid
    near, far = theta_weights(law, grid.h, grid.n)
    return SampledFunction(grid, _product_convolve(near, far, f.values))


def singular_exponents(law):
    """Non-integer powers t**g carried by Theta-images near the origin."""
    if law.family is ex.Family.DISTRIBUTED:
        orders = sorted({b for _, b in law.mixture}, reverse=True)
    else:
        orders = [law.alpha]
    return [e for b in orders for e in (1.0 - b, 2.0 - b)]


def kernel_power_moment(law, power, t):
    """Exact int_0^t M(t - y) y**power dy for t > 0."""
    t = np.asarray(t, dtype=float)
    if law.family is ex.Family.STABLE:
        a = law.alpha
        return t ** (a + power) * special.gamma(power + 1.0) / special.gamma(a + power + 1.0)
    scale = special.gamma(power + 1.0)
    return talbot(lambda s: scale / (s ** (power + 1.0) * ex.psi_complex(law, s)), t)


def starting_weights(law, h, n, near, far):
    """Correction weights w[j, k] applied to samples j < J at output index k."""
    powers = singular_exponents(law)
    basis = [0.0, 1.0] + powers
    n_start = len(basis)
    if n + 1 < n_start + 1:
        return np.zeros((0, n + 1))
    idx = np.arange(n_start, dtype=float)
    # work in index units so the small system stays well conditioned
    vander = np.array([idx ** e if e > 0 else np.ones(n_start) for e in basis])
    t = h * np.arange(n + 1)
    resid = np.zeros((n_start, n + 1))
    for i, e in enumerate(powers, start=2):
        approx = _product_convolve(near, far, t ** e)
        resid[i, 1:] = (kernel_power_moment(law, e, t[1:]) - approx[1:]) / h ** e
    return np.linalg.solve(vander, resid)


def memory_convolve(law, f):
    """int_0^t M(t - y) f(y) dy on the grid (before differentiation)."""
    grid = f.grid
    near, far = kernel_weights(law, grid.h, grid.n)
    out = _product_convolve(near, far, f.values)
    start = starting_weights(law, grid.h, grid.n, near, far)
    if start.size:
        out = out + start.T @ f.values[: start.shape[0]]
    return SampledFunction(grid, out)


def derivative(values, h):
    """Second-order one-sided differences: backward in the interior, forward
    (central at index 1) where the backward stencil does not fit."""
    c = np.asarray(values, dtype=float)
    n = len(c) - 1
    if n < 2:
        raise GridTooShortError(f"need at least 3 grid points, got {n + 1}")
    d = np.empty_like(c)
    d[2:] = (3.0 * c[2:] - 4.0 * c[1:-1] + c[:-2]) / (2.0 * h)
    d[0] = (-3.0 * c[0] + 4.0 * c[1] - c[2]) / (2.0 * h)
    d[1] = (c[2] - c[0]) / (2.0 * h)
    return d


def phi_apply(law, f):
    """(Phi f)(t) = d/dt int_0^t M(t - y) f(y) dy, differentiate-after-convolve."""
    if f.grid.n < 2:
        raise GridTooShortError(f"phi_apply needs n >= 2, got n={f.grid.n}")
    conv = memory_convolve(law, f)
    return SampledFunction(f.grid, derivative(conv.values, f.grid.h))


def check_phi_theta_identity(law, f):
    """Sup-norm of Phi(Theta f) - f, skipping the first two grid points."""
    back = phi_apply(law, theta_apply(law, f))
    return float(np.max(np.abs(back.values[2:] - f.values[2:])))


def check_leibniz_boundary(law, f, f_prime):
    """Sup-norm residual of d/dt Theta f = Theta f' + f(0) G(t) on the interior.

    The derivative of Theta f is taken by finite differences after splitting
    off the Taylor part f(0) + f'(0) t, whose image under d/dt Theta is known
    exactly (f(0) G(t) + f'(0) int_0^t G). What remains is O(t^2) and its
    image is smooth enough for the one-sided stencil. ``f_prime`` is the
    analytic derivative sampled on the same grid.
    """
    grid = f.grid
    t = grid.t
    f0, f1 = f.values[0], f_prime.values[0]
    regular = SampledFunction(grid, f.values - f0 - f1 * t)
    d_theta = derivative(theta_apply(law, regular).values, grid.h)[2:]
    g = ex.tail_G(law, t[2:])
    lhs = d_theta + f0 * g + f1 * ex.tail_integral(law, t[2:])
    rhs = theta_apply(law, f_prime).values[2:] + f0 * g
    return float(np.max(np.abs(lhs - rhs)))
