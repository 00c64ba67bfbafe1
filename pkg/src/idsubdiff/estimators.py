"""Ensemble statistics: streaming moments, histograms, MSD slopes, empirical
characteristic functions and the two-sample KS distance."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ParameterDomainError

KS_C_05 = 1.358


@dataclass
class MomentAccumulator:
    """Count, mean and central power sums M2..M4 of a sample stream.

    ``merge`` uses the pairwise update formulas, so partial accumulators
    from different blocks can be combined in any fixed tree.
    """
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    @classmethod
    def from_samples(cls, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.size == 0:
            return cls()
        mu = float(x.mean())
        d = x - mu
        d2 = d * d
        return cls(int(x.size), mu, float(d2.sum()), float((d2 * d).sum()), float((d2 * d2).sum()))

    def merge(self, other):
        na, nb = self.n, other.n
        if nb == 0:
            return MomentAccumulator(na, self.mean, self.m2, self.m3, self.m4)
        if na == 0:
            return MomentAccumulator(nb, other.mean, other.m2, other.m3, other.m4)
        n = na + nb
        delta = other.mean - self.mean
        d_n = delta / n
        mean = self.mean + nb * d_n
        m2 = self.m2 + other.m2 + delta * d_n * na * nb
        m3 = (self.m3 + other.m3 + delta * d_n * d_n * na * nb * (na - nb)
              + 3.0 * d_n * (na * other.m2 - nb * self.m2))
        m4 = (self.m4 + other.m4
              + delta * d_n ** 3 * na * nb * (na * na - na * nb + nb * nb)
              + 6.0 * d_n * d_n * (na * na * other.m2 + nb * nb * self.m2)
              + 4.0 * d_n * (na * other.m3 - nb * self.m3))
        return MomentAccumulator(n, mean, m2, m3, m4)

    # a single sample has no spread information; its variance and SEs are
    # reported as 0 (m2 is exactly 0 then) rather than NaN
    @property
    def variance(self):
        if self.n == 0:
            return math.nan
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def mean_se(self):
        return math.sqrt(self.variance / self.n) if self.n else math.nan

    @property
    def fourth_central(self):
        return self.m4 / self.n if self.n else math.nan

    @property
    def var_se(self):
        # large-sample SE of the sample variance: sqrt((mu4 - s^4) / n)
        if self.n == 0:
            return math.nan
        s2 = self.m2 / self.n
        return math.sqrt(max(self.fourth_central - s2 * s2, 0.0) / self.n)


def merge_pairwise(accs):
    """Reduce a list of accumulators with a balanced tree fixed by position."""
    accs = list(accs)
    if not accs:
        return MomentAccumulator()
    while len(accs) > 1:
        nxt = [accs[i].merge(accs[i + 1]) for i in range(0, len(accs) - 1, 2)]
        if len(accs) % 2:
            nxt.append(accs[-1])
        accs = nxt
    return accs[0]


@dataclass
class MomentSummary:
    t: float
    n: int
    mean: float | None
    mean_se: float | None
    var: float | None
    var_se: float | None
    fourth_central: float | None

    @classmethod
    def from_accumulator(cls, t, acc, mean_defined=True, var_defined=True):
        """Moments the noise law does not possess are reported as None; the
        SE of the mean needs a finite variance."""
        return cls(t=float(t), n=acc.n,
                   mean=acc.mean if mean_defined else None,
                   mean_se=acc.mean_se if mean_defined and var_defined else None,
                   var=acc.variance if var_defined else None,
                   var_se=acc.var_se if var_defined else None,
                   fourth_central=acc.fourth_central if var_defined else None)


@dataclass
class DensityEstimate:
    t: float | None
    bin_edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    n: int
    out_of_range: int
    bandwidth: float

    @property
    def captured_mass(self):
        return float(self.counts.sum()) / self.n


def freedman_diaconis_bins(samples, value_range, max_bins=1000):
    x = np.asarray(samples, dtype=float)
    q75, q25 = np.percentile(x, [75, 25])
    width = 2.0 * (q75 - q25) * x.size ** (-1.0 / 3.0)
    if not width > 0:
        return 2
    return int(min(max(math.ceil((value_range[1] - value_range[0]) / width), 2), max_bins))


def histogram(samples, value_range=None, n_bins=None, t=None):
    """Normalized histogram over uniform bins; mass outside the range is tallied."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ParameterDomainError("histogram of an empty sample set")
    if value_range is None:
        lo, hi = np.percentile(x, [0.5, 99.5])
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        value_range = (float(lo), float(hi))
    lo, hi = map(float, value_range)
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise ParameterDomainError(f"invalid histogram range {value_range}")
    if n_bins is None:
        n_bins = freedman_diaconis_bins(x, (lo, hi))
    if n_bins < 2:
        raise ParameterDomainError(f"need at least 2 bins, got {n_bins}")
    edges = np.linspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    width = edges[1] - edges[0]
    out = int(x.size - counts.sum())
    return DensityEstimate(t=t, bin_edges=edges, counts=counts, density=counts / (x.size * width),
                           n=int(x.size), out_of_range=out, bandwidth=float(width))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    slope_se: float
    intercept: float


def msd_exponent(times, variances):
    """Least-squares slope of log Var against log t."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(variances, dtype=float)
    if t.size < 3 or t.size != v.size:
        raise ParameterDomainError("need at least 3 (t, Var) pairs")
    if np.any(v <= 0) or np.any(t <= 0):
        raise ParameterDomainError("times and variances must be positive")
    lx, ly = np.log(t), np.log(v)
    xc = lx - lx.mean()
    slope = float((xc * (ly - ly.mean())).sum() / (xc * xc).sum())
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    dof = t.size - 2
    se = math.sqrt(float((resid * resid).sum()) / dof / float((xc * xc).sum()))
    return SlopeFit(slope, se, intercept)


def empirical_cf(samples, u_list):
    """Sample mean of exp(iuX) and the per-component SE bound 1/sqrt(n)."""
    x = np.asarray(samples, dtype=float).ravel()
    u = np.asarray(u_list, dtype=float)
    phase = np.multiply.outer(u, x)
    cf = np.cos(phase).mean(axis=-1) + 1j * np.sin(phase).mean(axis=-1)
    return cf, 1.0 / math.sqrt(x.size)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical: float

    @property
    def rejects(self):
        return self.statistic >= self.critical


def ks_two_sample(a, b):
    """D = sup |F_a - F_b| and the asymptotic 5% critical value."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ParameterDomainError("KS test needs two nonempty samples")
    d = float(stats.ks_2samp(a, b).statistic)
    crit = KS_C_05 * math.sqrt((a.size + b.size) / (a.size * b.size))
    return KSResult(d, crit)
