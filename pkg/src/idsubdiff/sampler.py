"""Exact random variate generation and the per-path RNG stream contract.

Every path owns three independent Philox streams (subordinator, Brownian,
Levy noise) keyed by ``(master_seed, path_index)``; the component id sits in
the top counter word, so the streams never overlap and any path can be
regenerated on its own, on any worker.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ParameterDomainError, SamplerError
from .exponents import Family

_MASK64 = (1 << 64) - 1
REJECTION_CAP = 10_000_000


class Component(enum.IntEnum):
    SUBORDINATOR = 0
    BROWNIAN = 1
    NOISE = 2


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    path_index: int

    def generator(self, component):
        key = np.array([self.master_seed & _MASK64, self.path_index & _MASK64], dtype=np.uint64)
        counter = np.array([0, 0, 0, int(component)], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _uniform_open(rng, size, low, high):
    # (low, high) excluding both ends; the CMS formulas are singular there
    u = rng.random(size)
    return low + (high - low) * (u + 2.0 ** -54)


# --- one-sided stable -------------------------------------------------------

def onesided_stable_transform(alpha, u, w):
    """Kanter/CMS map from U ~ Uniform(0, pi), W ~ Exp(1) to a positive stable
    variate with Laplace transform exp(-s**alpha)."""
    return (np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
            * (np.sin((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha))


def sample_onesided_stable(alpha, rng, size=None):
    if not 0.0 < alpha < 1.0:
        raise ParameterDomainError(f"alpha must lie in (0, 1), got {alpha}")
    u = _uniform_open(rng, size, 0.0, math.pi)
    w = rng.standard_exponential(size)
    return onesided_stable_transform(alpha, u, w)


def sample_tempered_stable_increment(alpha, lam, dt, rng, size=None):
    """Increment over ``dt`` of the subordinator with exponent (u+lam)^a - lam^a.

    Exponential tilting by rejection: propose dt**(1/alpha) * S and accept
    with probability exp(-lam * X).
    """
    if not dt > 0:
        raise ParameterDomainError(f"dt must be positive, got {dt}")
    if lam < 0:
        raise ParameterDomainError(f"lambda must be non-negative, got {lam}")
    scale = dt ** (1.0 / alpha)
    shape = () if size is None else size
    n = int(np.prod(shape))
    out = np.empty(n)
    todo = np.arange(n)
    attempts = 0
    while todo.size:
        attempts += 1
        if attempts > REJECTION_CAP:
            raise SamplerError(
                f"tempered-stable rejection exceeded {REJECTION_CAP} rounds; "
                f"acceptance is too low for dt={dt}, use a smaller step")
        x = scale * sample_onesided_stable(alpha, rng, todo.size)
        v = rng.random(todo.size)
        ok = v <= np.exp(-lam * x)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return float(out[0]) if size is None else out.reshape(shape)


def sample_distributed_order_increment(mixture, dt, rng, size=None):
    """Sum over components of (w Gamma(1-b) dt)^(1/b) * S_b."""
    if not dt > 0:
        raise ParameterDomainError(f"dt must be positive, got {dt}")
    total = 0.0
    for w, b in mixture:
        scale = (w * special.gamma(1.0 - b) * dt) ** (1.0 / b)
        total = total + scale * sample_onesided_stable(b, rng, size)
    return total


def subordinator_increments(law, dt, rng, size=None):
    """Increments T(tau + dt) - T(tau) for any cataloged law."""
    if law.family is Family.STABLE:
        return dt ** (1.0 / law.alpha) * sample_onesided_stable(law.alpha, rng, size)
    if law.family is Family.TEMPERED:
        return sample_tempered_stable_increment(law.alpha, law.lam, dt, rng, size)
    return sample_distributed_order_increment(law.mixture, dt, rng, size)


# --- driving Levy noise -----------------------------------------------------

class NoiseKind(str, enum.Enum):
    NONE = "none"
    SYMMETRIC_STABLE = "symmetric_stable"
    COMPOUND_POISSON = "compound_poisson"


class JumpLaw(str, enum.Enum):
    GAUSSIAN = "gaussian"
    TWO_POINT = "two_point"


@dataclass(frozen=True)
class NoiseSpec:
    """Pure-jump Levy noise L (no drift, no Gaussian part).

    ``symmetric_stable``: E exp(iuL(t)) = exp(-t |u|**beta).
    ``compound_poisson``: jumps at ``rate`` with Gaussian(jump_mean, jump_sd)
    sizes or +1/-1 with probabilities p / 1-p.
    """
    kind: NoiseKind = NoiseKind.NONE
    beta: float | None = None
    rate: float | None = None
    jump_law: JumpLaw | None = None
    jump_mean: float = 0.0
    jump_sd: float = 1.0
    p: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.kind is NoiseKind.SYMMETRIC_STABLE:
            if self.beta is None or not 0.0 < self.beta < 2.0:
                raise ParameterDomainError(f"beta must lie in (0, 2), got {self.beta}")
        if self.kind is NoiseKind.COMPOUND_POISSON:
            if self.rate is None or not self.rate > 0.0:
                raise ParameterDomainError(f"jump rate must be positive, got {self.rate}")
            object.__setattr__(self, "jump_law", JumpLaw(self.jump_law or JumpLaw.GAUSSIAN))
            if not self.jump_sd >= 0.0:
                raise ParameterDomainError(f"jump_sd must be non-negative, got {self.jump_sd}")
            if not 0.0 <= self.p <= 1.0:
                raise ParameterDomainError(f"p must lie in [0, 1], got {self.p}")

    @classmethod
    def none(cls):
        return cls(NoiseKind.NONE)

    @classmethod
    def symmetric_stable(cls, beta):
        return cls(NoiseKind.SYMMETRIC_STABLE, beta=float(beta))

    @classmethod
    def compound_poisson(cls, rate, jump_law="gaussian", jump_mean=0.0, jump_sd=1.0, p=0.5):
        return cls(NoiseKind.COMPOUND_POISSON, rate=float(rate), jump_law=JumpLaw(jump_law),
                   jump_mean=float(jump_mean), jump_sd=float(jump_sd), p=float(p))

    def cf(self, u, dt):
        """Characteristic function of an increment over ``dt``."""
        u = np.asarray(u, dtype=float)
        if self.kind is NoiseKind.NONE:
            return np.ones_like(u, dtype=complex)
        if self.kind is NoiseKind.SYMMETRIC_STABLE:
            return np.exp(-dt * np.abs(u) ** self.beta) + 0j
        if self.jump_law is JumpLaw.GAUSSIAN:
            jump_cf = np.exp(1j * u * self.jump_mean - 0.5 * (self.jump_sd * u) ** 2)
        else:
            jump_cf = self.p * np.exp(1j * u) + (1.0 - self.p) * np.exp(-1j * u)
        return np.exp(self.rate * dt * (jump_cf - 1.0))


def symmetric_stable_transform(beta, u, w):
    """CMS map for the symmetric case; U ~ Uniform(-pi/2, pi/2), W ~ Exp(1)."""
    if beta == 1.0:
        return np.tan(u)
    return (np.sin(beta * u) / np.cos(u) ** (1.0 / beta)
            * (np.cos((1.0 - beta) * u) / w) ** ((1.0 - beta) / beta))


def sample_symmetric_stable(beta, scale, rng, size=None):
    """Symmetric stable variate with characteristic function exp(-|scale u|^beta)."""
    if not 0.0 < beta < 2.0:
        raise ParameterDomainError(f"beta must lie in (0, 2), got {beta}")
    if not scale > 0:
        raise ParameterDomainError(f"scale must be positive, got {scale}")
    u = _uniform_open(rng, size, -0.5 * math.pi, 0.5 * math.pi)
    w = rng.standard_exponential(size)
    return scale * symmetric_stable_transform(beta, u, w)


def sample_compound_poisson_increment(spec, dt, rng, size=None):
    """Sum of Poisson(rate * dt) jumps drawn from the noise's jump law."""
    if not dt > 0:
        raise ParameterDomainError(f"dt must be positive, got {dt}")
    counts = rng.poisson(spec.rate * dt, size)
    if spec.jump_law is JumpLaw.GAUSSIAN:
        # a sum of N iid Gaussians is Gaussian(N mean, N sd^2)
        z = rng.standard_normal(size)
        return counts * spec.jump_mean + spec.jump_sd * np.sqrt(counts) * z
    ups = rng.binomial(counts, spec.p)
    return (2 * ups - counts).astype(float)


def noise_increments(spec, dt, rng, size=None):
    if spec.kind is NoiseKind.NONE:
        return np.zeros(size) if size is not None else 0.0
    if spec.kind is NoiseKind.SYMMETRIC_STABLE:
        return sample_symmetric_stable(spec.beta, dt ** (1.0 / spec.beta), rng, size)
    return sample_compound_poisson_increment(spec, dt, rng, size)
