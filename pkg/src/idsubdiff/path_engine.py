"""Coupled Langevin system in operational time and its subordination.

For k = 0, 1, ... with step ``delta``::

    Y[k+1] = Y[k] + F(Y[k], T[k]) delta + sigma(Y[k], T[k]) dB[k] + E(T[k]) dL[k]
    T[k+1] = T[k] + dT[k]

Coefficients only ever see the pre-update state, which realizes the left
limits Y-, T- of the continuous system. The physical-time process is read
off by first passage: with k* = min{k : T[k] > t}, X(t) = Y[k* - 1] and the
discretized inverse subordinator is S(t) = delta * k*.

Paths are processed in blocks, vectorized across the block. Random numbers
come from per-path streams (see :mod:`sampler`) drawn in fixed-size chunks,
so a path's variates do not depend on which block or worker simulates it.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import coeff_lang
from .errors import ConfigError, ParameterDomainError, StepLimitError
from .exponents import LawSpec
from .sampler import (Component, NoiseKind, NoiseSpec, RngStream, noise_increments,
                      subordinator_increments)

log = logging.getLogger(__name__)

CHUNK = 512
DEFAULT_MAX_STEPS = 20_000_000


@dataclass(frozen=True)
class Scenario:
    law: LawSpec
    F: coeff_lang.CoeffExpr
    sigma: coeff_lang.CoeffExpr
    E: coeff_lang.CoeffExpr
    t_max: float
    delta: float
    obs_times: tuple
    n_paths: int = 1
    master_seed: int = 0
    noise: NoiseSpec = field(default_factory=NoiseSpec.none)
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        obs = tuple(float(t) for t in self.obs_times)
        object.__setattr__(self, "obs_times", obs)
        if not self.delta > 0:
            raise ParameterDomainError(f"delta must be positive, got {self.delta}")
        if not self.t_max > 0:
            raise ParameterDomainError(f"t_max must be positive, got {self.t_max}")
        if not obs:
            raise ParameterDomainError("at least one observation time is required")
        if any(b <= a for a, b in zip(obs, obs[1:])):
            raise ParameterDomainError("observation times must be strictly increasing")
        if obs[0] <= 0 or obs[-1] > self.t_max:
            raise ParameterDomainError("observation times must lie in (0, t_max]")
        if self.n_paths < 1:
            raise ParameterDomainError(f"n_paths must be positive, got {self.n_paths}")
        if self.E.depends_on("x"):
            raise ConfigError("the jump coefficient E must not depend on x: the "
                              "subordinated representation only covers E = E(t)")
        if self.max_steps < 1:
            raise ParameterDomainError("max_steps must be positive")

    @classmethod
    def build(cls, law, F="0", sigma="0", E="0", **kwargs):
        """Convenience constructor taking coefficient source strings."""
        def as_expr(value, allowed):
            if isinstance(value, coeff_lang.CoeffExpr):
                return value
            return coeff_lang.parse(str(value), allowed)
        return cls(law=law, F=as_expr(F, {"x", "t"}), sigma=as_expr(sigma, {"x", "t"}),
                   E=as_expr(E, {"t"}), **kwargs)

    @property
    def space_dependent(self):
        return self.F.depends_on("x") or self.sigma.depends_on("x")

    @property
    def noise_active(self):
        return self.noise.kind is not NoiseKind.NONE and not self.E.is_zero


@dataclass
class PathBundle:
    """One realized trajectory: operational grid, T, Y and the composed X."""
    tau_grid: np.ndarray
    T_vals: np.ndarray
    Y_vals: np.ndarray
    X_obs: np.ndarray
    first_passage: np.ndarray
    obs_times: tuple
    delta: float

    @property
    def S_obs(self):
        return self.delta * self.first_passage

    def S(self, t):
        """Discretized inverse subordinator delta * min{k : T[k] > t}."""
        return self.delta * np.searchsorted(self.T_vals, np.asarray(t, float), side="right")

    def X(self, t):
        """Composed process Y[k*(t) - 1] at arbitrary t within the simulated range."""
        k = np.searchsorted(self.T_vals, np.asarray(t, float), side="right")
        if np.any(k >= len(self.T_vals)):
            raise ValueError("t beyond the simulated first-passage range")
        return self.Y_vals[k - 1]


@dataclass
class BlockResult:
    indices: np.ndarray
    X: np.ndarray              # (B, m) composed samples, NaN for diverged paths
    first_passage: np.ndarray  # (B, m) k* per observation time
    diverged: np.ndarray       # (B,) bool
    steps: np.ndarray          # (B,) operational steps taken
    nudges: int = 0
    paths: list | None = None  # per path (T, Y, dB) arrays when kept


class _Streams:
    __slots__ = ("sub", "bm", "noise")

    def __init__(self, seed, index):
        stream = RngStream(seed, int(index))
        self.sub = stream.generator(Component.SUBORDINATOR)
        self.bm = stream.generator(Component.BROWNIAN)
        self.noise = stream.generator(Component.NOISE)


def _draw(scn, streams, rows, want_y, want_noise):
    dT = np.stack([subordinator_increments(scn.law, scn.delta, streams[r].sub, CHUNK)
                   for r in rows])
    dB = dL = None
    if want_y:
        dB = np.stack([streams[r].bm.standard_normal(CHUNK) for r in rows]) * math.sqrt(scn.delta)
    if want_noise:
        dL = np.stack([noise_increments(scn.noise, scn.delta, streams[r].noise, CHUNK)
                       for r in rows])
    return dT, dB, dL


def _nudge(t_full):
    """Force strict increase where an increment vanished in double precision."""
    bad = np.diff(t_full, axis=1) <= 0
    count = int(bad.sum())
    if count:
        for r in np.flatnonzero(bad.any(axis=1)):
            row = t_full[r]
            for k in range(1, row.size):
                if row[k] <= row[k - 1]:
                    row[k] = np.nextafter(row[k - 1], np.inf)
        log.info("nudged %d tied subordinator values", count)
    return count


def _coeff(expr, x, t):
    return np.asarray(expr(x, t), dtype=float)


def simulate_block(scn, indices, keep_paths=False, subordinator_only=False):
    """Simulate the paths ``indices`` of ``scn`` as one vectorized block."""
    indices = np.asarray(indices, dtype=np.int64)
    n_rows = indices.size
    obs = np.asarray(scn.obs_times)
    m = obs.size
    horizon = obs[-1]
    want_y = not subordinator_only
    want_noise = want_y and scn.noise_active
    fast = not scn.space_dependent

    streams = [_Streams(scn.master_seed, i) for i in indices]
    Y = np.zeros(n_rows)
    T = np.zeros(n_rows)
    X = np.full((n_rows, m), np.nan)
    kstar = np.zeros((n_rows, m), dtype=np.int64)
    done_obs = np.zeros((n_rows, m), dtype=bool)
    diverged = np.zeros(n_rows, dtype=bool)
    steps = np.zeros(n_rows, dtype=np.int64)
    nudges = 0
    kept = [([np.zeros(1)], [np.zeros(1)], []) for _ in range(n_rows)] if keep_paths else None

    active = np.arange(n_rows)
    while active.size:
        if steps[active[0]] + CHUNK > scn.max_steps:
            raise StepLimitError(
                f"paths {indices[active[:5]].tolist()} need more than {scn.max_steps} "
                "operational steps; increase max_steps or delta")
        dT, dB, dL = _draw(scn, streams, active, want_y, want_noise)
        t_full = np.cumsum(np.concatenate([T[active, None], dT], axis=1), axis=1)
        nudges += _nudge(t_full)
        t_pre = t_full[:, :-1]
        t_post = t_full[:, 1:]

        if subordinator_only:
            y_pre = np.zeros_like(t_pre)
            y_last = Y[active]
        elif fast:
            incr = _coeff(scn.F, 0.0, t_pre) * scn.delta + _coeff(scn.sigma, 0.0, t_pre) * dB
            if want_noise:
                incr = incr + _coeff(scn.E, 0.0, t_pre) * dL
            y_full = np.cumsum(np.concatenate([Y[active, None], incr], axis=1), axis=1)
            y_pre = y_full[:, :-1]
            y_last = y_full[:, -1]
        else:
            y_pre = np.empty_like(t_pre)
            y = Y[active].copy()
            with np.errstate(over="ignore", invalid="ignore"):
                for k in range(CHUNK):
                    tk = t_pre[:, k]
                    y_pre[:, k] = y
                    step = _coeff(scn.F, y, tk) * scn.delta + _coeff(scn.sigma, y, tk) * dB[:, k]
                    if want_noise:
                        step = step + _coeff(scn.E, 0.0, tk) * dL[:, k]
                    y = y + step
            y_last = y

        # first passage, one observation time at a time
        limit = np.full(active.size, CHUNK - 1)
        for j in range(m):
            rows = ~done_obs[active, j]
            if not rows.any():
                continue
            passed = t_post[rows] > obs[j]
            hit = passed.any(axis=1)
            first = np.argmax(passed, axis=1)
            sel = np.flatnonzero(rows)[hit]
            g = active[sel]
            X[g, j] = y_pre[sel, first[hit]]
            kstar[g, j] = steps[g] + first[hit] + 1
            done_obs[g, j] = True
            if j == m - 1:
                limit[sel] = first[hit]

        if want_y:
            cols = np.arange(CHUNK)[None, :]
            bad = ~np.isfinite(y_pre) & (cols <= limit[:, None])
            bad_rows = bad.any(axis=1)
            if bad_rows.any():
                g = active[bad_rows]
                diverged[g] = True
                X[g] = np.nan
                log.warning("paths %s diverged", indices[g].tolist())

        if keep_paths:
            for r, g in enumerate(active):
                kept[g][0].append(t_post[r])
                kept[g][1].append(np.append(y_pre[r, 1:], y_last[r]))
                if dB is not None:
                    kept[g][2].append(dB[r])

        T[active] = t_full[:, -1]
        Y[active] = y_last
        steps[active] += CHUNK
        still = ~(done_obs[active, -1] | diverged[active])
        active = active[still]

    paths = None
    if keep_paths:
        paths = [(np.concatenate(t), np.concatenate(y),
                  np.concatenate(b) if b else np.zeros(0)) for t, y, b in kept]
    return BlockResult(indices, X, kstar, diverged, steps, nudges, paths)


def simulate_path(scn, path_index):
    """Full trajectory of one path, truncated just past the last first passage."""
    res = simulate_block(scn, [path_index], keep_paths=True)
    T_vals, Y_vals, _ = res.paths[0]
    end = int(res.first_passage[0, -1]) + 1
    return PathBundle(tau_grid=scn.delta * np.arange(end), T_vals=T_vals[:end],
                      Y_vals=Y_vals[:end], X_obs=res.X[0].copy(),
                      first_passage=res.first_passage[0].copy(),
                      obs_times=scn.obs_times, delta=scn.delta)


def _subordinator_scenario(law, delta, t_list, master_seed):
    zero = coeff_lang.parse("0")
    t_list = tuple(float(t) for t in t_list)
    return Scenario(law=law, F=zero, sigma=zero, E=coeff_lang.parse("0", {"t"}),
                    t_max=t_list[-1], delta=delta, obs_times=t_list,
                    master_seed=master_seed)


def simulate_inverse_subordinator(law, delta, t_list, path_index, master_seed=0):
    """S(t) = delta * min{k : T(k delta) > t} at each t of ``t_list`` for one
    path (an int) or many paths (an array of indices, one row per path)."""
    scn = _subordinator_scenario(law, delta, t_list, master_seed)
    single = np.ndim(path_index) == 0
    res = simulate_block(scn, np.atleast_1d(path_index), subordinator_only=True)
    S = delta * res.first_passage
    return S[0] if single else S


def check_timeforce_scenario(scn):
    if scn.F.depends_on("x"):
        raise ConfigError("time-force representation needs F = F(t)")
    if scn.sigma.variables:
        raise ConfigError("time-force representation needs a constant sigma")
    if scn.noise_active:
        raise ConfigError("time-force representation needs E = 0 (no Levy noise)")


def simulate_timeforce_integral(scn, path_indices, grid_step=None):
    """Alternate representation int_0^t F(u) dS(u) + sigma B(S(t)).

    The Stieltjes integral is a left-point sum over a physical-time grid of
    step ``grid_step`` (default ``scn.delta``) refined by the observation
    times; S is the first-passage clock of the same subordinator path,
    shifted so that S(0) = 0. Returns an (n, m) array of samples.
    """
    check_timeforce_scenario(scn)
    h = scn.delta if grid_step is None else grid_step
    obs = np.asarray(scn.obs_times)
    grid = np.union1d(h * np.arange(int(math.floor(obs[-1] / h)) + 1), obs)
    obs_pos = np.searchsorted(grid, obs)
    f_grid = np.asarray(scn.F(0.0, grid[:-1]), dtype=float) * np.ones(grid.size - 1)
    sigma = float(scn.sigma(0.0, 0.0))

    res = simulate_block(scn, path_indices, keep_paths=True)
    out = np.empty((len(res.indices), obs.size))
    for r, (T_vals, _, dB) in enumerate(res.paths):
        clock = scn.delta * (np.searchsorted(T_vals, grid, side="right") - 1)
        integral = np.concatenate([[0.0], np.cumsum(f_grid * np.diff(clock))])
        b_path = np.concatenate([[0.0], np.cumsum(dB)])
        out[r] = integral[obs_pos] + sigma * b_path[res.first_passage[r] - 1]
    return out
