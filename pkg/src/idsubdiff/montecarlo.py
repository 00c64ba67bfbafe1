"""Ensemble orchestration.

Path indices are cut into fixed blocks whose boundaries depend only on
``block_size``, never on the worker count. Each block yields per-time moment
accumulators and its samples; the parent merges accumulators with a
balanced tree keyed by block position and concatenates samples in block
order. Reported statistics are therefore bit-identical for any number of
workers.
"""

import dataclasses
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import special

from . import __version__
from . import estimators as est
from . import reference
from .errors import ConfigError, RunFailure
from .path_engine import Scenario, check_timeforce_scenario, simulate_block, simulate_timeforce_integral
from .sampler import NoiseKind

log = logging.getLogger(__name__)

DEFAULT_BLOCK = 1000
MAX_DIVERGED_FRACTION = 1e-3


@dataclasses.dataclass
class BlockStats:
    start: int
    samples: np.ndarray        # (n_ok, m)
    accumulators: list
    diverged: list
    nudges: int
    steps: int


@dataclasses.dataclass
class RunReport:
    scenario: dict
    moments: list
    densities: list
    wall_clock: float
    workers: int
    seed: int
    engine_version: str
    n_paths: int
    n_diverged: int
    diverged_paths: list
    tie_nudges: int
    operational_steps: int
    verdicts: dict
    samples: np.ndarray | None = dataclasses.field(default=None, repr=False)

    def moment_at(self, t):
        for m in self.moments:
            if m.t == t:
                return m
        raise KeyError(t)

    def to_dict(self):
        def density(d):
            return {"t": d.t, "n": d.n, "out_of_range": d.out_of_range,
                    "bin_width": d.bandwidth, "range": [float(d.bin_edges[0]), float(d.bin_edges[-1])],
                    "bins": int(d.counts.size), "captured_mass": d.captured_mass}
        return {"engine_version": self.engine_version, "seed": self.seed, "workers": self.workers,
                "wall_clock_s": self.wall_clock, "n_paths": self.n_paths,
                "n_diverged": self.n_diverged, "diverged_paths": self.diverged_paths,
                "tie_nudges": self.tie_nudges, "operational_steps": self.operational_steps,
                "scenario": self.scenario,
                "moments": [dataclasses.asdict(m) for m in self.moments],
                "densities": [density(d) for d in self.densities],
                "verdicts": self.verdicts}


def scenario_echo(scn):
    law = scn.law
    noise = scn.noise
    return {
        "law": {"family": law.family.value, "alpha": law.alpha, "lambda": law.lam,
                "mixture": [list(c) for c in law.mixture] if law.mixture else None},
        "noise": {"kind": noise.kind.value, "beta": noise.beta, "rate": noise.rate,
                  "jump_law": noise.jump_law.value if noise.jump_law else None,
                  "jump_mean": noise.jump_mean, "jump_sd": noise.jump_sd, "p": noise.p},
        "coefficients": {"F": scn.F.source, "sigma": scn.sigma.source, "E": scn.E.source},
        "grid": {"delta": scn.delta, "t_max": scn.t_max, "obs_times": list(scn.obs_times),
                 "max_steps": scn.max_steps},
        "ensemble": {"n_paths": scn.n_paths, "seed": scn.master_seed},
    }


def moments_defined(scn):
    """(mean defined, variance defined) for the scenario's noise."""
    if scn.noise_active and scn.noise.kind is NoiseKind.SYMMETRIC_STABLE:
        return scn.noise.beta > 1.0, False
    return True, True


def _blocks(n_paths, block_size):
    return [(s, min(s + block_size, n_paths)) for s in range(0, n_paths, block_size)]


def _run_block(scn, start, stop):
    res = simulate_block(scn, np.arange(start, stop))
    ok = ~res.diverged
    samples = res.X[ok]
    accs = [est.MomentAccumulator.from_samples(samples[:, j]) for j in range(samples.shape[1])]
    return BlockStats(start, samples, accs, res.indices[res.diverged].tolist(), res.nudges,
                      int(res.steps.sum()))


def _map_blocks(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def run_ensemble(scn, workers=1, block_size=DEFAULT_BLOCK, density_range=None, n_bins=None,
                 max_diverged_fraction=MAX_DIVERGED_FRACTION, keep_samples=False):
    """Simulate ``scn.n_paths`` paths and reduce them to a :class:`RunReport`."""
    if workers < 1:
        raise ConfigError(f"workers must be positive, got {workers}")
    t0 = time.perf_counter()
    tasks = [(scn, a, b) for a, b in _blocks(scn.n_paths, block_size)]
    blocks = _map_blocks(_run_block, tasks, workers)

    diverged = [i for b in blocks for i in b.diverged]
    if len(diverged) > max_diverged_fraction * scn.n_paths:
        raise RunFailure(f"{len(diverged)} of {scn.n_paths} paths diverged "
                         f"(limit {max_diverged_fraction:g}); seed {scn.master_seed}",
                         offending=diverged)
    if diverged:
        log.warning("%d diverged paths excluded: %s", len(diverged), diverged[:20])

    mean_ok, var_ok = moments_defined(scn)
    samples = np.concatenate([b.samples for b in blocks], axis=0)
    moments, densities = [], []
    for j, t in enumerate(scn.obs_times):
        acc = est.merge_pairwise(b.accumulators[j] for b in blocks)
        moments.append(est.MomentSummary.from_accumulator(t, acc, mean_ok, var_ok))
        if samples.shape[0]:
            densities.append(est.histogram(samples[:, j], density_range, n_bins, t=t))

    report = RunReport(
        scenario=scenario_echo(scn), moments=moments, densities=densities,
        wall_clock=time.perf_counter() - t0, workers=workers, seed=scn.master_seed,
        engine_version=__version__, n_paths=scn.n_paths, n_diverged=len(diverged),
        diverged_paths=diverged, tie_nudges=sum(b.nudges for b in blocks),
        operational_steps=sum(b.steps for b in blocks), verdicts={},
        samples=samples if keep_samples else None)
    report.verdicts = builtin_verdicts(scn, moments)
    return report


def builtin_verdicts(scn, moments):
    """Oracle checks that apply to the scenario as configured."""
    verdicts = {}
    try:
        params = reference.classify_reference_case(scn, "free")
    except ConfigError:
        return verdicts
    a = scn.law.alpha
    for m in moments:
        if m.var is None or m.n < 2:
            continue
        expected = params["sigma"] ** 2 * m.t ** a / special.gamma(1.0 + a)
        tol = max(3.0 * m.var_se, 0.02 * expected)
        verdicts[f"free_variance_t{m.t:g}"] = {
            "measured": m.var, "expected": expected, "tolerance": tol,
            "pass": bool(abs(m.var - expected) <= tol)}
    return verdicts


# --- representation equivalence ---------------------------------------------

def arm_seeds(master_seed):
    """Two independent master seeds derived from one."""
    return [int(np.random.SeedSequence([master_seed, arm]).generate_state(1, np.uint64)[0])
            for arm in (0, 1)]


def _run_coupled(scn, start, stop):
    res = simulate_block(scn, np.arange(start, stop))
    return res.X[~res.diverged]


def _run_timeforce(scn, start, stop):
    return simulate_timeforce_integral(scn, np.arange(start, stop))


@dataclasses.dataclass(frozen=True)
class EquivalenceVerdict:
    t: float
    statistic: float
    critical: float

    @property
    def passed(self):
        return self.statistic < self.critical


def run_equivalence_suite(scn, n_per_arm=None, workers=1, block_size=DEFAULT_BLOCK):
    """KS distance between the coupled system and the time-force integral.

    The coupled arm runs the scenario as given; the other arm evaluates
    int F dS + sigma B(S) along independent subordinator paths.
    """
    check_timeforce_scenario(scn)
    n = scn.n_paths if n_per_arm is None else n_per_arm
    seed_a, seed_b = arm_seeds(scn.master_seed)
    scn_a = dataclasses.replace(scn, master_seed=seed_a, n_paths=n)
    scn_b = dataclasses.replace(scn, master_seed=seed_b, n_paths=n)
    blocks = _blocks(n, block_size)
    a = np.concatenate(_map_blocks(_run_coupled, [(scn_a, s, e) for s, e in blocks], workers))
    b = np.concatenate(_map_blocks(_run_timeforce, [(scn_b, s, e) for s, e in blocks], workers))
    out = []
    for j, t in enumerate(scn.obs_times):
        ks = est.ks_two_sample(a[:, j], b[:, j])
        out.append(EquivalenceVerdict(t, ks.statistic, ks.critical))
    return out


def free_variance_oracle(alpha, t, sigma=1.0):
    return sigma * sigma * t ** alpha / math.gamma(1.0 + alpha)
