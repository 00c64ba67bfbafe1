import math

import numpy as np
import pytest
from scipy import special

from idsubdiff import coeff_lang
from idsubdiff import path_engine as pe
from idsubdiff.errors import ConfigError, ParameterDomainError, StepLimitError
from idsubdiff.estimators import ks_two_sample
from idsubdiff.exponents import LawSpec
from idsubdiff.sampler import NoiseSpec

HALF = LawSpec.stable(0.5)


def scenario(law=HALF, F="0", sigma="0", E="0", obs=(0.5, 1.0), **kw):
    kw.setdefault("delta", 1e-3)
    return pe.Scenario.build(law, F=F, sigma=sigma, E=E, t_max=max(obs), obs_times=obs, **kw)


def test_scenario_validation():
    with pytest.raises(ConfigError):
        pe.Scenario.build(HALF, E=coeff_lang.parse("x"), t_max=1, delta=1e-3, obs_times=(1.0,))
    with pytest.raises(ParameterDomainError):
        scenario(obs=(1.0, 0.5))
    with pytest.raises(ParameterDomainError):
        scenario(delta=0.0)
    with pytest.raises(ParameterDomainError):
        pe.Scenario.build(HALF, t_max=1.0, delta=1e-3, obs_times=(2.0,))


def test_zero_dynamics():
    res = pe.simulate_block(scenario(), np.arange(50))
    assert np.all(res.X == 0.0)


def test_path_bundle_invariants():
    scn = scenario(F="-x + cos(t)", sigma="1", E="1", noise=NoiseSpec.compound_poisson(5.0),
                   obs=(0.3, 0.7, 1.0))
    for idx in range(20):
        pb = pe.simulate_path(scn, idx)
        assert pb.T_vals[0] == 0.0 and pb.Y_vals[0] == 0.0
        assert np.all(np.diff(pb.T_vals) > 0)
        for j, t in enumerate(scn.obs_times):
            last = np.flatnonzero(pb.T_vals <= t)[-1]
            assert pb.X_obs[j] == pb.Y_vals[last]
            assert pb.first_passage[j] == last + 1
        np.testing.assert_array_equal(pb.tau_grid, 1e-3 * np.arange(pb.T_vals.size))


def test_composed_process_constant_between_passages():
    pb = pe.simulate_path(scenario(sigma="1", obs=(1.0,)), 4)
    k = np.arange(1, pb.T_vals.size - 1)
    # every t in [T_k, T_{k+1}) sees the same value Y_k
    lo = pb.X(pb.T_vals[k])
    mid = pb.X(0.5 * (pb.T_vals[k] + pb.T_vals[k + 1]))
    np.testing.assert_array_equal(lo, pb.Y_vals[k])
    np.testing.assert_array_equal(mid, pb.Y_vals[k])


def test_simulate_path_matches_block():
    scn = scenario(F="sin(x)", sigma="1")
    res = pe.simulate_block(scn, np.arange(5, 8))
    for r, idx in enumerate(range(5, 8)):
        np.testing.assert_array_equal(pe.simulate_path(scn, idx).X_obs, res.X[r])


def test_paths_independent_of_block_composition():
    scn = scenario(sigma="1", F="-x")
    whole = pe.simulate_block(scn, np.arange(10)).X
    parts = np.concatenate([pe.simulate_block(scn, np.arange(a, a + 3)).X for a in (0, 3, 6)]
                           + [pe.simulate_block(scn, [9]).X])
    np.testing.assert_array_equal(whole, parts)


def test_fast_and_slow_paths_agree():
    fast = pe.simulate_block(scenario(F="cos(t)", sigma="1"), np.arange(30)).X
    slow = pe.simulate_block(scenario(F="cos(t) + 0 * x", sigma="1"), np.arange(30)).X
    np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-12)


def test_left_limit_discipline(monkeypatch):
    # a single jump of size 100 at step 10: the drift -x used at that step must
    # still see Y_10 = 0, so Y_11 = 100 exactly and Y_12 = 100 (1 - delta)
    def spiked(spec, dt, rng, size):
        out = np.zeros(size)
        out[10] = 100.0
        return out

    monkeypatch.setattr(pe, "noise_increments", spiked)
    scn = scenario(F="-x", E="1", noise=NoiseSpec.symmetric_stable(1.5), obs=(0.01,))
    pb = pe.simulate_path(scn, 0)
    assert pb.Y_vals[10] == 0.0
    assert pb.Y_vals[11] == 100.0
    assert pb.Y_vals[12] == pytest.approx(100.0 * (1 - 1e-3), rel=1e-15)


def test_drift_one_gives_shifted_clock():
    scn = scenario(F="1")
    res = pe.simulate_block(scn, np.arange(200))
    np.testing.assert_allclose(res.X, 1e-3 * (res.first_passage - 1), rtol=1e-9)


def test_inverse_subordinator_properties():
    t = np.linspace(0.05, 2.0, 40)
    S = pe.simulate_inverse_subordinator(HALF, 1e-3, t, np.arange(300), master_seed=5)
    assert S.shape == (300, 40)
    assert np.all(np.diff(S, axis=1) >= 0)
    k = S / 1e-3
    np.testing.assert_allclose(k, np.round(k), atol=1e-9)
    single = pe.simulate_inverse_subordinator(HALF, 1e-3, t, 17, master_seed=5)
    np.testing.assert_array_equal(single, S[17])


def test_inverse_subordinator_increments_bounded_by_delta():
    pb = pe.simulate_path(scenario(obs=(1.0,)), 2)
    t = np.linspace(0.001, 1.0, 2000)
    dS = np.diff(pb.S(t))
    assert set(np.round(dS / 1e-3).astype(int)) <= set(range(0, 2000))
    # S(t) brackets the exact first passage within one step
    assert np.all(pb.S(pb.T_vals[1:-1]) - pb.tau_grid[1:-1] == pytest.approx(1e-3))


def test_inverse_subordinator_mean_stable_half():
    S = pe.simulate_inverse_subordinator(HALF, 1e-3, [1.0], np.arange(10_000), master_seed=1)[:, 0]
    se = S.std(ddof=1) / 100
    assert abs(S.mean() - 1 / special.gamma(1.5)) < 3 * se + 1e-3


def test_free_variance_stable_half():
    res = pe.simulate_block(scenario(sigma="1", obs=(1.0,), master_seed=2), np.arange(10_000))
    x = res.X[:, 0]
    var_se = math.sqrt((np.mean((x - x.mean()) ** 4) - x.var() ** 2) / x.size)
    assert abs(x.var(ddof=1) - 1 / special.gamma(1.5)) < 3 * var_se


def test_divergence_flagged():
    scn = scenario(F="x ^ 2 * 1e6", sigma="1", obs=(1.0,))
    res = pe.simulate_block(scn, np.arange(20))
    assert res.diverged.all()
    assert np.isnan(res.X).all()


def test_step_limit():
    scn = scenario(sigma="1", obs=(50.0,), max_steps=1000)
    with pytest.raises(StepLimitError):
        pe.simulate_block(scn, [0])


def test_tie_nudge(monkeypatch):
    monkeypatch.setattr(pe, "subordinator_increments",
                        lambda law, dt, rng, size: np.where(np.arange(size) % 2, 0.0, 1e-3))
    pb = pe.simulate_path(scenario(obs=(0.1,)), 0)
    assert np.all(np.diff(pb.T_vals) > 0)


def test_self_similarity():
    law = LawSpec.stable(0.7)
    scn = scenario(law=law, sigma="1", obs=(0.5, 1.0), master_seed=3)
    res = pe.simulate_block(scn, np.arange(10_000))
    ks = ks_two_sample(res.X[:, 1], 2 ** (0.7 / 2) * res.X[:, 0])
    assert ks.statistic < ks.critical


def test_step_halving_consistency():
    stats = []
    for delta, seed in ((2e-3, 10), (1e-3, 11)):
        x = pe.simulate_block(scenario(F="1", sigma="1", obs=(1.0,), delta=delta,
                                       master_seed=seed), np.arange(8000)).X[:, 0]
        stats.append((x.mean(), x.var(ddof=1), x.std(ddof=1) / math.sqrt(x.size)))
    (m1, v1, s1), (m2, v2, s2) = stats
    assert abs(m1 - m2) < 3 * math.hypot(s1, s2) + 2e-3


# --- time-force representation ----------------------------------------------

def test_timeforce_constant_force_is_scaled_clock():
    scn = scenario(F="2.5", obs=(0.4, 1.0))
    idx = np.arange(100)
    alt = pe.simulate_timeforce_integral(scn, idx)
    coupled = pe.simulate_block(scn, idx).X
    np.testing.assert_allclose(alt, coupled, rtol=1e-12)


def test_timeforce_zero_force_is_subordinated_brownian():
    scn = scenario(sigma="1.3", obs=(0.4, 1.0))
    idx = np.arange(100)
    np.testing.assert_allclose(pe.simulate_timeforce_integral(scn, idx),
                               pe.simulate_block(scn, idx).X, rtol=1e-12)


def test_timeforce_riemann_stieltjes_oracle():
    # F = cos t: int_0^t cos u dS(u) evaluated along one stored path by hand
    scn = scenario(F="cos(t)", obs=(1.0,))
    pb = pe.simulate_path(scn, 0)
    grid = np.linspace(0, 1.0, 1001)
    clock = pb.S(grid) - 1e-3
    expected = np.sum(np.cos(grid[:-1]) * np.diff(clock))
    assert pe.simulate_timeforce_integral(scn, [0])[0, 0] == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("kw", [dict(F="x"), dict(sigma="t"), dict(sigma="x"),
                                dict(E="1", noise=NoiseSpec.symmetric_stable(1.5))])
def test_timeforce_preconditions(kw):
    with pytest.raises(ConfigError):
        pe.simulate_timeforce_integral(scenario(**kw), [0])
