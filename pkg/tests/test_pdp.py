import numpy as np
import pytest

from accidentflow.capacity import AccidentParams
from accidentflow.ensemble import first_jump_samples, path_rng, simulate_ensemble
from accidentflow.measures import RateParams, upjump_measure
from accidentflow.pdp import (ApproxFlow, BoundViolation, PathConfig, approx_next_jump,
                              exact_next_jump, growth_rate_bound, simulate_path)
from accidentflow.solver import Diagnostics, evolve
from accidentflow.stats import ecdf, exponential_table, first_jump_law, ks_critical_value, ks_distance

from conftest import uniform_path_config


def test_zero_rate_is_censored_in_both_engines():
    cfg = uniform_path_config(rho=0.0, horizon=3.0)
    rng = np.random.default_rng(0)
    nj = approx_next_jump(cfg.initial_state(), cfg, rng)
    assert nj.censored and nj.time == 3.0
    nj = exact_next_jump(cfg.initial_state(), cfg, rng, bound=1.0)
    assert nj.censored and nj.time == 3.0 and nj.state.time == 3.0


def test_full_acceptance_gives_deterministic_time():
    cfg = uniform_path_config(dt_ref=5.0, horizon=10.0)  # psi = 1
    assert cfg.psi(cfg.initial_state()) == pytest.approx(1.0)
    rng = np.random.default_rng(1)
    for _ in range(20):
        nj = approx_next_jump(cfg.initial_state(), cfg, rng)
        assert not nj.censored
        assert nj.time == pytest.approx(1.0, abs=1e-15)
        assert nj.state.time == nj.time


def test_full_acceptance_restarts_from_state_time():
    cfg = uniform_path_config(dt_ref=5.0, horizon=10.0)
    start = cfg.initial_state().replace(time=2.5)
    nj = approx_next_jump(start, cfg, np.random.default_rng(2))
    assert nj.time == pytest.approx(3.5)


@pytest.mark.parametrize("bound_factor", [1.0, 2.0])
def test_exact_thinning_is_exponential(bound_factor):
    cfg = uniform_path_config(horizon=50.0)
    psi = cfg.psi(cfg.initial_state())
    rng = np.random.default_rng(3)
    n = 4000
    times = np.array([exact_next_jump(cfg.initial_state(), cfg, rng, bound=bound_factor * psi).time
                      for _ in range(n)])
    emp = ecdf(times)
    assert ks_distance(emp, lambda t: -np.expm1(-psi * np.asarray(t))) < ks_critical_value(n, 0.01)


def test_bound_violation():
    cfg = uniform_path_config(horizon=50.0)
    with pytest.raises(BoundViolation):
        for seed in range(50):
            exact_next_jump(cfg.initial_state(), cfg, np.random.default_rng(seed), bound=0.5)


def test_growth_bound_dominates_rate(smooth_convergence):
    cfg = smooth_convergence.with_overrides(horizon=1.0).path_config()
    start = cfg.initial_state()
    bound = growth_rate_bound(start, cfg, cfg.horizon)
    flow = ApproxFlow(start, cfg)
    k = 0
    while True:
        _, dt, psi = flow.step(k)
        assert psi <= bound
        if dt == 0.0:
            break
        k += 1
    nj = exact_next_jump(start, cfg, np.random.default_rng(0))
    assert nj.censored or 0.0 < nj.time <= 1.0


def test_unusable_automatic_bound_rejected(bottleneck):
    cfg = bottleneck.with_overrides(horizon=10.0, engine="exact").path_config()
    with pytest.raises(ValueError, match="unusable"):
        exact_next_jump(cfg.initial_state(), cfg, np.random.default_rng(0))


def test_horizon_zero():
    cfg = uniform_path_config(horizon=0.0, snapshot_times=(0.0,))
    res = simulate_path(cfg, np.random.default_rng(0))
    assert res.jumps == []
    np.testing.assert_array_equal(res.snapshots[0.0], cfg.rho0)


def test_shared_flow_matches_fresh_flow(bottleneck):
    cfg = bottleneck.with_overrides(horizon=20.0).path_config()
    start = cfg.initial_state()
    flow = ApproxFlow(start, cfg)
    for seed in range(30):
        a = approx_next_jump(start, cfg, np.random.default_rng(seed), flow)
        b = approx_next_jump(start, cfg, np.random.default_rng(seed))
        assert a.time == b.time and a.censored == b.censored
        assert a.state.rho.tobytes() == b.state.rho.tobytes()


def test_flow_from_other_state_rejected():
    cfg = uniform_path_config()
    flow = ApproxFlow(cfg.initial_state(), cfg)
    with pytest.raises(ValueError):
        approx_next_jump(cfg.initial_state(), cfg, np.random.default_rng(0), flow)


@pytest.fixture(scope="module")
def bottleneck_path(bottleneck):
    cfg = bottleneck.with_overrides(horizon=30.0).path_config()
    diag = Diagnostics()
    return cfg, simulate_path(cfg, path_rng(2019, 0), diag)


def test_jump_times_strictly_increase(bottleneck_path):
    _, res = bottleneck_path
    times = [j.time for j in res.jumps]
    assert len(times) > 0
    assert all(0 < t0 < t1 for t0, t1 in zip(times, times[1:]))
    assert res.final.time == 30.0
    assert res.diagnostics.valid


def test_first_accident_at_positive_upjump(bottleneck_path):
    cfg, res = bottleneck_path
    first = res.jumps[0]
    assert first.kind == "accident" and first.slot == 1
    pre = evolve(res.initial, first.time, cfg.dynamics)
    atoms, _ = upjump_measure(pre.rho)
    iface = cfg.dynamics.grid.interfaces
    k = int(np.flatnonzero(iface == first.params.position)[0])
    assert atoms[k] > 0.0


def test_every_accident_at_positive_upjump_beta_zero(bottleneck_path):
    cfg, res = bottleneck_path
    iface = cfg.dynamics.grid.interfaces
    for rec, post in zip(res.jumps, res.post_states):
        if rec.kind != "accident":
            continue
        k = np.flatnonzero(iface == rec.params.position)
        assert k.size == 1
        atoms, _ = upjump_measure(post.rho)  # density is unchanged by the jump
        assert atoms[k[0]] > 0.0


def test_slots_follow_records(bottleneck_path):
    _, res = bottleneck_path
    for rec, post in zip(res.jumps, res.post_states):
        assert post.accidents == rec.accidents
        slot = post.accidents[rec.slot - 1]
        if rec.kind == "accident":
            assert slot is rec.params
        else:
            assert slot.drop == 0.0 and slot.position == rec.params.position


def test_mid_segment_snapshot_matches_evolution(bottleneck):
    base = bottleneck.with_overrides(horizon=30.0).path_config()
    probe = simulate_path(base, path_rng(2019, 0))
    assert len(probe.jumps) >= 2
    t0, t1 = probe.jumps[0].time, probe.jumps[1].time
    mid = 0.5 * (t0 + t1)
    cfg = PathConfig(**{**base.__dict__, "snapshot_times": (mid,)})
    res = simulate_path(cfg, path_rng(2019, 0))
    assert [j.time for j in res.jumps] == [j.time for j in probe.jumps]
    expected = evolve(res.segment_start(mid), mid, cfg.dynamics).rho
    assert res.snapshots[mid].tobytes() == expected.tobytes()
    assert res.segment_start(mid) is res.post_states[0]


def test_same_seed_same_chain(bottleneck):
    cfg = bottleneck.with_overrides(horizon=15.0).path_config()
    a = simulate_path(cfg, path_rng(5, 3))
    b = simulate_path(cfg, path_rng(5, 3))
    assert [(j.time, j.kind, j.slot, j.params) for j in a.jumps] == \
           [(j.time, j.kind, j.slot, j.params) for j in b.jumps]


def test_fast_resolution_alternates():
    base = uniform_path_config(horizon=30.0, flux=0.5)
    cfg = PathConfig(**{**base.__dict__, "rates": RateParams(0.5, 0.1, 500.0), "dt_ref": 1e-3})
    res = simulate_path(cfg, np.random.default_rng(8))
    kinds = [j.kind for j in res.jumps]
    assert len(kinds) >= 10
    pairs = sum(1 for a, b in zip(kinds, kinds[1:]) if a == "accident" and b == "resolution")
    assert pairs >= 0.9 * kinds.count("accident") - 1
    durations = [b.time - a.time for a, b in zip(res.jumps, res.jumps[1:])
                 if a.kind == "accident" and b.kind == "resolution"]
    assert np.median(durations) < 0.05


def test_exact_engine_paths_and_discard():
    cfg = uniform_path_config(horizon=50.0, engine="exact", bound=0.2)
    results = simulate_ensemble(cfg, 4, seed=1)
    assert all(isinstance(r, BoundViolation) for _, r in results)
    # psi <= flux * C_F + upjump * TV + resolve * N stays below 3 with at most two accidents
    cfg = uniform_path_config(horizon=2.0, engine="exact", bound=50.0)
    results = simulate_ensemble(cfg, 4, seed=1)
    assert all(not isinstance(r, BoundViolation) for _, r in results)
    assert any(r.jumps for _, r in results)


def test_algorithm2_converges_as_dt_ref_shrinks(bottleneck):
    """KS to the analytic CDF decreases when the reference step shrinks."""
    ks = []
    for dt_ref in (2.0, 0.05):
        cfg = bottleneck.with_overrides(horizon=20.0, dt_ref=dt_ref).path_config()
        law = first_jump_law(cfg)
        s = first_jump_samples(cfg, 4000, seed=11)
        ks.append(ks_distance(ecdf(s.observed_times, s.n), law.cdf))
    assert ks[1] < ks[0]


def test_initial_accidents_contribute_resolution_rate():
    base = uniform_path_config(horizon=5.0)
    acc = (AccidentParams(0.0, 0.5, 0.5),)
    cfg = PathConfig(**{**base.__dict__, "accidents": acc})
    # 2 * 0.25 * (2 - 0.5 * 0.5) from the reduced capacity plus one resolution rate
    assert cfg.psi(cfg.initial_state()) == pytest.approx(0.875 + 0.5, rel=1e-14)


@pytest.mark.parametrize("kw", [dict(horizon=-1.0), dict(dt_ref=0.0), dict(acceptance=0.0),
                                dict(acceptance=1.5), dict(beta=2.0), dict(engine="magic"),
                                dict(bound=0.0)])
def test_invalid_path_config(kw):
    with pytest.raises(ValueError):
        uniform_path_config(**kw)
