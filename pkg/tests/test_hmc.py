import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from binhmc.diagnostics import ess
from binhmc.hmc import (
    HmcConfig,
    exp_first_hit,
    exp_hmc_step,
    gauss_hit_phase,
    gauss_hmc_step,
    initial_y,
    matched_exponential_time,
    sample_chain,
    spins_of,
    wall_event,
)
from binhmc.targets import IsingModel, TabularTarget
from oracles import first_root

nonzero = st.floats(0.01, 5.0).flatmap(lambda v: st.sampled_from([v, -v]))
moment = st.floats(-5.0, 5.0)


def uniform(d):
    return TabularTarget(np.ones(2**d))


# ---------------------------------------------------------------- hit times


@pytest.mark.parametrize(
    "y0,q0,u,t",
    [(1.0, 0.0, 1.0, math.pi / 2), (-1.0, 0.0, 1.0, math.pi / 2), (1.0, 1.0, math.sqrt(2), 0.75 * math.pi)],
)
def test_gauss_hit_phase_examples(y0, q0, u, t):
    uu, tt = gauss_hit_phase(y0, q0)
    assert uu == pytest.approx(u, abs=1e-12)
    assert tt == pytest.approx(t, abs=1e-12)


def test_gauss_hit_phase_root_finder():
    t = first_root(lambda t: math.cos(t) + math.sin(t), math.pi)
    assert gauss_hit_phase(1.0, 1.0)[1] == pytest.approx(t, abs=1e-10)


@given(nonzero, moment)
def test_gauss_first_hit_is_first_zero(y0, q0):
    u, t = gauss_hit_phase(y0, q0)
    assert 0 < t <= math.pi
    assert u == pytest.approx(math.hypot(y0, q0))
    assert abs(y0 * math.cos(t) + q0 * math.sin(t)) < 1e-9 * (1 + u)
    mid = np.linspace(0, t, 50)[1:-1]
    assert np.all(np.sign(y0 * np.cos(mid) + q0 * np.sin(mid)) == np.sign(y0))


def test_gauss_hit_phase_rejects_rest():
    with pytest.raises(ValueError):
        gauss_hit_phase(0.0, 0.0)


@pytest.mark.parametrize(
    "y0,q0,s,t", [(2.0, 0.0, 1, 2.0), (-2.0, 0.0, -1, 2.0), (1.0, -3.0, 1, 0.31662479035539985)]
)
def test_exp_first_hit_examples(y0, q0, s, t):
    assert exp_first_hit(y0, q0, s) == pytest.approx(t, abs=1e-12)


def test_exp_first_hit_root_finder():
    t = first_root(lambda t: 1.0 - 3.0 * t - 0.5 * t * t, 2.0)
    assert exp_first_hit(1.0, -3.0, 1) == pytest.approx(t, abs=1e-10)


@given(nonzero, moment)
def test_exp_first_hit_is_root(y0, q0):
    s = 1 if y0 > 0 else -1
    t = exp_first_hit(y0, q0, s)
    assert t > 0
    assert abs(y0 + q0 * t - s * t * t / 2) < 1e-9 * (1 + abs(y0) + q0 * q0)


def test_exp_first_hit_rejects_wrong_side():
    with pytest.raises(ValueError):
        exp_first_hit(1.0, 0.0, -1)


# ---------------------------------------------------------------- wall rule


@pytest.mark.parametrize(
    "delta,qb,crossed,qa_abs", [(0.0, 1.0, True, 1.0), (-1.0, 1.0, False, 1.0), (1.5, 1.0, True, 2.0)]
)
def test_wall_event_examples(delta, qb, crossed, qa_abs):
    qa, c = wall_event(delta, qb)
    assert c is crossed or c == crossed
    assert abs(qa) == pytest.approx(qa_abs, abs=1e-12)
    if not crossed:
        assert qa == -qb


@given(st.floats(-20, 20), moment.filter(lambda q: q != 0))
def test_wall_event_rule(delta, qb):
    qa, crossed = wall_event(delta, qb)
    assert crossed == (qb * qb + 2 * delta > 0)
    if crossed:
        assert qa * qa == pytest.approx(qb * qb + 2 * delta, rel=1e-12, abs=1e-12)
        assert np.sign(qa) == np.sign(qb)
    else:
        assert qa == -qb


def test_wall_event_infinite_delta():
    qa, crossed = wall_event(math.inf, 0.5)
    assert crossed and math.isfinite(qa) and qa > 0
    qa, crossed = wall_event(-math.inf, 0.5)
    assert not crossed and qa == -0.5


# ---------------------------------------------------------------- single steps


def test_gauss_step_uniform_example():
    cfg = HmcConfig("gaussian", travel_time=1.25 * math.pi)
    tr = gauss_hmc_step(uniform(1), np.array([1.0]), cfg, None, q0=np.array([0.0]))
    assert len(tr.events) == 1
    ev = tr.events[0]
    assert ev.t_hit == pytest.approx(math.pi / 2, abs=1e-12)
    assert ev.crossed and ev.delta == 0.0
    assert tr.y[0] == pytest.approx(-0.7071067811865476, abs=1e-12)
    assert tr.spins[0] == -1


def test_exp_step_uniform_example():
    cfg = HmcConfig("exponential", travel_time=1.0)
    tr = exp_hmc_step(uniform(1), np.array([2.0]), cfg, None, q0=np.array([0.0]))
    assert tr.events == []
    assert tr.y[0] == pytest.approx(1.5, abs=1e-12)


@st.composite
def tabular_case(draw):
    d = draw(st.integers(1, 5))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    target = TabularTarget.random(d, rng, scale=draw(st.floats(0.0, 4.0)))
    y = rng.standard_normal(d)
    q = rng.standard_normal(d)
    T = draw(st.floats(0.1, 12.0))
    return target, y, q, T


@given(tabular_case(), st.sampled_from(["gaussian", "exponential"]), st.booleans())
def test_energy_conserved_with_jumps(case, aug, compiled):
    target, y, q, T = case
    if aug == "gaussian" and abs(T / math.pi - round(T / math.pi)) < 1e-5:
        T += 0.01
    cfg = HmcConfig(aug, travel_time=T)
    step = gauss_hmc_step if aug == "gaussian" else exp_hmc_step
    tr = step(target, y, cfg, None, q0=q, compiled=compiled)
    assert abs(tr.energy_end - tr.energy_start) < 1e-8 * (1 + abs(tr.energy_start))
    for ev in tr.events:
        assert ev.crossed == (ev.q_before**2 + 2 * ev.delta > 0)
        if ev.crossed:
            assert ev.q_after**2 == pytest.approx(ev.q_before**2 + 2 * ev.delta, rel=1e-9, abs=1e-12)
        else:
            assert ev.q_after == -ev.q_before
    assert tr.n_hits == len(tr.events)
    assert tr.n_crossings == sum(ev.crossed for ev in tr.events)
    assert np.array_equal(tr.spins, spins_of(tr.y))


@given(tabular_case())
def test_gauss_hit_schedule(case):
    target, y, q, T = case
    tr = gauss_hmc_step(target, y, HmcConfig("gaussian", travel_time=T + 0.01), None, q0=q)
    times = [ev.t_hit for ev in tr.events]
    assert times == sorted(times)
    first = {}
    for ev in tr.events:
        if ev.coord in first:
            # every later hit of a coordinate is one half period after its previous one
            assert ev.t_hit - first[ev.coord] == pytest.approx(math.pi, abs=1e-9)
        first[ev.coord] = ev.t_hit
    starts = sorted(ev.t_hit for ev in tr.events if ev.t_hit < math.pi)
    assert all(0 < t < math.pi for t in starts)
    assert len(starts) == min(target.d, len(starts))


@given(tabular_case())
def test_exp_rehit_after_twice_momentum(case):
    target, y, q, T = case
    tr = exp_hmc_step(target, y, HmcConfig("exponential", travel_time=T), None, q0=q)
    last = {}
    for ev in tr.events:
        if ev.coord in last:
            prev = last[ev.coord]
            assert ev.t_hit - prev.t_hit == pytest.approx(2 * abs(prev.q_after), abs=1e-9)
        last[ev.coord] = ev


@pytest.mark.filterwarnings("ignore:travel time is a multiple")
@given(nonzero, moment)
def test_reflection_returns_after_pi(y0, q0):
    # log f(-) is so low relative to log f(+) that every hit reflects
    s0 = 1 if y0 > 0 else -1
    logw = np.array([0.0, 0.0])
    logw[0 if s0 > 0 else 1] = -200.0
    target = TabularTarget(log_weights=logw)
    tr = gauss_hmc_step(target, np.array([y0]), HmcConfig("gaussian", travel_time=math.pi + 1e-9), None, q0=np.array([q0]))
    assert len(tr.events) == 1 and not tr.events[0].crossed
    # undo the extra 1e-9 of travel
    yp = tr.y[0] * math.cos(1e-9) - tr.q[0] * math.sin(1e-9)
    assert abs(yp - y0) < 1e-10


def test_simultaneous_hits_in_index_order():
    tr = gauss_hmc_step(uniform(3), np.array([1.0, 1.0, 1.0]), HmcConfig(travel_time=1.5 * math.pi), None, q0=np.zeros(3))
    assert [ev.coord for ev in tr.events] == [0, 1, 2]
    assert len({ev.t_hit for ev in tr.events}) == 1


def test_zero_position_read_as_plus():
    assert spins_of(np.array([0.0, -0.0, -1e-300])).tolist() == [1, 1, -1]


@given(st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=30), st.sampled_from(["gaussian", "exponential"]))
def test_initial_y_respects_orthant(bits, aug):
    y = initial_y(np.array(bits), aug, np.random.default_rng(0))
    assert np.array_equal(spins_of(y), bits)
    assert np.all(y != 0)


# ---------------------------------------------------------------- config


def test_config_defaults_and_validation():
    assert HmcConfig().T == pytest.approx(1.5 * math.pi)
    assert HmcConfig(half_periods=12).T == pytest.approx(12.5 * math.pi)
    with pytest.raises(ValueError):
        HmcConfig(travel_time=0.0)
    with pytest.raises(ValueError):
        HmcConfig("other")
    with pytest.warns(UserWarning):
        HmcConfig(travel_time=2 * math.pi)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        HmcConfig("exponential", travel_time=2 * math.pi)


def test_matched_exponential_time_hits():
    """Both augmentations average T / pi hits per coordinate per iteration."""
    T = 1.5 * math.pi
    rng = np.random.default_rng(3)
    big = uniform(10)
    g = sample_chain(big, initial_y(np.ones(10), "gaussian", rng), HmcConfig(travel_time=T), 2000, rng=rng)
    e_cfg = HmcConfig("exponential", travel_time=matched_exponential_time(T))
    e = sample_chain(big, initial_y(np.ones(10), "exponential", rng), e_cfg, 2000, rng=rng)
    assert g.wall_hits.mean() / 10 == pytest.approx(1.5, rel=0.03)
    assert e.wall_hits.mean() / 10 == pytest.approx(1.5, rel=0.03)


# ---------------------------------------------------------------- chains


def test_chain_shapes_and_determinism():
    m = IsingModel.ring(20, 0.42)
    y0 = initial_y(np.ones(20), "gaussian", np.random.default_rng(1))
    a = sample_chain(m, y0, HmcConfig(seed=5), 10)
    b = sample_chain(m, y0, HmcConfig(seed=5), 10)
    assert a.spins.shape == (10, 20)
    for name in ("spins", "log_target", "wall_hits", "crossings"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


@pytest.mark.parametrize("aug", ["gaussian", "exponential"])
def test_compiled_and_python_chains_agree(aug):
    m = IsingModel.torus(3, 0.5)
    y0 = initial_y(np.ones(9), aug, np.random.default_rng(2))
    cfg = HmcConfig(aug, travel_time=2.5 * math.pi, seed=9)
    a = sample_chain(m, y0, cfg, 40, burn_in=3, thin=2, compiled=True)
    b = sample_chain(m, y0, cfg, 40, burn_in=3, thin=2, compiled=False)
    assert np.array_equal(a.spins, b.spins)
    assert np.array_equal(a.wall_hits, b.wall_hits)
    np.testing.assert_allclose(a.log_target, b.log_target, atol=1e-9)


def test_chain_log_target_tracks_state():
    m = IsingModel.ring(30, 0.42)
    ch = sample_chain(m, initial_y(np.ones(30), "gaussian", np.random.default_rng(0)), HmcConfig(seed=1), 50)
    for s, lf in zip(ch.spins, ch.log_target):
        assert lf == pytest.approx(m.log_f(s), abs=1e-9)


def test_timing_does_not_change_samples():
    m = IsingModel.ring(30, 0.42)
    y0 = initial_y(np.ones(30), "gaussian", np.random.default_rng(0))
    a = sample_chain(m, y0, HmcConfig(seed=4), 30)
    b = sample_chain(m, y0, HmcConfig(seed=4), 30, record_timing=True)
    assert np.array_equal(a.spins, b.spins)
    assert np.all(a.elapsed_ns == 0) and b.elapsed_ns.sum() > 0


@pytest.mark.parametrize("aug", ["gaussian", "exponential"])
def test_uniform_chain_marginals(aug):
    d = 8
    ch = sample_chain(uniform(d), initial_y(np.ones(d), aug, np.random.default_rng(0)), HmcConfig(aug, seed=11), 20000)
    # 3.5 sigma per coordinate keeps the family-wise false alarm rate below 1%
    for i in range(d):
        x = ch.spins[:, i]
        p = np.mean(x > 0)
        n_eff = max(ess(x), 10.0)
        assert abs(p - 0.5) < 3.5 * math.sqrt(0.25 / n_eff)


def test_chain_argument_checks():
    m = IsingModel.ring(4, 0.4)
    with pytest.raises(ValueError):
        sample_chain(m, np.ones(4), HmcConfig(), 0)
    with pytest.raises(ValueError):
        sample_chain(m, np.ones(3), HmcConfig(), 5)
    with pytest.raises(ValueError):
        sample_chain(m, np.ones(4), HmcConfig(), 5, thin=0)
