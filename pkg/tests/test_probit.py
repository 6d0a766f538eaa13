import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import log_ndtr

from binhmc.gated import positivity
from binhmc.harness.data import probit_data
from binhmc.probit import ProbitModel, ProbitState, initial_state, probit_log_posterior, probit_step, sample_chain
from oracles import probit_inclusion_quadrature


def synthetic(seed, N=30, d=3, nonzero=2, **kw):
    X, b, _ = probit_data(N, d, nonzero, np.random.default_rng(seed))
    return ProbitModel(X, b, kw.pop("a", 0.3), kw.pop("tau2", 4.0), **kw)


def test_model_validation():
    X = np.ones((3, 2))
    with pytest.raises(ValueError):
        ProbitModel(X, [1, -1], 0.5, 1.0)
    with pytest.raises(ValueError):
        ProbitModel(X, [1, 0, -1], 0.5, 1.0)
    with pytest.raises(ValueError):
        ProbitModel(X, [1, 1, -1], 1.5, 1.0)
    with pytest.raises(ValueError):
        ProbitModel(X, [1, 1, -1], 0.5, 1.0, positivity(3))


def test_spike_orthant_decouples_utilities():
    m = synthetic(0, N=6, d=2)
    o = m.engine.orthant(np.array([-1, -1], np.int8))
    np.testing.assert_array_equal(o.active, np.arange(6))
    np.testing.assert_allclose(o.precision, np.eye(6))
    assert np.all(o.mu == 0)


@given(st.integers(0, 10_000), st.lists(st.sampled_from([-1, 1]), min_size=3, max_size=3))
def test_log_posterior_direct(seed, s):
    m = synthetic(seed)
    w = np.random.default_rng(seed).standard_normal(3)
    s = np.array(s)
    wp = np.where(s > 0, w, 0.0)
    k = int((s > 0).sum())
    ref = sum(log_ndtr(-bi * xi @ wp) for xi, bi in zip(m.X, m.b))
    ref += sum(-0.5 * v * v / m.tau2 - 0.5 * math.log(2 * math.pi * m.tau2) for v in wp[s > 0])
    ref += k * math.log(m.a) + (3 - k) * math.log(1 - m.a)
    assert probit_log_posterior(m, w, s) == pytest.approx(ref, rel=1e-12, abs=1e-10)


def test_samples_respect_label_sides():
    m = synthetic(1, N=100, d=5)
    rng = np.random.default_rng(0)
    ch = sample_chain(m, initial_state(m, rng), math.pi / 2, 300, rng=rng)
    assert np.min(ch.latent * m.b) >= 0.0
    assert ch.latent.shape == (300, 100)


@settings(max_examples=15)
@given(st.integers(0, 1000), st.floats(0.3, 4.0), st.booleans())
def test_energy_conserved(seed, T, constrained):
    m = synthetic(seed, N=12, d=3, constraints=positivity(3) if constrained else ())
    rng = np.random.default_rng(seed)
    state = initial_state(m, rng, spins=np.where(rng.random(3) < 0.5, 1, -1))
    for _ in range(3):
        state, stats = probit_step(m, state, T, rng, check_energy=True)
        assert abs(stats.energy_end - stats.energy_start) < 1e-6 * (1 + abs(stats.energy_start))
        assert np.all(state.z * m.b >= 0)


def test_wrong_side_start_rejected():
    m = synthetic(2, N=5, d=1, nonzero=1)
    bad = ProbitState(-m.b * 1.0, np.zeros(1), np.ones(1))
    with pytest.raises(ValueError):
        probit_step(m, bad, 1.0, np.random.default_rng(0))


def test_single_coefficient_inclusion_matches_quadrature():
    rng = np.random.default_rng(0)
    X, b, _ = probit_data(5, 1, 1, rng)
    m = ProbitModel(X, b, 0.5, 4.0)
    p = probit_inclusion_quadrature(X, b, 0.5, 4.0)
    ch = sample_chain(m, initial_state(m, rng), math.pi / 2, 20000, burn_in=200, rng=rng)
    assert abs(np.mean(ch.spins > 0) - p) < 0.05


def test_chain_reproducible():
    m = synthetic(3, N=20, d=3)
    a = sample_chain(m, initial_state(m, np.random.default_rng(1)), 1.0, 40, seed=3)
    b = sample_chain(m, initial_state(m, np.random.default_rng(1)), 1.0, 40, seed=3)
    assert np.array_equal(a.latent, b.latent)
    assert np.array_equal(a.coefficients, b.coefficients)
