import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from binhmc import _kernels as K
from binhmc.targets import (
    IsingModel,
    TabularTarget,
    all_states,
    as_spins,
    exact_distribution,
    spins_from_index,
    spins_to_index,
)
from oracles import ising_log_f_bonds


def test_ring_all_up_log_f():
    assert IsingModel.ring(3, 0.42).log_f([1, 1, 1]) == pytest.approx(1.26, abs=1e-12)


def test_ring_delta_all_up():
    # s_1 + s_3 = 2 around the middle site
    assert IsingModel.ring(3, 0.42).delta_log_f(np.ones(3, np.int8), 1) == pytest.approx(1.68, abs=1e-12)


def test_uniform_table_is_flat():
    t = TabularTarget(np.ones(8))
    for s in all_states(3):
        assert t.log_f(s) == 0.0
        for j in range(3):
            assert t.delta_log_f(s, j) == 0.0


def test_torus_2x2_all_up_counts_eight_bonds():
    beta = 0.37
    m = IsingModel.torus(2, beta)
    s = np.ones(4, np.int8)
    assert m.log_f(s) == pytest.approx(ising_log_f_bonds(s, (2, 2), beta), abs=1e-12)
    assert m.log_f(s) == pytest.approx(8 * beta, abs=1e-12)


def test_torus_2x2_neighbors_repeat():
    m = IsingModel.torus(2, 1.0)
    # site 0 = (0,0): right and left are both site 1, down and up both site 2
    assert sorted(m.neighbors_of(0).tolist()) == [1, 1, 2, 2]


def test_opposite_neighbors_cancel():
    m = IsingModel.ring(5, 0.42)
    s = np.array([1, 1, -1, -1, 1], np.int8)
    assert m.delta_log_f(s, 1) == 0.0


@st.composite
def ising_and_state(draw):
    two_d = draw(st.booleans())
    beta = draw(st.floats(0.01, 2.0))
    if two_d:
        L = draw(st.integers(2, 5))
        m = IsingModel.torus(L, beta)
        shape = (L, L)
    else:
        d = draw(st.integers(2, 20))
        m = IsingModel.ring(d, beta)
        shape = (d,)
    bits = draw(st.lists(st.sampled_from([-1, 1]), min_size=m.d, max_size=m.d))
    return m, shape, np.array(bits, np.int8)


@given(ising_and_state())
def test_ising_matches_bond_enumeration(case):
    m, shape, s = case
    assert m.log_f(s) == pytest.approx(ising_log_f_bonds(s, shape, m.beta), abs=1e-9)


@given(ising_and_state(), st.data())
def test_delta_equals_two_calls(case, data):
    m, _, s = case
    j = data.draw(st.integers(0, m.d - 1))
    up, down = s.copy(), s.copy()
    up[j], down[j] = 1, -1
    lf = m.log_f(s)
    diff = m.log_f(up) - m.log_f(down)
    assert abs(m.delta_log_f(s, j) - diff) < 1e-12 * (1 + abs(lf))


@given(ising_and_state())
def test_global_flip_invariance(case):
    m, _, s = case
    assert m.log_f(s) == pytest.approx(m.log_f(-s), abs=1e-12)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.data())
def test_tabular_delta_equals_two_calls(d, seed, data):
    t = TabularTarget.random(d, np.random.default_rng(seed), scale=3.0)
    s = all_states(d)[data.draw(st.integers(0, 2**d - 1))]
    j = data.draw(st.integers(0, d - 1))
    up, down = s.copy(), s.copy()
    up[j], down[j] = 1, -1
    assert abs(t.delta_log_f(s, j) - (t.log_f(up) - t.log_f(down))) < 1e-12 * (1 + abs(t.log_f(s)))


@given(ising_and_state(), st.data())
def test_compiled_delta_matches(case, data):
    m, _, s = case
    j = data.draw(st.integers(0, m.d - 1))
    assert K.target_delta(s, j, m.kernel()) == pytest.approx(m.delta_log_f(s, j), abs=1e-12)


@pytest.mark.parametrize("model", [IsingModel.ring(10, 0.42), IsingModel.torus(3, 0.5)])
def test_tabular_from_ising_matches(model):
    t = TabularTarget.from_target(model)
    for s in all_states(model.d):
        assert t.log_f(s) == pytest.approx(model.log_f(s), abs=1e-12)


@given(st.integers(1, 10), st.data())
def test_index_round_trip(d, data):
    k = data.draw(st.integers(0, 2**d - 1))
    assert spins_to_index(spins_from_index(k, d)) == k


def test_exact_distribution_normalized():
    p = exact_distribution(IsingModel.ring(6, 0.3))
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p > 0)


@pytest.mark.parametrize(
    "kwargs",
    [dict(weights=np.ones(3)), dict(weights=[1.0, -1.0]), dict(log_weights=[0.0, math.inf])],
)
def test_tabular_rejects_bad_tables(kwargs):
    with pytest.raises(ValueError):
        TabularTarget(**kwargs)


def test_tabular_dimension_cap():
    with pytest.raises(ValueError):
        TabularTarget.from_target(IsingModel.ring(21, 0.1))


def test_bad_spins_rejected():
    with pytest.raises(ValueError):
        as_spins([1, 0, -1])
    with pytest.raises(ValueError):
        IsingModel.ring(3, 0.4).log_f([1, 1])


def test_bad_lattice_rejected():
    with pytest.raises(ValueError):
        IsingModel.ring(1, 0.4)
    with pytest.raises(ValueError):
        IsingModel(0.4, (2, 3))
    with pytest.raises(ValueError):
        IsingModel.ring(4, -1.0)
