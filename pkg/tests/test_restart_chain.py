import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _instances import GAMMAS, car_road, random_mdp, self_loop, two_state
from mdphit.errors import EmptySupport, NoConvergence
from mdphit.mdp_core import (
    OccupancyVector,
    from_arrays,
    induced_transition,
    initial_pair_distribution,
    occupancy_measure,
)
from mdphit.restart_chain import (
    build_restart_chain,
    stationary_distribution,
    support_set,
    verify_pagerank_identity,
)

seeds = st.integers(0, 2**32 - 1)


def _chain(mdp):
    return build_restart_chain(induced_transition(mdp), initial_pair_distribution(mdp), mdp.gamma)


def test_gamma_zero_is_pure_restart():
    rng = np.random.default_rng(1)
    mdp = random_mdp(rng, 0.0)
    chain = _chain(mdp)
    rho0 = initial_pair_distribution(mdp)
    for col in chain.matrix.T:
        np.testing.assert_array_equal(col, rho0)


def test_two_state_columns():
    np.testing.assert_allclose(_chain(two_state(0.5)).matrix, [[0.5, 0.5], [0.5, 0.5]], atol=0)


def test_self_loop_chain():
    np.testing.assert_array_equal(_chain(self_loop()).matrix, [[1.0]])


def test_construction_is_exact():
    rng = np.random.default_rng(2)
    mdp = random_mdp(rng, 0.9)
    p, rho0 = induced_transition(mdp), initial_pair_distribution(mdp)
    chain = build_restart_chain(p, rho0, 0.9)
    np.testing.assert_allclose(chain.matrix, 0.1 * rho0[:, None] + 0.9 * p, atol=1e-15, rtol=0)
    assert chain.gamma == 0.9
    np.testing.assert_array_equal(chain.restart, rho0)


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from(GAMMAS))
def test_restart_chain_is_column_stochastic(seed, gamma):
    chain = _chain(random_mdp(np.random.default_rng(seed), gamma))
    assert np.all(chain.matrix >= 0)
    np.testing.assert_allclose(chain.matrix.sum(axis=0), 1.0, atol=1e-12)


def test_stationary_examples():
    np.testing.assert_array_equal(stationary_distribution(_chain(self_loop())), [1.0])
    np.testing.assert_allclose(stationary_distribution(_chain(two_state(0.5))), [0.5, 0.5],
                               atol=1e-12)


def test_stationary_residual_and_start_independence():
    rng = np.random.default_rng(3)
    mdp = random_mdp(rng, 0.99, max_states=6, max_actions=3)
    chain = _chain(mdp)
    tol = 1e-12
    runs = [stationary_distribution(chain, tol=tol, start=rng.random(chain.n)) for _ in range(3)]
    for sigma in runs:
        assert np.all(sigma >= 0)
        assert sigma.sum() == pytest.approx(1.0, abs=1e-15)
        # the returned iterate satisfies the contracted residual one step later
        assert np.max(np.abs(chain.matrix @ sigma - sigma)) <= tol * 1.01
    for sigma in runs[1:]:
        # agreement of fixed points: residual tol times the 1/(1-gamma) contraction bound
        assert np.max(np.abs(sigma - runs[0])) <= 2 * tol / (1 - mdp.gamma)


def test_stationary_iteration_cap():
    chain = _chain(random_mdp(np.random.default_rng(4), 0.99, max_states=4))
    with pytest.raises(NoConvergence):
        stationary_distribution(chain, tol=1e-15, max_iters=3)
    with pytest.raises(ValueError):
        stationary_distribution(chain, tol=0.0)


def test_pagerank_two_state_and_self_loop():
    report = verify_pagerank_identity(two_state(0.5))
    assert report.passed and report.max_abs_gap <= 1e-8
    assert verify_pagerank_identity(self_loop()).max_abs_gap <= 1e-15


def test_pagerank_random_four_state():
    rng = np.random.default_rng(5)
    t = rng.exponential(size=(4, 2, 4))
    pi = rng.exponential(size=(4, 2))
    mdp = from_arrays(t / t.sum(-1, keepdims=True), pi / pi.sum(-1, keepdims=True),
                      [0.25] * 4, 0.9)
    assert verify_pagerank_identity(mdp, tol=1e-8).passed


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from(GAMMAS))
def test_pagerank_identity_property(seed, gamma):
    assert verify_pagerank_identity(random_mdp(np.random.default_rng(seed), gamma)).passed


def _support(mdp):
    p, rho0 = induced_transition(mdp), initial_pair_distribution(mdp)
    return support_set(occupancy_measure(p, rho0, mdp.gamma))


def test_support_examples():
    assert _support(two_state()).indices == (0, 1)
    mdp = car_road()
    labels = [mdp.index.pairs[i] for i in _support(mdp)]
    assert labels == [("r0", "straight"), ("r1", "straight"), ("r2", "straight")]


def test_full_support():
    mdp = from_arrays(np.full((3, 2, 3), 1 / 3), np.full((3, 2), 0.5), [1 / 3] * 3, 0.3)
    assert len(_support(mdp)) == 6
    assert _support(mdp).mask(6).all()


def test_support_errors():
    with pytest.raises(EmptySupport):
        support_set(OccupancyVector(np.zeros(3), 0.5))
    with pytest.raises(ValueError):
        support_set(OccupancyVector(np.ones(3), 0.5), threshold=-1.0)
