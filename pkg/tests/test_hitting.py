import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _instances import GAMMAS, random_mdp, self_loop, two_state
from mdphit.errors import DenominatorNotPositive
from mdphit.hitting import (
    HittingMatrix,
    hitting_discounted,
    hitting_plain,
    hitting_restart,
    quasi_metric_check,
    recursion_residual,
    restart_from_discounted,
    restart_residual,
)
from mdphit.mc_oracle import SimConfig, estimate_hitting
from mdphit.mdp_core import induced_transition, initial_pair_distribution, occupancy_measure
from mdphit.restart_chain import SupportSet, build_restart_chain, support_set

seeds = st.integers(0, 2**32 - 1)


def _parts(mdp):
    p, rho0 = induced_transition(mdp), initial_pair_distribution(mdp)
    return p, rho0, support_set(occupancy_measure(p, rho0, mdp.gamma))


# -- plain ---------------------------------------------------------------------

def test_plain_two_state():
    t = hitting_plain(induced_transition(two_state())).entries
    assert t[0, 1] == np.inf
    assert t[1, 0] == 1.0
    assert t[0, 0] == t[1, 1] == 0.0


def test_plain_symmetric_swap():
    p = np.full((2, 2), 0.5)
    np.testing.assert_allclose(hitting_plain(p).entries, [[0, 2], [2, 0]], atol=1e-14)
    for i, j in [(0, 1), (1, 0)]:
        est = estimate_hitting(p, i, j, SimConfig(seed=3, episodes=100_000))
        assert abs(est.mean - 2.0) <= 3 * est.std_error


def test_plain_partial_hit_probability_is_infinite():
    # from 0: go to 1 (which hits 2) or to 3 (absorbing), so 2 is missed with prob 1/2
    p = np.zeros((4, 4))
    p[1, 0] = p[3, 0] = 0.5
    p[2, 1] = 1.0
    p[2, 2] = 1.0
    p[3, 3] = 1.0
    t = hitting_plain(p).entries
    assert t[2, 1] == 1.0
    assert t[2, 0] == np.inf
    assert t[2, 3] == np.inf
    assert t[1, 0] == np.inf


def test_plain_targets_leave_other_rows_unsolved():
    t = hitting_plain(np.full((3, 3), 1 / 3), targets=[1]).entries
    assert np.isnan(t[0, 1]) and np.isnan(t[2, 0])
    np.testing.assert_allclose(t[1, [0, 2]], 3.0, atol=1e-14)
    assert np.all(np.diag(t) == 0)


def test_plain_matches_monte_carlo_on_certain_hits():
    rng = np.random.default_rng(12)
    mdp = random_mdp(rng, 0.9, max_states=4, max_actions=2)
    p = induced_transition(mdp)
    t = hitting_plain(p).entries
    checked = 0
    for i, j in itertools.permutations(range(p.shape[0]), 2):
        if np.isfinite(t[i, j]) and t[i, j] < 50:
            est = estimate_hitting(p, i, j, SimConfig(seed=i * 31 + j, episodes=20_000))
            assert est.censored == 0
            assert abs(est.mean - t[i, j]) <= 4 * est.std_error + 1e-12
            checked += 1
    assert checked > 0


# -- restart -------------------------------------------------------------------

def test_restart_two_state():
    p, rho0, support = _parts(two_state(0.5))
    np.testing.assert_allclose(hitting_restart(p, rho0, 0.5, support).entries,
                               [[0, 2], [2, 0]], atol=1e-14)
    chain = build_restart_chain(p, rho0, 0.5)
    est = estimate_hitting(chain, 0, 1, SimConfig(seed=7, episodes=100_000))
    assert abs(est.mean - 2.0) <= 3 * est.std_error


def test_restart_self_loop():
    p, rho0, support = _parts(self_loop())
    np.testing.assert_array_equal(hitting_restart(p, rho0, 0.5, support).entries, [[0.0]])


def test_restart_rows_off_support_are_infinite():
    mdp = random_mdp(np.random.default_rng(0), 0.9)
    p, rho0, _ = _parts(mdp)
    partial = SupportSet((0,))
    t = hitting_restart(p, rho0, 0.9, partial).entries
    if t.shape[0] > 1:
        assert np.all(np.isinf(t[1:, :][~np.eye(t.shape[0], dtype=bool)[1:, :]]))
        assert np.all(np.isfinite(t[0]))


@settings(max_examples=50, deadline=None)
@given(seeds, st.sampled_from(GAMMAS))
def test_restart_solver_properties(seed, gamma):
    mdp = random_mdp(np.random.default_rng(seed), gamma)
    p, rho0, support = _parts(mdp)
    t = hitting_restart(p, rho0, gamma, support)
    idx = list(support)
    chain = build_restart_chain(p, rho0, gamma)
    assert recursion_residual(t, chain.matrix) <= 1e-9
    assert restart_residual(t, p, rho0, gamma, support) <= 1e-9
    plain = hitting_plain(chain.matrix)
    np.testing.assert_allclose(t.entries[idx], plain.entries[idx], atol=1e-9, rtol=0)
    rows = t.entries[idx]
    assert np.all(np.isfinite(rows))
    off = ~np.eye(t.n, dtype=bool)[idx]
    assert np.all(rows[off] >= 1.0)


# -- discounted and ratio ------------------------------------------------------

def test_discounted_two_state():
    l = hitting_discounted(induced_transition(two_state()), 0.5).entries
    assert l[0, 1] == pytest.approx(2.0, abs=1e-14)
    assert l[1, 0] == pytest.approx(1.0, abs=1e-14)


def test_discounted_gamma_zero():
    mdp = random_mdp(np.random.default_rng(9), 0.0)
    l = hitting_discounted(induced_transition(mdp), 0.0).entries
    off = ~np.eye(l.shape[0], dtype=bool)
    np.testing.assert_array_equal(l[off], 1.0)
    np.testing.assert_array_equal(np.diag(l), 0.0)


@settings(max_examples=50, deadline=None)
@given(seeds, st.sampled_from(GAMMAS))
def test_discounted_recursion(seed, gamma):
    p = induced_transition(random_mdp(np.random.default_rng(seed), gamma))
    l = hitting_discounted(p, gamma)
    assert np.all(np.isfinite(l.entries))
    assert recursion_residual(l, p, discount=gamma) <= 1e-9
    assert np.all(l.entries <= 1.0 / (1.0 - gamma) + 1e-9)


def test_ratio_two_state_rows():
    p, rho0, _ = _parts(two_state(0.5))
    l = hitting_discounted(p, 0.5)
    t = restart_from_discounted(l, rho0, 0.5).entries
    assert t[0, 1] == pytest.approx(2.0, abs=1e-14)  # denominator 1
    assert t[1, 0] == pytest.approx(2.0, abs=1e-14)  # denominator 0.5


@settings(max_examples=50, deadline=None)
@given(seeds, st.sampled_from(GAMMAS))
def test_ratio_identity_property(seed, gamma):
    mdp = random_mdp(np.random.default_rng(seed), gamma)
    p, rho0, support = _parts(mdp)
    idx = list(support)
    via_l = restart_from_discounted(hitting_discounted(p, gamma), rho0, gamma, rows=idx)
    direct = hitting_restart(p, rho0, gamma, support)
    # For rarely visited targets T is ~1e4 and the ratio's denominator
    # 1 - (1 - gamma) L rho0 cancels down to ~1e-4, so double precision alone
    # limits agreement to ~1e-12 relative; hence the small relative term.
    np.testing.assert_allclose(via_l.entries[idx], direct.entries[idx], atol=1e-8, rtol=1e-10)


def test_ratio_denominator_off_support():
    # pair 1 is never visited from rho0 = delta_0 when 0 is absorbing
    p = np.array([[1.0, 1.0], [0.0, 0.0]])
    rho0 = np.array([1.0, 0.0])
    l = hitting_discounted(p, 0.5)
    with pytest.raises(DenominatorNotPositive) as info:
        restart_from_discounted(l, rho0, 0.5)
    assert info.value.row == 1
    t = restart_from_discounted(l, rho0, 0.5, rows=[0]).entries
    assert t[1, 0] == np.inf and t[0, 1] == 1.0


def test_ratio_requires_discounted_kind():
    with pytest.raises(ValueError):
        restart_from_discounted(HittingMatrix(np.zeros((1, 1)), "plain"), [1.0], 0.5)


# -- quasi-metric --------------------------------------------------------------

def test_quasi_metric_two_state():
    p, rho0, support = _parts(two_state(0.5))
    report = quasi_metric_check(hitting_restart(p, rho0, 0.5, support), support)
    assert report.ok and report.max_asymmetry == 0.0


def test_quasi_metric_single_point():
    report = quasi_metric_check(HittingMatrix(np.zeros((1, 1)), "restart"), SupportSet((0,)))
    assert report.ok and report.triangle_violations == []


def test_quasi_metric_reports_violation():
    t = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    report = quasi_metric_check(HittingMatrix(t, "plain"), SupportSet((0, 1, 2)))
    assert not report.ok
    # T[0, 2] = 5 > T[0, 1] + T[1, 2] = 2
    assert (0, 1, 2, 3.0) in report.triangle_violations
    assert report.max_asymmetry == 4.0


@settings(max_examples=50, deadline=None)
@given(seeds, st.sampled_from(GAMMAS))
def test_quasi_metric_property(seed, gamma):
    mdp = random_mdp(np.random.default_rng(seed), gamma)
    p, rho0, support = _parts(mdp)
    assert quasi_metric_check(hitting_restart(p, rho0, gamma, support), support).ok
