"""The restart (personalized PageRank) chain on state-action pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySupport, NoConvergence
from .mdp_core import induced_transition, initial_pair_distribution, occupancy_measure

SUPPORT_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class RestartChain:
    """Chain that restarts from ``restart`` w.p. ``1 - gamma`` and otherwise follows P_pi."""

    matrix: np.ndarray
    gamma: float
    restart: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SupportSet:
    indices: tuple

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in self.indices

    def mask(self, n):
        out = np.zeros(n, dtype=bool)
        out[list(self.indices)] = True
        return out


@dataclass(frozen=True)
class PageRankReport:
    max_abs_gap: float
    passed: bool


def build_restart_chain(p_pi, rho0, gamma):
    p_pi = np.asarray(p_pi, dtype=float)
    rho0 = np.asarray(rho0, dtype=float)
    matrix = (1.0 - gamma) * rho0[:, None] + gamma * p_pi
    matrix.setflags(write=False)
    return RestartChain(matrix, float(gamma), rho0)


def stationary_distribution(chain, tol=1e-12, max_iters=10**6, start=None):
    """Power iteration for the fixed point of the restart chain.

    Starts from the uniform distribution unless ``start`` is given and stops
    once ``max |P sigma - sigma| <= tol``. The restart term contracts the
    error by ``gamma`` per step, so the iteration count is about
    ``log(tol) / log(gamma)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = chain.matrix
    n = p.shape[0]
    sigma = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=float)
    sigma = sigma / sigma.sum()
    for _ in range(max_iters):
        nxt = p @ sigma
        if np.max(np.abs(nxt - sigma)) <= tol:
            return sigma
        sigma = nxt / nxt.sum()
    raise NoConvergence(f"power iteration did not reach tol={tol} in {max_iters} iterations")


def verify_pagerank_identity(mdp, tol=1e-8, power_tol=1e-12):
    """Compare the normalized occupancy (linear solve) with the PageRank vector (power iteration)."""
    p_pi = induced_transition(mdp)
    rho0 = initial_pair_distribution(mdp)
    occ = occupancy_measure(p_pi, rho0, mdp.gamma)
    sigma = stationary_distribution(build_restart_chain(p_pi, rho0, mdp.gamma), tol=power_tol)
    gap = float(np.max(np.abs(occ.normalized - sigma)))
    return PageRankReport(gap, gap <= tol)


def support_set(occupancy, threshold=SUPPORT_THRESHOLD):
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    idx = np.flatnonzero(occupancy.normalized > threshold)
    if idx.size == 0:
        raise EmptySupport("occupancy measure has empty support")
    return SupportSet(tuple(int(i) for i in idx))
