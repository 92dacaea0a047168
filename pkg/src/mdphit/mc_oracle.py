"""Simulation and series oracles, independent of the linear solvers they check.

Random numbers come from a counter-based construction: the uniform used by
episode ``e`` at step ``t`` is a fixed hash of ``(seed, e, t)``. Episodes can
therefore be simulated in any order (or all at once, as done here) with
bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AllCensored
from .mdp_core import induced_transition, initial_pair_distribution
from .restart_chain import RestartChain

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STEP_KEY = np.uint64(0xD1B54A32D192ED03)


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    episodes: int = 100_000
    max_steps: int | None = None
    horizon: int = 1000

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    samples: int
    censored: int


def _splitmix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(seed, episodes, step):
    """Uniform [0, 1) draws for each episode in ``episodes`` at ``step``."""
    ep = np.asarray(episodes, dtype=np.uint64)
    with np.errstate(over="ignore"):
        key = _splitmix(np.full(ep.shape, seed, dtype=np.uint64) ^ _GOLDEN)
        key = _splitmix(key + ep * _GOLDEN)
        z = _splitmix(key ^ (np.uint64(step) * _STEP_KEY + _GOLDEN))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 2**53)


def _column_cdf(p):
    """Per-column CDFs, flattened to 1 past the last positive entry of each column."""
    p = np.asarray(p, dtype=float)
    cdf = np.cumsum(p, axis=0)
    cdf /= cdf[-1]
    n = p.shape[0]
    last = n - 1 - np.argmax((p > 0)[::-1], axis=0)
    cdf[np.arange(n)[:, None] >= last[None, :]] = 1.0
    return cdf.T.copy()  # row x is the CDF of the next pair given x


def _step(cdf_rows, pos, u):
    return np.minimum((u[:, None] >= cdf_rows[pos]).sum(axis=1), cdf_rows.shape[1] - 1)


def _default_max_steps(gamma):
    if gamma is None:
        return 10**6
    return int(min(10**7, math.ceil(10**6 / (1.0 - gamma))))


def occupancy_truncated(mdp, horizon):
    """Partial sum of the discounted visitation series up to ``horizon``.

    Returns the vector and the entrywise bound ``gamma^(H+1) / (1 - gamma)``
    on the neglected tail.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    p_pi = induced_transition(mdp)
    term = initial_pair_distribution(mdp)
    total = term.copy()
    for _ in range(horizon):
        term = mdp.gamma * (p_pi @ term)
        total += term
    return total, mdp.gamma ** (horizon + 1) / (1.0 - mdp.gamma)


def simulate_restart(chain, start, config, episode=0):
    """One trajectory of ``config.max_steps`` steps (plus the start) of the restart chain."""
    steps = config.max_steps if config.max_steps is not None else 1000
    if not 0 <= start < chain.n:
        raise IndexError(f"start {start} out of range")
    cdf = _column_cdf(chain.matrix)
    traj = np.empty(steps + 1, dtype=np.int64)
    traj[0] = start
    ep = np.array([episode])
    pos = np.array([start])
    for t in range(steps):
        pos = _step(cdf, pos, uniforms(config.seed, ep, t))
        traj[t + 1] = pos[0]
    return traj


def _can_reach(p, target):
    edges = np.asarray(p) > 0
    reach = np.zeros(edges.shape[0], dtype=bool)
    reach[target] = True
    frontier = reach.copy()
    while frontier.any():
        new = edges[frontier].any(axis=0) & ~reach
        reach |= new
        frontier = new
    return reach


def estimate_hitting(chain, target, start, config):
    """Monte Carlo estimate of the expected first-passage time from ``start`` to ``target``.

    ``chain`` is a :class:`RestartChain` or a bare column-stochastic matrix.
    Episodes still running after ``max_steps`` steps are censored and left
    out of the mean. Walkers stuck where the target is unreachable are
    censored immediately, which is the outcome they would reach anyway.
    """
    if target == start:
        raise ValueError("target and start must differ (the diagonal is 0 by definition)")
    if isinstance(chain, RestartChain):
        p, gamma = chain.matrix, chain.gamma
    else:
        p, gamma = np.asarray(chain, dtype=float), None
    max_steps = config.max_steps or _default_max_steps(gamma)
    cdf = _column_cdf(p)
    alive_ok = _can_reach(p, target)

    episodes = np.arange(config.episodes, dtype=np.int64)
    pos = np.full(config.episodes, start, dtype=np.int64)
    times = []
    censored = 0
    for t in range(max_steps):
        keep = alive_ok[pos]
        censored += int((~keep).sum())
        episodes, pos = episodes[keep], pos[keep]
        if episodes.size == 0:
            break
        pos = _step(cdf, pos, uniforms(config.seed, episodes, t))
        hit = pos == target
        if hit.any():
            times.append((episodes[hit], np.full(int(hit.sum()), t + 1)))
            episodes, pos = episodes[~hit], pos[~hit]
    censored += int(episodes.size)

    if not times:
        raise AllCensored(f"all {config.episodes} episodes censored; target {target} "
                          f"looks unreachable from {start}")
    ep = np.concatenate([e for e, _ in times])
    tt = np.concatenate([v for _, v in times])[np.argsort(ep, kind="stable")].astype(float)
    k = tt.size
    mean = float(np.mean(tt))
    se = float(np.std(tt, ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    return Estimate(mean, se, config.episodes, censored)


def estimate_stationary(chain, config):
    """Empirical visit frequencies of the restart chain.

    Each episode starts at a uniformly drawn pair, discards a burn-in of
    ``max(100, 10 / (1 - gamma))`` steps and then counts ``max_steps`` visits.
    """
    n = chain.n
    steps = config.max_steps if config.max_steps is not None else 1000
    burn = max(100, math.ceil(10.0 / (1.0 - chain.gamma)))
    cdf = _column_cdf(chain.matrix)
    episodes = np.arange(config.episodes, dtype=np.int64)
    # Step index 0 picks the start; transitions use steps 1, 2, ...
    pos = np.minimum((uniforms(config.seed, episodes, 0) * n).astype(np.int64), n - 1)
    counts = np.zeros(n, dtype=np.int64)
    for t in range(1, burn + steps + 1):
        pos = _step(cdf, pos, uniforms(config.seed, episodes, t))
        if t > burn:
            counts += np.bincount(pos, minlength=n)
    return counts / counts.sum()
