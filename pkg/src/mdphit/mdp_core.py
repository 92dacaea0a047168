"""Finite MDPs, the induced state-action chain and the occupancy measure.

All vectors and matrices over state-action pairs use the enumeration of
:class:`StateActionIndex`: pair ``(s, a)`` sits at ``s * n_actions + a``.
Transition matrices are column-stochastic, ``P[x_next, x] = Pr(x_next | x)``,
so the occupancy measure is literally ``(I - gamma P)^{-1} rho0``.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    EmptyStateOrActionSet,
    GammaOutOfRange,
    NegativeEntry,
    NonStochasticRow,
    ParseError,
    SolveFailed,
)

# Rows off by more than REJECT_TOL are rejected; rows off by more than
# EXACT_TOL (but within REJECT_TOL) are renormalized and flagged.
EXACT_TOL = 1e-12
REJECT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MdpSpec:
    """A validated finite MDP together with its initial distribution and policy.

    ``transition[s, a, s2]`` is P(s2 | s, a), ``policy[s, a]`` is pi(a | s).
    Rewards are carried for round-tripping only.
    """

    states: tuple
    actions: tuple
    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    initial: np.ndarray
    policy: np.ndarray
    name: str = ""
    warnings: tuple = field(default=())

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_actions(self):
        return len(self.actions)

    @property
    def n_pairs(self):
        return len(self.states) * len(self.actions)

    @property
    def index(self):
        return StateActionIndex.build(self.states, self.actions)


@dataclass(frozen=True)
class StateActionIndex:
    pairs: tuple
    lookup: dict

    @classmethod
    def build(cls, states, actions):
        pairs = tuple((s, a) for s in states for a in actions)
        return cls(pairs, {p: k for k, p in enumerate(pairs)})

    def __len__(self):
        return len(self.pairs)

    def labels(self):
        """Pairs rendered as ``"state,action"`` strings."""
        return [f"{s},{a}" for s, a in self.pairs]


@dataclass(frozen=True, eq=False)
class OccupancyVector:
    values: np.ndarray
    gamma: float

    @property
    def normalized(self):
        return (1.0 - self.gamma) * self.values


def _check_rows(rows, locations, what):
    """Validate a stack of probability rows; return (rows, warnings)."""
    rows = np.array(rows, dtype=float)
    warnings = []
    for k, row in enumerate(rows):
        loc = f"{what}[{locations[k]}]"
        if not np.all(np.isfinite(row)):
            raise NonStochasticRow(loc, float("nan"))
        neg = row < 0
        if neg.any():
            raise NegativeEntry(loc, float(row[neg].min()))
        deficit = 1.0 - float(row.sum())
        if abs(deficit) > REJECT_TOL:
            raise NonStochasticRow(loc, deficit)
        if abs(deficit) > EXACT_TOL:
            rows[k] = row / row.sum()
            warnings.append(f"{loc}: renormalized (deficit {deficit!r})")
    return rows, warnings


def from_arrays(transition, policy, initial, gamma, *, reward=None,
                states=None, actions=None, name=""):
    """Validate numeric arrays and wrap them in an :class:`MdpSpec`."""
    transition = np.asarray(transition, dtype=float)
    if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
        raise ParseError(f"transition must have shape (S, A, S), got {transition.shape}")
    n_s, n_a, _ = transition.shape
    if n_s == 0:
        raise EmptyStateOrActionSet("states")
    if n_a == 0:
        raise EmptyStateOrActionSet("actions")
    states = tuple(str(s) for s in (range(n_s) if states is None else states))
    actions = tuple(str(a) for a in (range(n_a) if actions is None else actions))
    if len(states) != n_s or len(actions) != n_a:
        raise ParseError("label lists do not match array shapes")
    if len(set(states)) != n_s or len(set(actions)) != n_a:
        raise ParseError("duplicate state or action label")

    policy = np.asarray(policy, dtype=float)
    initial = np.asarray(initial, dtype=float)
    if policy.shape != (n_s, n_a) or initial.shape != (n_s,):
        raise ParseError("policy/initial shapes do not match the transition table")
    reward = np.zeros((n_s, n_a)) if reward is None else np.asarray(reward, dtype=float)
    if reward.shape != (n_s, n_a):
        raise ParseError("reward shape does not match the transition table")

    try:
        gamma = float(gamma)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"gamma is not a number: {gamma!r}") from exc
    if not 0.0 <= gamma < 1.0:
        raise GammaOutOfRange(gamma)

    pair_locs = [f"{s},{a}" for s in states for a in actions]
    p_rows, w1 = _check_rows(transition.reshape(n_s * n_a, n_s), pair_locs, "transition")
    pi_rows, w2 = _check_rows(policy, list(states), "policy")
    init, w3 = _check_rows(initial[None, :], ["*"], "initial")

    for arr in (p_rows, pi_rows, init, reward):
        arr.setflags(write=False)
    return MdpSpec(
        states=states,
        actions=actions,
        transition=p_rows.reshape(n_s, n_a, n_s),
        reward=reward,
        gamma=gamma,
        initial=init[0],
        policy=pi_rows,
        name=name,
        warnings=tuple(w1 + w2 + w3),
    )


def _pair_key(key):
    if isinstance(key, str):
        parts = key.split(",")
        if len(parts) != 2:
            raise ParseError(f"pair key must be 'state,action', got {key!r}")
        return parts[0].strip(), parts[1].strip()
    try:
        s, a = key
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad pair key {key!r}") from exc
    return str(s), str(a)


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def validate(raw):
    """Turn a raw, label-keyed MDP description into a validated :class:`MdpSpec`.

    ``raw`` is a mapping with keys ``states``, ``actions``, ``gamma``,
    ``initial``, ``policy``, ``transition`` and optionally ``reward`` and
    ``name`` (the layout of the JSON MDP document). Omitted probabilities are
    zero. Structural problems raise :class:`ParseError`; model violations
    raise a :class:`ValidationError` subclass.
    """
    if not isinstance(raw, Mapping):
        raise ParseError("MDP description must be a mapping")
    for key in ("states", "actions", "gamma", "initial", "policy", "transition"):
        if key not in raw:
            raise ParseError(f"missing field {key!r}")
    states, actions = raw["states"], raw["actions"]
    if not isinstance(states, list) or not isinstance(actions, list):
        raise ParseError("states and actions must be lists")
    states = [str(s) for s in states]
    actions = [str(a) for a in actions]
    if not states:
        raise EmptyStateOrActionSet("states")
    if not actions:
        raise EmptyStateOrActionSet("actions")
    if len(set(states)) != len(states) or len(set(actions)) != len(actions):
        raise ParseError("duplicate state or action label")
    s_idx = {s: k for k, s in enumerate(states)}
    a_idx = {a: k for k, a in enumerate(actions)}

    def state(label, where):
        if str(label) not in s_idx:
            raise ParseError(f"{where}: unknown state {label!r}")
        return s_idx[str(label)]

    def action(label, where):
        if str(label) not in a_idx:
            raise ParseError(f"{where}: unknown action {label!r}")
        return a_idx[str(label)]

    def mapping(obj, where):
        if not isinstance(obj, Mapping):
            raise ParseError(f"{where} must be a mapping")
        return obj

    n_s, n_a = len(states), len(actions)
    initial = np.zeros(n_s)
    for s, p in mapping(raw["initial"], "initial").items():
        initial[state(s, "initial")] = _number(p, f"initial[{s}]")

    policy = np.zeros((n_s, n_a))
    for s, row in mapping(raw["policy"], "policy").items():
        i = state(s, "policy")
        for a, p in mapping(row, f"policy[{s}]").items():
            policy[i, action(a, f"policy[{s}]")] = _number(p, f"policy[{s}][{a}]")

    transition = np.zeros((n_s, n_a, n_s))
    for key, row in mapping(raw["transition"], "transition").items():
        s, a = _pair_key(key)
        i, j = state(s, f"transition[{key}]"), action(a, f"transition[{key}]")
        for s2, p in mapping(row, f"transition[{key}]").items():
            transition[i, j, state(s2, f"transition[{key}]")] = _number(
                p, f"transition[{key}][{s2}]")

    reward = np.zeros((n_s, n_a))
    for key, r in mapping(raw.get("reward") or {}, "reward").items():
        s, a = _pair_key(key)
        reward[state(s, "reward"), action(a, "reward")] = _number(r, f"reward[{key}]")

    gamma = raw["gamma"]
    if isinstance(gamma, bool) or not isinstance(gamma, (int, float)):
        raise ParseError(f"gamma: expected a number, got {gamma!r}")

    return from_arrays(transition, policy, initial, gamma, reward=reward,
                       states=states, actions=actions, name=str(raw.get("name", "")))


def induced_transition(mdp):
    """Column-stochastic chain on S x A: entry [(s2, a2), (s, a)] = P(s2|s,a) pi(a2|s2)."""
    n = mdp.n_pairs
    # kernel[s2, a2, s, a]
    kernel = np.einsum("sat,tb->tbsa", mdp.transition, mdp.policy)
    return kernel.reshape(n, n)


def initial_pair_distribution(mdp):
    return (mdp.initial[:, None] * mdp.policy).reshape(-1)


def occupancy_measure(p_pi, rho0, gamma):
    """Discounted occupancy of each pair, solving ``(I - gamma P) rho = rho0``.

    Parameters
    ----------
    p_pi : ndarray, shape (n, n)
        Column-stochastic transition matrix of the induced chain.
    rho0 : ndarray, shape (n,)
        Initial pair distribution.
    gamma : float
        Discount in [0, 1).

    Returns
    -------
    OccupancyVector
        Values sum to ``1 / (1 - gamma)``.
    """
    p_pi = np.asarray(p_pi, dtype=float)
    rho0 = np.asarray(rho0, dtype=float)
    system = np.eye(len(rho0)) - gamma * p_pi
    try:
        lu = scipy.linalg.lu_factor(system, check_finite=True)
        rho = scipy.linalg.lu_solve(lu, rho0)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SolveFailed(str(exc)) from exc
    residual = np.max(np.abs(system @ rho - rho0))
    if not np.isfinite(residual) or residual > 1e-10:
        raise SolveFailed(f"occupancy residual {residual!r}")
    # Exact zeros can come back as -1e-17.
    rho = np.maximum(rho, 0.0)
    rho.setflags(write=False)
    return OccupancyVector(rho, float(gamma))
