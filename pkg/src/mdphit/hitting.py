"""Expected first-hitting times on state-action chains.

Index order follows the usual ``T[i, j]``: expected number of steps to first
reach pair ``i`` when starting from pair ``j``. The diagonal is 0 and
unreachable targets are ``+inf``. Every solver works one target row at a
time, each an independent linear system over the non-target pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DenominatorNotPositive, SolveFailed
from .restart_chain import build_restart_chain

KINDS = ("plain", "restart", "discounted")
# A solver result whose recursion residual exceeds this (relative to the
# largest entry) is treated as a failed factorization.
_SANITY_RTOL = 1e-6
_DENOM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class HittingMatrix:
    entries: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def n(self):
        return self.entries.shape[0]

    def restrict(self, indices):
        idx = list(indices)
        return self.entries[np.ix_(idx, idx)]


@dataclass(frozen=True)
class QuasiMetricReport:
    diagonal_zero: bool
    nonneg: bool
    triangle_violations: list = field(default_factory=list)
    max_asymmetry: float = 0.0

    @property
    def ok(self):
        return self.diagonal_zero and self.nonneg and not self.triangle_violations


def _reach_backward(edges, sources):
    """Nodes that can reach ``sources``; ``edges[k, j]`` means an edge j -> k."""
    reach = np.zeros(edges.shape[0], dtype=bool)
    reach[sources] = True
    frontier = reach.copy()
    while frontier.any():
        new = edges[frontier].any(axis=0) & ~reach
        reach |= new
        frontier = new
    return reach


def _certain_hit_set(edges, target):
    """Non-target pairs from which ``target`` is hit with probability one.

    A start fails exactly when it can wander into a pair that cannot reach
    the target without passing through the target first.
    """
    n = edges.shape[0]
    cannot_reach = ~_reach_backward(edges, [target])
    if not cannot_reach.any():
        free = np.ones(n, dtype=bool)
    else:
        no_exit = edges.copy()
        no_exit[:, target] = False
        free = ~_reach_backward(no_exit, np.flatnonzero(cannot_reach))
    free[target] = False
    return np.flatnonzero(free)


def _solve_row(p, target, cols, discount):
    """Solve x_j = 1 + discount * sum_{k in cols} x_k p[k, j] for j in cols."""
    if cols.size == 0:
        return np.zeros(0)
    sub = p[np.ix_(cols, cols)]
    system = np.eye(cols.size) - discount * sub.T
    try:
        x = np.linalg.solve(system, np.ones(cols.size))
    except np.linalg.LinAlgError as exc:
        raise SolveFailed(f"target {target}: {exc}") from exc
    resid = np.max(np.abs(system @ x - 1.0))
    if not np.isfinite(resid) or resid > _SANITY_RTOL * max(1.0, np.max(np.abs(x))):
        raise SolveFailed(f"target {target}: residual {resid!r}")
    return x


def _empty(n, fill):
    out = np.full((n, n), fill)
    np.fill_diagonal(out, 0.0)
    return out


def hitting_plain(p, targets=None):
    """Expected hitting times of the chain with column-stochastic matrix ``p``.

    Only the rows listed in ``targets`` (default: all) are solved; other rows
    are left as NaN off the diagonal. Entries from starts that miss the
    target with positive probability are ``+inf``.
    """
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    edges = p > 0
    rows = range(n) if targets is None else targets
    out = _empty(n, np.nan)
    for i in rows:
        out[i, :] = np.inf
        out[i, i] = 0.0
        cols = _certain_hit_set(edges, i)
        out[i, cols] = _solve_row(p, i, cols, 1.0)
    out.setflags(write=False)
    return HittingMatrix(out, "plain")


def hitting_restart(p_pi, rho0, gamma, support):
    """Hitting times of the restart chain; rows outside ``support`` are +inf off-diagonal."""
    chain = build_restart_chain(p_pi, rho0, gamma)
    plain = hitting_plain(chain.matrix, targets=support)
    out = np.where(np.isnan(plain.entries), np.inf, plain.entries)
    out.setflags(write=False)
    return HittingMatrix(out, "restart")


def hitting_discounted(p_pi, gamma):
    """Discounted first-passage lengths ``L``; always finite because ``gamma < 1``."""
    p_pi = np.asarray(p_pi, dtype=float)
    n = p_pi.shape[0]
    out = np.zeros((n, n))
    everything = np.arange(n)
    for i in range(n):
        cols = everything[everything != i]
        out[i, cols] = _solve_row(p_pi, i, cols, gamma)
    out.setflags(write=False)
    return HittingMatrix(out, "discounted")


def restart_from_discounted(l, rho0, gamma, rows=None):
    """Recover restart-chain hitting times from discounted ones by the ratio formula.

    ``T[i, j] = L[i, j] / (1 - (1 - gamma) * sum_k L[i, k] rho0[k])``.
    Rows outside ``rows`` (default: all) are +inf off-diagonal. Raises
    :class:`DenominatorNotPositive` for a requested row whose denominator is
    not positive, which happens exactly for pairs never visited from rho0.
    """
    if l.kind != "discounted":
        raise ValueError("expected a discounted hitting matrix")
    L = l.entries
    n = L.shape[0]
    denom = 1.0 - (1.0 - gamma) * (L @ np.asarray(rho0, dtype=float))
    out = _empty(n, np.inf)
    for i in (range(n) if rows is None else rows):
        if denom[i] <= _DENOM_TOL:
            raise DenominatorNotPositive(i, float(denom[i]))
        out[i, :] = L[i, :] / denom[i]
    out.setflags(write=False)
    return HittingMatrix(out, "restart")


def recursion_residual(t, p, discount=1.0):
    """Max |T_ij - 1 - discount * sum_k T_ik p(k|j)| over finite off-diagonal entries.

    For the restart kind pass the restart matrix as ``p``. Rows containing
    NaN (not solved) are skipped.
    """
    T = t.entries if isinstance(t, HittingMatrix) else np.asarray(t)
    worst = 0.0
    for i in range(T.shape[0]):
        row = T[i]
        if np.isnan(row).any():
            continue
        finite = np.isfinite(row)
        finite[i] = False
        if not finite.any():
            continue
        cols = np.flatnonzero(finite)
        # p[k, j] > 0 for an infinite T_ik would make T_ij infinite too.
        reach = np.where(np.isfinite(row), row, 0.0)
        r = row[cols] - 1.0 - discount * (reach @ p[:, cols])
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def restart_residual(t, p_pi, rho0, gamma, support):
    """Residual of the restart recursion written with explicit restart and follow terms.

    ``T_ij = 1 + (1 - gamma) sum_k T_ik rho0(k) + gamma sum_k T_ik P_pi(k|j)``,
    checked for every target ``i`` in ``support`` and every ``j != i``.
    """
    T = t.entries
    p_pi = np.asarray(p_pi, dtype=float)
    rho0 = np.asarray(rho0, dtype=float)
    worst = 0.0
    for i in support:
        row = T[i]
        restart_term = (1.0 - gamma) * (row @ rho0)
        follow = gamma * (row @ p_pi)
        r = row - 1.0 - restart_term - follow
        r[i] = 0.0
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def quasi_metric_check(t, support, tol=1e-9):
    """Check the quasi-distance axioms on ``support`` x ``support``.

    The triangle inequality is tested as ``T[i, k] <= T[i, j] + T[j, k] + tol``
    (k -> j -> i). Violations are reported as ``(i, j, k, gap)`` in the
    original pair indices.
    """
    idx = np.asarray(list(support), dtype=int)
    T = t.entries[np.ix_(idx, idx)] if isinstance(t, HittingMatrix) else np.asarray(t)[np.ix_(idx, idx)]
    if not np.all(np.isfinite(T)):
        raise ValueError("hitting matrix is not finite on the support")
    diagonal_zero = bool(np.all(np.diag(T) == 0.0))
    nonneg = bool(np.all(T >= 0.0))
    violations = []
    for b in range(len(idx)):
        # gap[a, c] = T[a, c] - T[a, b] - T[b, c]
        gap = T - T[:, b][:, None] - T[b, :][None, :]
        for a, c in zip(*np.nonzero(gap > tol)):
            violations.append((int(idx[a]), int(idx[b]), int(idx[c]), float(gap[a, c])))
    asym = float(np.max(np.abs(T - T.T))) if T.size else 0.0
    return QuasiMetricReport(diagonal_zero, nonneg, violations, asym)
