"""Gromov-Wasserstein comparison of MDPs through their hitting-time triples.

An MDP is summarised by a triple: the state-action pairs it actually
visits, the normalized occupancy measure on them and the restart-chain
hitting times between them. Two triples are compared with

    GW = 1/2 * sqrt( sum_{x,y,x',y'} |T_X(x,x') - T_Y(y,y')|^2 mu(x,y) mu(x',y') )

minimised over couplings ``mu`` of the two measures.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import InfeasibleCoupling, NoConvergence, SizeMismatch, TooLarge
from .hitting import hitting_restart
from .mdp_core import induced_transition, initial_pair_distribution, occupancy_measure
from .restart_chain import SUPPORT_THRESHOLD, support_set

EXHAUSTIVE_MAX = 4
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MetricMeasureTriple:
    labels: tuple
    measure: np.ndarray
    hitting: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        if self.measure.shape != (n,) or self.hitting.shape != (n, n):
            raise ValueError("labels, measure and hitting sizes disagree")
        if not np.all(self.measure > 0):
            raise ValueError("measure must be strictly positive on the support")
        if not np.all(np.isfinite(self.hitting)) or np.any(np.diag(self.hitting) != 0):
            raise ValueError("hitting matrix must be finite with zero diagonal")

    @property
    def size(self):
        return len(self.labels)

    @property
    def mass(self):
        return float(self.measure.sum())


@dataclass(frozen=True)
class CouplingReport:
    max_row_gap: float
    max_col_gap: float
    min_entry: float
    mass_x: float
    mass_y: float
    feasible: bool

    @property
    def max_gap(self):
        return max(self.max_row_gap, self.max_col_gap)

    @property
    def masses_match(self):
        return abs(self.mass_x - self.mass_y) <= FEASIBILITY_TOL


@dataclass(frozen=True, eq=False)
class GwResult:
    value: float
    coupling: np.ndarray
    status: str
    restarts_used: int = 0


@dataclass(frozen=True)
class GwParams:
    """Knobs for :func:`gw_solve`. ``epsilon_schedule`` is relative to the
    median squared hitting-time difference; ``None`` means 8 geometric steps
    from 1 down to 1e-3."""

    epsilon_schedule: tuple | None = None
    restarts: int = 16
    seed: int = 0
    max_iters: int = 200
    tol: float = 1e-10
    inner_iters: int = 5
    sinkhorn_iters: int = 5_000
    sinkhorn_tol: float = 1e-10


def build_triple(mdp, normalize=True, threshold=SUPPORT_THRESHOLD):
    """Support, (normalized) occupancy and restart hitting times of ``mdp``.

    With ``normalize=False`` the raw occupancy (total mass ``1/(1-gamma)``) is
    kept, which only makes sense for demonstrating that such triples admit
    no coupling when the discounts differ.
    """
    p_pi = induced_transition(mdp)
    rho0 = initial_pair_distribution(mdp)
    occ = occupancy_measure(p_pi, rho0, mdp.gamma)
    support = support_set(occ, threshold)
    T = hitting_restart(p_pi, rho0, mdp.gamma, support)
    idx = list(support.indices)
    pairs = mdp.index.pairs
    measure = (occ.normalized if normalize else occ.values)[idx]
    return MetricMeasureTriple(tuple(pairs[i] for i in idx), measure.copy(), T.restrict(idx))


def permute_triple(t, perm):
    """Relabel: new point ``k`` is old point ``perm[k]``."""
    perm = list(perm)
    return MetricMeasureTriple(tuple(t.labels[k] for k in perm), t.measure[perm],
                               t.hitting[np.ix_(perm, perm)])


def one_point_triple(label=("s", "a")):
    return MetricMeasureTriple((label,), np.ones(1), np.zeros((1, 1)))


# -- objective ---------------------------------------------------------------

def check_coupling(tX, tY, mu, tol=FEASIBILITY_TOL):
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (tX.size, tY.size):
        raise ValueError(f"coupling shape {mu.shape} does not match ({tX.size}, {tY.size})")
    row_gap = float(np.max(np.abs(mu.sum(axis=1) - tX.measure)))
    col_gap = float(np.max(np.abs(mu.sum(axis=0) - tY.measure)))
    min_entry = float(mu.min())
    mass_x, mass_y = tX.mass, tY.mass
    feasible = (row_gap <= tol and col_gap <= tol and min_entry >= -tol
                and abs(mass_x - mass_y) <= tol)
    return CouplingReport(row_gap, col_gap, min_entry, mass_x, mass_y, feasible)


def _distortion_sum(A, B, mu):
    """sum |A[x,x'] - B[y,y']|^2 mu[x,y] mu[x',y'], accumulated without cancellation."""
    total = 0.0
    for x in range(A.shape[0]):
        w = mu[x]
        if not np.any(w):
            continue
        # diff[y, x', y'] = A[x, x'] - B[y, y']
        diff = A[x][None, :, None] - B[:, None, :]
        total += float(w @ np.einsum("yab,ab->y", diff * diff, mu))
    return total


def gw_objective(tX, tY, mu, tol=FEASIBILITY_TOL):
    mu = np.asarray(mu, dtype=float)
    report = check_coupling(tX, tY, mu, tol)
    if not report.feasible:
        raise InfeasibleCoupling(max(report.max_gap, -report.min_entry, 0.0),
                                 report.mass_x, report.mass_y)
    return 0.5 * np.sqrt(max(_distortion_sum(tX.hitting, tY.hitting, mu), 0.0))


def _q_apply(A, B, A2, B2, mu):
    """(Q mu)[x, y] = sum_{x',y'} (A[x,x'] - B[y,y'])^2 mu[x',y']."""
    r, c = mu.sum(axis=1), mu.sum(axis=0)
    return (A2 @ r)[:, None] + (B2 @ c)[None, :] - 2.0 * (A @ mu @ B.T)


def _gradient(A, B, A2, B2, mu):
    return _q_apply(A, B, A2, B2, mu) + _q_apply(A.T, B.T, A2.T, B2.T, mu)


# -- coupling utilities -----------------------------------------------------

def round_to_marginals(mu, p, q, sweeps=5):
    """Project a nonnegative matrix onto couplings of ``p`` and ``q``.

    A few proportional-fitting sweeps, then the rank-one correction of
    Altschuler et al. which lands exactly on the marginals.
    """
    mu = np.maximum(np.asarray(mu, dtype=float), 0.0)
    for _ in range(sweeps):
        r = mu.sum(axis=1)
        mu = mu * np.divide(p, r, out=np.zeros_like(p), where=r > 0)[:, None]
        c = mu.sum(axis=0)
        mu = mu * np.divide(q, c, out=np.zeros_like(q), where=c > 0)[None, :]
    r = mu.sum(axis=1)
    mu = mu * np.minimum(1.0, np.divide(p, r, out=np.ones_like(p), where=r > 0))[:, None]
    c = mu.sum(axis=0)
    mu = mu * np.minimum(1.0, np.divide(q, c, out=np.ones_like(q), where=c > 0))[None, :]
    err_r = p - mu.sum(axis=1)
    err_c = q - mu.sum(axis=0)
    s = err_r.sum()
    # below roundoff the correction would only smear ~1e-17 mass onto every entry
    if s > 0 and max(err_r.max(), err_c.max()) > 1e-14 * max(p.max(), q.max()):
        mu = mu + np.outer(err_r, err_c) / s
    return mu


def _marginal_system(m, n, p, q):
    """Equality constraints on the flattened coupling (last column sum dropped)."""
    E = np.zeros((m + n - 1, m * n))
    for x in range(m):
        E[x, x * n:(x + 1) * n] = 1.0
    for y in range(n - 1):
        E[m + y, y::n] = 1.0
    return E, np.concatenate([p, q[:-1]])


def _quadratic_form(A, B):
    """Symmetric matrix H with sum |A - B|^2 mu mu = vec(mu)^T H vec(mu)."""
    m, n = A.shape[0], B.shape[0]
    Q = ((A[:, None, :, None] - B[None, :, None, :]) ** 2).reshape(m * n, m * n)
    return 0.5 * (Q + Q.T)


# -- exact oracle --------------------------------------------------------------

def _components(g):
    """Bipartite connected components of the m x n patterns ``g``.

    Returns the component of every row (nodes 0..m-1) and column (nodes
    m..m+n-1), and a mask of column-sum constraints that are redundant
    within their component.
    """
    _, m, n = g.shape
    # min-label propagation; m + n rounds reach every node of a component
    rows = np.tile(np.arange(m), (len(g), 1))
    cols = np.tile(np.arange(m, m + n), (len(g), 1))
    big = m + n
    for _ in range(m + n):
        rows = np.minimum(rows, np.where(g, cols[:, None, :], big).min(axis=2))
        cols = np.minimum(cols, np.where(g, rows[:, :, None], big).min(axis=1))
    labels = np.concatenate([rows, cols], axis=1)
    # The last column-sum constraint is always dropped; in every other
    # component drop the constraint of its first column as well.
    redundant = np.zeros((len(g), n - 1), dtype=bool)
    last_comp = cols[:, -1]
    for y in range(n - 1):
        first_in_comp = np.all(cols[:, :y] != cols[:, [y]], axis=1)
        redundant[:, y] = first_in_comp & (cols[:, y] != last_comp)
    return labels, redundant


@functools.lru_cache(maxsize=None)
def _support_patterns(m, n):
    """Boolean m x n patterns with no empty row or column, with their components."""
    grid = np.array(list(itertools.product((False, True), repeat=m * n)), dtype=bool)
    g = grid.reshape(-1, m, n)
    keep = g.any(axis=2).all(axis=1) & g.any(axis=1).all(axis=1)
    grid = grid[keep]
    labels, redundant = _components(g[keep])
    for arr in (grid, labels, redundant):
        arr.setflags(write=False)
    return grid, labels, redundant


def _balanced(labels, p, q, tol=1e-12):
    """Patterns on which every connected component carries equal row and column mass.

    Other patterns describe empty faces.
    """
    mass = np.concatenate([p, -q])
    ok = np.ones(len(labels), dtype=bool)
    for comp in range(int(labels.max()) + 1):
        net = ((labels == comp) * mass[None, :]).sum(axis=1)
        ok &= np.abs(net) <= tol
    return ok


def _kkt(A, B, p, q):
    m, n = A.shape[0], B.shape[0]
    k = m * n
    H = _quadratic_form(A, B)
    E, b = _marginal_system(m, n, p, q)
    c = E.shape[0]
    K = np.zeros((k + c, k + c))
    K[:k, :k] = 2.0 * H
    K[:k, k:] = E.T
    K[k:, :k] = E
    return H, K, np.concatenate([np.zeros(k), b])


def _face_candidates(A, B, p, q, masks, redundant=None, chunk=4096):
    """Stationary points of the objective on the coupling faces given by ``masks``.

    For every support pattern the KKT system of the equality-constrained
    quadratic (entries outside the pattern pinned to zero) is solved, by LU
    where that is accurate and by pseudo-inverse otherwise. Inconsistent
    systems and points with negative entries are dropped.
    """
    k = A.shape[0] * B.shape[0]
    H, K, rhs = _kkt(A, B, p, q)
    size = K.shape[0]
    diag = np.arange(size)
    found = [np.zeros((0, k))]
    m = A.shape[0]
    if redundant is None:
        redundant = np.zeros((len(masks), B.shape[0] - 1), dtype=bool)
    for start in range(0, len(masks), chunk):
        mk = masks[start:start + chunk]
        keep = np.concatenate([mk, np.ones((len(mk), m), dtype=bool),
                               ~redundant[start:start + chunk]], axis=1)
        Kb = np.where(keep[:, :, None] & keep[:, None, :], K, 0.0)
        Kb[:, diag, diag] += ~keep
        rb = np.where(keep, rhs, 0.0)
        tol = 1e-10 * (1.0 + np.abs(Kb).max(axis=(1, 2)))
        try:
            sol = np.linalg.solve(Kb, rb[:, :, None])[:, :, 0]
            resid = np.abs(np.einsum("bij,bj->bi", Kb, sol) - rb).max(axis=1)
            redo = ~(resid <= tol)
        except np.linalg.LinAlgError:
            sol = np.zeros_like(rb)
            redo = np.ones(len(mk), dtype=bool)
        if redo.any():
            sol[redo] = np.einsum("bij,bj->bi", np.linalg.pinv(Kb[redo]), rb[redo])
        resid = np.abs(np.einsum("bij,bj->bi", Kb, sol) - rb).max(axis=1)
        v = sol[:, :k]
        ok = (resid <= 1e3 * tol) & (v.min(axis=1) >= -1e-9)
        found.append(v[ok])
    return H, np.concatenate(found)


def _best_candidates(tX, tY, H, cands, keep=8):
    """Round the ``keep`` lowest-objective candidates onto the marginals and
    return the best (value, coupling)."""
    m, n = tX.size, tY.size
    v = np.maximum(cands, 0.0)
    # all terms are nonnegative, so this batched value has no cancellation
    approx = np.einsum("bi,ij,bj->b", v, H, v)
    best_val, best_mu = np.inf, None
    for t in np.argsort(approx, kind="stable")[:keep]:
        mu = round_to_marginals(v[t].reshape(m, n), tX.measure, tY.measure)
        if not check_coupling(tX, tY, mu).feasible:
            continue
        val = gw_objective(tX, tY, mu)
        if val < best_val - 1e-15:
            best_val, best_mu = val, mu
    return best_val, best_mu


def _check_masses(tX, tY):
    if abs(tX.mass - tY.mass) > FEASIBILITY_TOL:
        raise InfeasibleCoupling(abs(tX.mass - tY.mass), tX.mass, tY.mass)


def gw_exhaustive(tX, tY):
    """Global minimum of the GW objective for supports of at most four points.

    The minimum of a quadratic over the coupling polytope is attained at a
    stationary point of the objective restricted to some face, so solving
    the KKT system of every face (support pattern) and keeping the feasible
    solutions gives the exact optimum up to floating point.
    """
    m, n = tX.size, tY.size
    if m > EXHAUSTIVE_MAX or n > EXHAUSTIVE_MAX:
        raise TooLarge(f"exhaustive oracle handles at most {EXHAUSTIVE_MAX} points, got {m}x{n}")
    _check_masses(tX, tY)
    p, q = tX.measure, tY.measure
    if m == 1 or n == 1:
        mu = np.outer(p, q) / p.sum()
        return GwResult(gw_objective(tX, tY, mu), mu, "exact", 0)

    patterns, labels, redundant = _support_patterns(m, n)
    ok = _balanced(labels, p, q)
    scale = max(np.abs(tX.hitting).max(), np.abs(tY.hitting).max(), 1.0)
    H, cands = _face_candidates(tX.hitting / scale, tY.hitting / scale, p, q,
                                patterns[ok], redundant[ok])
    best_val, best_mu = _best_candidates(tX, tY, H, cands)
    if best_mu is None:  # vertices of the polytope are always candidates
        raise NoConvergence("no feasible face candidate found")
    return GwResult(float(best_val), best_mu, "exact", 0)


# -- heuristic solver ----------------------------------------------------------

def _lse(a, axis):
    mx = a.max(axis=axis, keepdims=True)
    return (mx + np.log(np.exp(a - mx).sum(axis=axis, keepdims=True))).squeeze(axis)


def sinkhorn_log(p, q, cost, eps, max_iters=20_000, tol=1e-10, duals=None):
    """Entropic transport plan between ``p`` and ``q`` by stabilised scaling.

    Scalings live in the kernel domain and are absorbed into log-domain
    duals whenever they grow large, so small ``eps`` does not underflow.
    Returns ``(plan, (f, g))``; pass the duals back in as ``duals`` to warm
    start a nearby problem. Raises :class:`NoConvergence` when the row
    marginal gap is still above ``tol`` after ``max_iters`` sweeps.
    """
    logp, logq = np.log(p), np.log(q)
    M = -cost / eps
    f, g = (np.zeros(len(p)), np.zeros(len(q))) if duals is None else duals

    def absorb(f, g):
        f = logp - _lse(M + g[None, :], 1)
        g = logq - _lse(M + f[:, None], 0)
        return f, g, np.exp(M + f[:, None] + g[None, :])

    f, g, K = absorb(f, g)
    u, v = np.ones(len(p)), np.ones(len(q))
    gap = np.inf
    for it in range(1, max_iters + 1):
        u = p / (K @ v)
        v = q / (K.T @ u)
        if it % 10 == 0 or it == max_iters:
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                f, g, K = absorb(f, g)
                u, v = np.ones(len(p)), np.ones(len(q))
                continue
            plan = u[:, None] * K * v[None, :]
            gap = np.max(np.abs(plan.sum(axis=1) - p))
            if gap < tol:
                return plan, (f + np.log(u), g + np.log(v))
            if max(np.abs(np.log(u)).max(), np.abs(np.log(v)).max()) > 30.0:
                f, g, K = absorb(f + np.log(u), g + np.log(v))
                u, v = np.ones(len(p)), np.ones(len(q))
    raise NoConvergence(f"Sinkhorn scaling stagnated at eps={eps:g} "
                        f"(marginal gap {gap:.3g}); try a larger epsilon")


def _lp_vertex(G, E, b):
    res = linprog(G.ravel(), A_eq=E, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NoConvergence(f"transport LP failed: {res.message}")
    return res.x.reshape(G.shape)


def _frank_wolfe(A, B, A2, B2, mu, E, b, max_iters, tol):
    """Frank-Wolfe with exact line search on the quadratic objective."""
    for _ in range(max_iters):
        G = _gradient(A, B, A2, B2, mu)
        d = _lp_vertex(G, E, b) - mu
        slope = float(np.sum(G * d))
        if -slope <= tol:
            break
        curv = float(np.sum(d * _q_apply(A, B, A2, B2, d)))
        step = min(1.0, -slope / (2.0 * curv)) if curv > 0 else 1.0
        mu = mu + step * d
    return mu


def _face_walk(A, B, p, q, mu, max_steps=50, swaps=True):
    """Active-set descent over faces of the coupling polytope.

    From the face spanned by ``mu``'s support, try every face obtained by
    adding one entry, dropping one entry or swapping one for another, move
    to the best stationary point found and repeat until nothing improves.
    """
    m, n = mu.shape
    k = m * n
    H = _quadratic_form(A, B)

    def value(v):
        v = np.maximum(v, 0.0)
        return float(v @ H @ v)

    cur = mu.reshape(-1)
    cur_val = value(cur)
    eye = np.eye(k, dtype=bool)
    for _ in range(max_steps):
        s = cur > 1e-12
        masks = [s[None, :] | eye, s[None, :] & ~eye]
        if swaps:
            add = s[None, :] | eye[~s]
            masks.append((add[:, None, :] & ~eye[s][None, :, :]).reshape(-1, k))
            # two additions move off degenerate vertices
            add2 = (add[:, None, :] | eye[~s][None, :, :]).reshape(-1, k)
            masks.append(add2)
            if k <= 16:
                # exchange two entries for two others: steps between vertices
                on = np.flatnonzero(s)
                i, j = np.triu_indices(on.size, 1)
                drop2 = eye[on[i]] | eye[on[j]]
                masks.append((add2[:, None, :] & ~drop2[None, :, :]).reshape(-1, k))
        masks = np.concatenate(masks)
        g = masks.reshape(-1, m, n)
        masks = np.unique(masks[g.any(axis=2).all(axis=1) & g.any(axis=1).all(axis=1)], axis=0)
        labels, redundant = _components(masks.reshape(-1, m, n))
        ok = _balanced(labels, p, q)
        _, cands = _face_candidates(A, B, p, q, masks[ok], redundant[ok])
        if not len(cands):
            break
        v = np.maximum(cands, 0.0)
        vals = np.einsum("bi,ij,bj->b", v, H, v)
        best = int(np.argmin(vals))
        if vals[best] >= cur_val * (1.0 - 1e-12) - 1e-300:
            break
        cur = round_to_marginals(v[best].reshape(m, n), p, q).reshape(-1)
        cur_val = value(cur)
    return cur.reshape(m, n)


def _anneal(A, B, A2, B2, mu, p, q, eps_values, params, strict=True):
    duals = None
    for k, eps in enumerate(eps_values):
        for inner in range(params.inner_iters):
            G = _gradient(A, B, A2, B2, mu)
            try:
                new, duals = sinkhorn_log(p, q, G, eps, params.sinkhorn_iters,
                                          params.sinkhorn_tol, duals)
            except NoConvergence:
                # only the very first scaling (largest epsilon, cold start) is fatal
                if strict and k == 0 and inner == 0:
                    raise
                # smaller epsilons only get harder; keep the last converged plan
                return mu
            done = np.max(np.abs(new - mu)) < 1e-9
            mu = new
            if done:
                break
    return mu


def gw_solve(tX, tY, params=None):
    """Multi-restart entropic + Frank-Wolfe search; the value is an upper bound.

    Each restart anneals an entropic linearisation scheme down the epsilon
    schedule, then alternates exact Frank-Wolfe steps with a stationary-point
    solve on the current support face. The best coupling, rounded onto the
    marginals, is returned with its exact objective.
    """
    params = params or GwParams()
    _check_masses(tX, tY)
    p, q = tX.measure, tY.measure
    m, n = tX.size, tY.size
    if m == 1 or n == 1:
        mu = np.outer(p, q) / p.sum()
        return GwResult(gw_objective(tX, tY, mu), mu, "upper_bound", 1)

    scale = max(np.abs(tX.hitting).max(), np.abs(tY.hitting).max(), 1.0)
    A, B = tX.hitting / scale, tY.hitting / scale
    A2, B2 = A * A, B * B
    sq = ((A[:, :, None, None] - B[None, None, :, :]) ** 2).ravel()
    med = float(np.median(sq)) or float(sq.max()) or 1.0
    schedule = params.epsilon_schedule or tuple(np.geomspace(1.0, 1e-3, 8))
    eps_values = [e * med for e in schedule]
    E, b = _marginal_system(m, n, p, q)
    polish = m * n <= 64

    best_val, best_mu = np.inf, None
    for r in range(params.restarts):
        if r == 0:
            mu = np.outer(p, q)
            mu = round_to_marginals(_anneal(A, B, A2, B2, mu, p, q, eps_values, params), p, q)
        elif r % 2:
            # random vertex; annealing would wash the starting point out
            rng = np.random.default_rng([params.seed, r])
            mu = round_to_marginals(_lp_vertex(rng.standard_normal((m, n)), E, b), p, q)
        else:
            # random interior point refined by the low-epsilon half of the schedule
            rng = np.random.default_rng([params.seed, r])
            mu = round_to_marginals(rng.exponential(size=(m, n)), p, q, sweeps=50)
            tail = eps_values[len(eps_values) // 2:]
            mu = round_to_marginals(
                _anneal(A, B, A2, B2, mu, p, q, tail, params, strict=False), p, q)
        val = np.inf
        for _ in range(3):
            mu = round_to_marginals(
                _frank_wolfe(A, B, A2, B2, mu, E, b, params.max_iters, params.tol), p, q)
            new_val = gw_objective(tX, tY, mu)
            if polish:
                alt = _face_walk(A, B, p, q, mu, swaps=m * n <= 36)
                if check_coupling(tX, tY, alt).feasible:
                    alt_val = gw_objective(tX, tY, alt)
                    if alt_val < new_val:
                        mu, new_val = alt, alt_val
            if new_val >= val - 1e-15:
                break
            val, kept = new_val, mu
        if val < best_val - 1e-12:
            best_val, best_mu = val, kept
    return GwResult(float(best_val), best_mu, "upper_bound", params.restarts)


# -- equivalence ---------------------------------------------------------------

def equivalence_check(tX, tY, tol=1e-8):
    """Find a bijection of supports preserving measures and hitting times.

    Returns a dict mapping point indices of ``tX`` to those of ``tY``, or
    ``None`` when no such bijection exists. Measures are compared after
    normalisation to unit mass.
    """
    n = tX.size
    if n != tY.size:
        raise SizeMismatch(f"support sizes differ: {n} vs {tY.size}")
    mx, my = tX.measure / tX.mass, tY.measure / tY.mass
    A, B = tX.hitting, tY.hitting
    out_x, out_y = np.sort(A, axis=0), np.sort(B, axis=0)  # column = from that point
    in_x, in_y = np.sort(A, axis=1), np.sort(B, axis=1)    # row = into that point
    cand = []
    for x in range(n):
        ok = [y for y in range(n)
              if abs(mx[x] - my[y]) <= tol
              and np.all(np.abs(out_x[:, x] - out_y[:, y]) <= tol)
              and np.all(np.abs(in_x[x] - in_y[y]) <= tol)]
        if not ok:
            return None
        cand.append(ok)
    order = sorted(range(n), key=lambda x: len(cand[x]))
    phi, used = {}, set()

    def extend(depth):
        if depth == n:
            return True
        x = order[depth]
        for y in cand[x]:
            if y in used:
                continue
            if all(abs(A[x, x2] - B[y, y2]) <= tol and abs(A[x2, x] - B[y2, y]) <= tol
                   for x2, y2 in phi.items()):
                phi[x] = y
                used.add(y)
                if extend(depth + 1):
                    return True
                del phi[x]
                used.discard(y)
        return False

    return dict(sorted(phi.items())) if extend(0) else None
