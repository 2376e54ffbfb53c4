"""Choose k representative stocks by maximizing total similarity to the nearest representative.

The binary program is

    max  sum_ij rho_ij x_ij
    s.t. sum_j y_j = k,  sum_j x_ij = 1 (each i),  x_ij <= y_j,  x, y binary.

`solve_exact` answers it by enumeration or branch-and-bound for small
universes; `solve_lagrangian` dualizes the one-assignment-per-row constraints
and runs subgradient descent on the multipliers, rounding each inner
selection to a feasible clustering.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from indexfund.errors import CapacityError, ValidationError

EXACT_CAP = 25
ENUMERATION_CAP = 15
THETA0 = 2.0
STALL_LIMIT = 20
MAX_ITERS = 1000
GAP_TOL = 1e-4


@dataclass(frozen=True)
class ClusterSolution:
    selected: tuple
    assignment: tuple
    objective: float

    @property
    def k(self):
        return len(self.selected)

    def clusters(self):
        """Map each representative to the sorted members of its cluster."""
        out = {j: [] for j in self.selected}
        for i, j in enumerate(self.assignment):
            out[j].append(i)
        return out


@dataclass
class LagrangianState:
    u: np.ndarray
    bound: float = math.inf
    step: float = 0.0
    best_feasible: ClusterSolution | None = None
    theta: float = THETA0
    stall: int = 0
    iterations: int = 0
    converged: bool = False
    history: list = field(default_factory=list)


def prepare(rho, k):
    """Validate a similarity matrix and force its diagonal to exactly 1."""
    rho = np.array(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError("similarity matrix must be square", module="clustering")
    n = rho.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k must satisfy 1 <= k <= n={n}, got {k}", module="clustering")
    np.fill_diagonal(rho, 1.0)
    return rho


def objective_of(rho, selected):
    """Sum over rows of the best similarity to any selected column (exactly rounded)."""
    return math.fsum(np.max(rho[:, list(selected)], axis=1).tolist())


def round_selection(rho, selected):
    """Assign each stock to its most similar representative (lowest index on ties)."""
    sel = sorted(int(j) for j in selected)
    cols = rho[:, sel]
    best = np.argmax(cols, axis=1)
    assignment = [sel[b] for b in best]
    # a representative always keeps itself: rho_jj = 1 is the row maximum, but
    # a tie with an earlier representative must not pull it away
    for j in sel:
        assignment[j] = j
    return ClusterSolution(tuple(sel), tuple(assignment),
                           math.fsum(rho[i, assignment[i]] for i in range(len(assignment))))


def _better(obj, sel, best_obj, best_sel):
    return best_sel is None or obj > best_obj or (obj == best_obj and sel < best_sel)


def _enumerate(rho, k):
    n = rho.shape[0]
    best_obj, best_sel = -math.inf, None
    for sel in itertools.combinations(range(n), k):
        obj = objective_of(rho, sel)
        if _better(obj, sel, best_obj, best_sel):
            best_obj, best_sel = obj, sel
    return best_sel


def _gains(rho, u):
    return np.maximum(rho - u[:, None], 0.0).sum(axis=0)


def _node_bound(gains, usum, fixed_in, free, slots):
    """L(u) restricted to y_j = 1 on `fixed_in`, y_j = 0 off `fixed_in` and `free`."""
    if slots > len(free):
        return -math.inf
    val = usum + gains[fixed_in].sum()
    if slots:
        g = gains[free]
        val += np.sort(g)[::-1][:slots].sum()
    return val


def _branch_and_bound(rho, k, multipliers, incumbent=None):
    """Best-first search over include/exclude decisions on y in index order.

    A node fixes y for indices < depth. Its bound is the smallest Lagrangian
    value over the supplied multiplier vectors with those fixings, each of
    which is a valid upper bound on every completion.
    """
    n = rho.shape[0]
    tables = [(_gains(rho, u), float(u.sum())) for u in multipliers]
    eps = 1e-9 * max(1.0, n)

    if incumbent is None:
        incumbent = round_selection(rho, list(range(k)))
    best_obj, best_sel = incumbent.objective, incumbent.selected

    def bound(included, depth):
        free = np.arange(depth, n)
        inc = np.array(included, dtype=int)
        slots = k - len(included)
        # covering bound: each row gets at most its best allowed column
        allowed = np.concatenate([inc, free])
        cover = rho[:, allowed].max(axis=1).sum()
        return min([cover] + [_node_bound(g, s, inc, free, slots) for g, s in tables])

    counter = itertools.count()
    heap = [(-bound((), 0), next(counter), (), 0)]
    while heap:
        negb, _, included, depth = heapq.heappop(heap)
        if -negb < best_obj - eps:
            break
        slots = k - len(included)
        if slots == 0 or n - depth == slots:
            sel = tuple(included) + tuple(range(depth, depth + slots if slots else depth))
            obj = objective_of(rho, sel)
            if _better(obj, sel, best_obj, best_sel):
                best_obj, best_sel = obj, sel
            continue
        for child in (included + (depth,), included):
            if k - len(child) > n - depth - 1:
                continue
            b = bound(child, depth + 1)
            if b >= best_obj - eps:
                heapq.heappush(heap, (-b, next(counter), child, depth + 1))
    return best_sel


def solve_exact(rho, k, cap=EXACT_CAP):
    """Globally optimal clustering; ties go to the lexicographically smallest set."""
    rho = prepare(rho, k)
    n = rho.shape[0]
    if n > cap:
        raise CapacityError(f"exact solver is capped at n={cap} stocks (got {n}); "
                            f"use solve_lagrangian for larger universes")
    if n <= ENUMERATION_CAP:
        sel = _enumerate(rho, k)
    else:
        start, state = solve_lagrangian(rho, k, max_iters=300)
        sel = _branch_and_bound(rho, k, [np.zeros(n), state.u], incumbent=start)
    return round_selection(rho, sel)


def evaluate_inner(rho, k, u):
    """Solve the relaxed problem for fixed multipliers in closed form.

    Returns (value, x, y) with x an n-by-n 0/1 matrix and y a 0/1 vector.
    """
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    reduced = rho - u[:, None]
    gains = np.maximum(reduced, 0.0).sum(axis=0)
    order = np.argsort(-gains, kind="stable")
    y = np.zeros(rho.shape[0], dtype=int)
    y[order[:k]] = 1
    x = ((reduced > 0) & (y[None, :] == 1)).astype(int)
    value = float(gains[order[:k]].sum() + u.sum())
    return value, x, y


def subgradient_step(state, inner_x, inner_value):
    """One multiplier update from the inner solution at `state.u`.

    The subgradient of L at u is g_i = 1 - sum_j x_ij. L is minimized, so
    u moves against g: rows assigned more than once get a larger u_i, which
    makes covering them less attractive on the next inner solve.
    """
    g = 1.0 - np.asarray(inner_x).sum(axis=1)
    improved = inner_value < state.bound
    bound = min(state.bound, inner_value)
    history = state.history + [bound]
    if not np.any(g):
        return replace(state, bound=bound, step=0.0, converged=True,
                       iterations=state.iterations + 1, history=history)

    theta, stall = state.theta, (0 if improved else state.stall + 1)
    if stall >= STALL_LIMIT:
        theta, stall = theta / 2.0, 0
    target = state.best_feasible.objective if state.best_feasible else 0.0
    step = theta * max(inner_value - target, 0.0) / float(g @ g)
    return replace(state, u=state.u - step * g, bound=bound, step=step, theta=theta,
                   stall=stall, iterations=state.iterations + 1, history=history)


def solve_lagrangian(rho, k, max_iters=MAX_ITERS, tol=GAP_TOL, u0=None):
    """Subgradient descent on the Lagrangian dual, keeping the best rounded selection.

    Returns (solution, state); `state.bound` upper-bounds the optimum and is
    at least `solution.objective`.
    """
    rho = prepare(rho, k)
    n = rho.shape[0]
    state = LagrangianState(u=np.zeros(n) if u0 is None else np.array(u0, dtype=float))
    for _ in range(max_iters):
        value, x, y = evaluate_inner(rho, k, state.u)
        cand = round_selection(rho, np.flatnonzero(y))
        best = state.best_feasible
        if best is None or _better(cand.objective, cand.selected, best.objective, best.selected):
            state.best_feasible = cand
        state = subgradient_step(state, x, value)
        if state.converged:
            break
        gap = (state.bound - state.best_feasible.objective) / max(1.0, abs(state.bound))
        if gap <= tol:
            break
    return state.best_feasible, state


def select(rho, k, exact_cap=EXACT_CAP):
    """Exact clustering when the universe is small enough, Lagrangian otherwise."""
    if np.asarray(rho).shape[0] <= exact_cap:
        return solve_exact(rho, k, cap=exact_cap)
    return solve_lagrangian(rho, k)[0]


def write_solution(solution, tickers, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stock", "representative"])
        for i, j in enumerate(solution.assignment):
            w.writerow([tickers[i], tickers[j]])
