"""Tracking-variance QP over the selected support with an L1 turnover bound.

    min (x - x_b)' V (x - x_b)
    s.t. 1'x = 1, x >= 0, x_i = 0 off the support, sum_i |x_i - x_prev_i| <= t

The turnover constraint is rewritten with split variables
x - x_prev = p - m, p, m >= 0, 1'(p + m) <= t, and the resulting convex QP is
solved by a Mehrotra predictor-corrector interior-point method. The interior
point is then polished by re-solving the KKT system on the identified
active set; the polished point is kept only if it is feasible and no worse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from indexfund.errors import DimensionError, InfeasibleError, ValidationError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 10_000
MAX_TURNOVER = 2.0


@dataclass(frozen=True)
class QpProblem:
    v: np.ndarray
    x_b: np.ndarray
    support: tuple
    x_prev: np.ndarray | None = None
    turnover_bound: float | None = None


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool


def turnover(x_new, x_old):
    x_new = np.asarray(x_new, dtype=float)
    x_old = np.asarray(x_old, dtype=float)
    if x_new.shape != x_old.shape:
        raise DimensionError(f"turnover of vectors with shapes {x_new.shape} and {x_old.shape}")
    return float(np.abs(x_new - x_old).sum())


def tracking_variance(x, x_b, v):
    d = np.asarray(x, dtype=float) - np.asarray(x_b, dtype=float)
    return max(float(d @ v @ d), 0.0)


def _interior_point(H, c, A, b, G, h, tol, max_iters):
    """Mehrotra predictor-corrector for min 1/2 z'Hz + c'z, Az = b, Gz <= h.

    Returns (z, iterations, converged).
    """
    nz, ne, ni = H.shape[0], A.shape[0], G.shape[0]
    z = np.linalg.lstsq(A, b, rcond=None)[0]
    s = np.maximum(h - G @ z, 1.0)
    lam = np.ones(ni)
    y = np.zeros(ne)
    scale_d = 1.0 + np.abs(c).max()
    scale_p = 1.0 + max(np.abs(b).max(), np.abs(h).max())

    def step_length(v, dv):
        neg = dv < 0
        return min(1.0, float(np.min(-v[neg] / dv[neg]))) if neg.any() else 1.0

    for it in range(1, max_iters + 1):
        rd = H @ z + c + A.T @ y + G.T @ lam
        re = A @ z - b
        ri = G @ z + s - h
        mu = float(s @ lam) / ni
        if (np.abs(rd).max() <= 1e-12 * scale_d and np.abs(re).max() <= 1e-12 * scale_p
                and np.abs(ri).max() <= 1e-12 * scale_p and s @ lam <= tol):
            return z, it - 1, True

        w = lam / s
        K = np.zeros((nz + ne, nz + ne))
        K[:nz, :nz] = H + G.T @ (w[:, None] * G)
        K[:nz, nz:] = A.T
        K[nz:, :nz] = A

        def solve(rc):
            rhs = np.concatenate([-rd - G.T @ ((-rc + lam * ri) / s), -re])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            dz, dy = sol[:nz], sol[nz:]
            ds = -ri - G @ dz
            dlam = (-rc - lam * ds) / s
            return dz, dy, ds, dlam

        # affine predictor, then centering-corrector
        dz, dy, ds, dlam = solve(s * lam)
        a_aff = min(step_length(s, ds), step_length(lam, dlam))
        mu_aff = float((s + a_aff * ds) @ (lam + a_aff * dlam)) / ni
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        dz, dy, ds, dlam = solve(s * lam + ds * dlam - sigma * mu)

        alpha = 0.99 * min(step_length(s, ds), step_length(lam, dlam))
        alpha = min(alpha, 1.0)
        z = z + alpha * dz
        y = y + alpha * dy
        s = s + alpha * ds
        lam = lam + alpha * dlam
        if alpha < 1e-14:
            break
    return z, max_iters if alpha >= 1e-14 else it, False


def _objective(Q, q, x):
    return 0.5 * float(x @ Q @ x) + float(q @ x)


def _polish(Q, q, x, x0, tau):
    """Re-solve the KKT equations with the active set read off the interior point."""
    k = len(x)
    delta = 1e-7
    fixed_val = np.full(k, np.nan)
    fixed_val[x < delta] = 0.0
    sign = np.zeros(k)
    active = False
    if x0 is not None and tau - np.abs(x - x0).sum() < 1e-6:
        active = True
        at_prev = (np.abs(x - x0) < delta) & np.isnan(fixed_val)
        fixed_val[at_prev] = x0[at_prev]
        sign = np.where(x > x0, 1.0, -1.0)
    free = np.flatnonzero(np.isnan(fixed_val))
    fixed = np.flatnonzero(~np.isnan(fixed_val))
    if len(free) == 0:
        return None
    xf = fixed_val[fixed]
    nf = len(free)
    nrow = nf + 1 + int(active)
    K = np.zeros((nrow, nrow))
    rhs = np.zeros(nrow)
    K[:nf, :nf] = Q[np.ix_(free, free)]
    K[:nf, nf] = 1.0
    K[nf, :nf] = 1.0
    rhs[:nf] = -q[free] - Q[np.ix_(free, fixed)] @ xf
    rhs[nf] = 1.0 - xf.sum()
    if active:
        sf = sign[free]
        K[:nf, nf + 1] = sf
        K[nf + 1, :nf] = sf
        rhs[nf + 1] = tau - np.abs(xf - x0[fixed]).sum() + sf @ x0[free]
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return None
    out = np.zeros(k)
    out[fixed] = xf
    out[free] = sol[:nf]
    if out.min() < -1e-13 or abs(out.sum() - 1.0) > 1e-12:
        return None
    return np.maximum(out, 0.0)


def solve_tracking_qp(problem, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS):
    v = np.asarray(problem.v, dtype=float)
    x_b = np.asarray(problem.x_b, dtype=float)
    n = len(x_b)
    if v.shape != (n, n):
        raise DimensionError(f"covariance shape {v.shape} does not match {n} stocks")
    support = np.array(sorted(set(int(i) for i in problem.support)), dtype=int)
    if len(support) == 0 or support.min() < 0 or support.max() >= n:
        raise ValidationError("support must be a non-empty set of stock indices",
                              module="weighting_qp")
    k = len(support)

    x0 = t = None
    if problem.x_prev is not None and problem.turnover_bound is not None:
        x_prev = np.asarray(problem.x_prev, dtype=float)
        if x_prev.shape != (n,):
            raise DimensionError(f"previous holdings have shape {x_prev.shape}, expected ({n},)")
        t = float(problem.turnover_bound)
        if t < 0:
            raise ValidationError("turnover bound must be non-negative", module="weighting_qp")
        off = np.ones(n, dtype=bool)
        off[support] = False
        off_mass = float(np.abs(x_prev[off]).sum())
        if t < 2.0 * off_mass - 1e-12:
            raise InfeasibleError(
                f"turnover bound {t} cannot reach the support: moving the {off_mass:.6g} "
                f"held off-support needs turnover >= {2.0 * off_mass:.6g}", 2.0 * off_mass)
        if t < MAX_TURNOVER:
            x0 = x_prev[support]
            tau = max(t - off_mass, 0.0)

    if x0 is not None and tau <= 1e-15:
        # only x_prev itself is feasible
        x = np.zeros(n)
        x[support] = x0
        return QpSolution(x, tracking_variance(x, x_b, v), 0, True)

    vss = v[np.ix_(support, support)]
    scale = max(float(np.trace(vss)) / k, 1e-300)
    Q = 2.0 * vss / scale
    Q = 0.5 * (Q + Q.T)
    q = -2.0 * (v @ x_b)[support] / scale
    gap_tol = min(tol / scale, 1e-10)
    eye = np.eye(k)

    def simplex_only():
        return _interior_point(Q, q, np.ones((1, k)), np.ones(1), -eye, np.zeros(k),
                               gap_tol, max_iters)

    z, iters, ok = simplex_only()
    xs = z[:k]
    if x0 is not None and np.abs(np.maximum(xs, 0) - x0).sum() > tau:
        zero = np.zeros((k, k))
        H = np.block([[Q, zero, zero], [zero, zero, zero], [zero, zero, zero]])
        c = np.concatenate([q, np.zeros(2 * k)])
        A = np.vstack([np.concatenate([np.ones(k), np.zeros(2 * k)]),
                       np.hstack([eye, -eye, eye])])
        b = np.concatenate([[1.0], x0])
        G = np.vstack([np.hstack([-eye, zero, zero]),
                       np.hstack([zero, -eye, zero]),
                       np.hstack([zero, zero, -eye]),
                       np.concatenate([np.zeros(k), np.ones(2 * k)])])
        h = np.concatenate([np.zeros(3 * k), [tau]])
        z, more, ok = _interior_point(H, c, A, b, G, h, gap_tol, max_iters)
        iters += more
        xs = z[:k]
        polished = _polish(Q, q, xs, x0, tau)
    else:
        polished = _polish(Q, q, xs, None, None)

    if (polished is not None and x0 is not None
            and np.abs(polished - x0).sum() > tau + 1e-12):
        polished = None
    if polished is not None and _objective(Q, q, polished) <= _objective(Q, q, xs) + 1e-14 * (
            1.0 + abs(_objective(Q, q, xs))):
        xs = polished
    xs = np.maximum(xs, 0.0)
    x = np.zeros(n)
    x[support] = xs
    return QpSolution(x, tracking_variance(x, x_b, v), iters, ok)
