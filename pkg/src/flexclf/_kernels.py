"""Hot numeric kernels for the one-step solver.

Everything here is written to compile under numba's nopython mode and to run
unchanged as plain Python when numba is unavailable or disabled.  Set
``FLEXCLF_PURE_NUMPY=1`` in the environment to force the plain path; see
``benchmarks/compare_backends.py`` for a timing comparison of the two.
"""

import os

import numpy as np


def _numba_wanted() -> bool:
    flag = os.environ.get("FLEXCLF_PURE_NUMPY", "").strip().lower()
    return flag in ("", "0", "false", "no", "off")


try:
    if not _numba_wanted():
        raise ImportError("pure-numpy path forced via FLEXCLF_PURE_NUMPY")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def maybe_njit(func):
    if HAVE_NUMBA:
        return _njit(cache=True, nogil=True)(func)
    return func


# Status codes shared with solver.py.
OPTIMAL = 0
INFEASIBLE = 1


@maybe_njit
def quad_value(H, q, r0, u):
    """Evaluate u'Hu + q'u + r0."""
    m = u.shape[0]
    s = r0
    for i in range(m):
        s += q[i] * u[i]
        acc = 0.0
        for j in range(m):
            acc += H[i, j] * u[j]
        s += u[i] * acc
    return s


@maybe_njit
def box_qp(M, c, lo, hi, tol):
    """Minimize u'Mu + c'u over lo <= u <= hi for positive definite M.

    Projected Newton with active-set detection and Armijo backtracking;
    exact (to tol) for the small dense problems this package produces.
    """
    m = c.shape[0]
    mmax = 0.0
    cmax = 0.0
    for i in range(m):
        if abs(c[i]) > cmax:
            cmax = abs(c[i])
        for j in range(m):
            if abs(M[i, j]) > mmax:
                mmax = abs(M[i, j])
    gtol = tol * (1.0 + cmax + mmax)

    u = np.linalg.solve(2.0 * M, -c)
    for i in range(m):
        if u[i] < lo[i]:
            u[i] = lo[i]
        elif u[i] > hi[i]:
            u[i] = hi[i]
    value = quad_value(M, c, 0.0, u)

    free = np.empty(m, np.bool_)
    cand = np.empty(m)
    for _ in range(100):
        g = 2.0 * (M @ u) + c
        nfree = 0
        for i in range(m):
            clamped = (u[i] <= lo[i] and g[i] > 0.0) or (
                u[i] >= hi[i] and g[i] < 0.0
            )
            free[i] = not clamped
            if not clamped:
                nfree += 1
        if nfree == 0:
            break
        gnorm = 0.0
        for i in range(m):
            if free[i] and abs(g[i]) > gnorm:
                gnorm = abs(g[i])
        if gnorm <= gtol:
            break

        # Newton target on the free block with clamped coordinates fixed.
        Mff = np.empty((nfree, nfree))
        rhs = np.empty(nfree)
        r = 0
        for i in range(m):
            if not free[i]:
                continue
            s = c[i]
            cc = 0
            for j in range(m):
                if free[j]:
                    Mff[r, cc] = 2.0 * M[i, j]
                    cc += 1
                else:
                    s += 2.0 * M[i, j] * u[j]
            rhs[r] = -s
            r += 1
        uf = np.linalg.solve(Mff, rhs)

        search = np.zeros(m)
        sdotg = 0.0
        r = 0
        for i in range(m):
            if free[i]:
                search[i] = uf[r] - u[i]
                sdotg += search[i] * g[i]
                r += 1
        if sdotg >= 0.0:
            break

        step = 1.0
        accepted = False
        vc = value
        for _ls in range(60):
            for i in range(m):
                x = u[i] + step * search[i]
                if x < lo[i]:
                    x = lo[i]
                elif x > hi[i]:
                    x = hi[i]
                cand[i] = x
            vc = quad_value(M, c, 0.0, cand)
            if vc <= value + 0.1 * step * sdotg:
                accepted = True
                break
            step *= 0.6
        if not accepted:
            break
        moved = False
        for i in range(m):
            if cand[i] != u[i]:
                moved = True
            u[i] = cand[i]
        value = vc
        if not moved:
            break
    return u


@maybe_njit
def _min_quad_m1(h, qs, r0, lo, hi):
    if h > 0.0:
        u = -qs / (2.0 * h)
    elif qs > 0.0:
        u = lo
    elif qs < 0.0:
        u = hi
    else:
        u = 0.0
    if u < lo:
        u = lo
    elif u > hi:
        u = hi
    return u, h * u * u + qs * u + r0


@maybe_njit
def min_quad_over_box(H, q, r0, lo, hi, tol):
    """Global minimum of the convex quadratic u'Hu + q'u + r0 over the box.

    H only needs to be PSD; a tiny diagonal shift keeps the inner Newton
    solve well posed without moving the value beyond tol.
    """
    m = q.shape[0]
    if m == 1:
        u1, val = _min_quad_m1(H[0, 0], q[0], r0, lo[0], hi[0])
        u = np.empty(1)
        u[0] = u1
        return u, val
    hmax = 0.0
    for i in range(m):
        for j in range(m):
            if abs(H[i, j]) > hmax:
                hmax = abs(H[i, j])
    reg = 1e-12 * (1.0 + hmax)
    M = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            M[i, j] = H[i, j]
        M[i, i] += reg
    u = box_qp(M, q, lo, hi, tol)
    return u, quad_value(H, q, r0, u)


@maybe_njit
def _solve_m1(h, qs, r0, bound, ru, alpha, lam_max, lo, hi, tol):
    """Scalar-input fast path: all-float dual bisection."""
    iters = 0
    uc, cv_min = _min_quad_m1(h, qs, r0, lo, hi)
    feas_eps = 1e-8 * (1.0 + abs(bound))
    if cv_min > bound + lam_max + feas_eps:
        return uc, 0.0, np.nan, INFEASIBLE, np.nan, iters

    u0 = 0.0
    if u0 < lo:
        u0 = lo
    elif u0 > hi:
        u0 = hi
    cv0 = h * u0 * u0 + qs * u0 + r0
    if cv0 <= bound:
        return u0, 0.0, ru * u0 * u0, OPTIMAL, 0.0, iters

    mu_hi = 1.0
    if 2.0 * alpha > mu_hi:
        mu_hi = 2.0 * alpha
    bracketed = True
    while True:
        den = ru + mu_hi * h
        u = -mu_hi * qs / (2.0 * den)
        if u < lo:
            u = lo
        elif u > hi:
            u = hi
        lam_mu = lam_max if mu_hi > alpha else 0.0
        if h * u * u + qs * u + r0 - bound - lam_mu <= 0.0:
            break
        mu_hi *= 2.0
        iters += 1
        if mu_hi > 1e30:
            bracketed = False
            break
    if not bracketed:
        # Feasible only in the limit: the constraint minimizer is the answer.
        lam = cv_min - bound
        if lam < 0.0:
            lam = 0.0
        elif lam > lam_max:
            lam = lam_max
        viol = cv_min - bound - lam
        if viol < 0.0:
            viol = 0.0
        return uc, lam, ru * uc * uc + alpha * lam, OPTIMAL, viol, iters

    mu_lo = 0.0
    while mu_hi - mu_lo > 1e-12 * (1.0 + mu_hi):
        mu = 0.5 * (mu_lo + mu_hi)
        den = ru + mu * h
        u = -mu * qs / (2.0 * den)
        if u < lo:
            u = lo
        elif u > hi:
            u = hi
        lam_mu = lam_max if mu > alpha else 0.0
        if h * u * u + qs * u + r0 - bound - lam_mu > 0.0:
            mu_lo = mu
        else:
            mu_hi = mu
        iters += 1

    den = ru + mu_hi * h
    u = -mu_hi * qs / (2.0 * den)
    if u < lo:
        u = lo
    elif u > hi:
        u = hi
    cvu = h * u * u + qs * u + r0
    lam = cvu - bound
    if lam < 0.0:
        lam = 0.0
    elif lam > lam_max:
        lam = lam_max

    g = 2.0 * ru * u + mu_hi * (2.0 * h * u + qs)
    station = abs(g)
    if (u <= lo and g > 0.0) or (u >= hi and g < 0.0):
        station = 0.0
    viol = cvu - bound - lam
    if viol < 0.0:
        viol = 0.0
    comp = abs(mu_hi * (cvu - bound - lam))
    kkt = station
    if comp > kkt:
        kkt = comp
    if viol > kkt:
        kkt = viol
    return u, lam, ru * u * u + alpha * lam, OPTIMAL, kkt, iters


@maybe_njit
def _argmin_effort_mu(H, q, R_u, mu, lo, hi, tol):
    m = q.shape[0]
    M = np.empty((m, m))
    c = np.empty(m)
    for i in range(m):
        c[i] = mu * q[i]
        for j in range(m):
            M[i, j] = R_u[i, j] + mu * H[i, j]
    return box_qp(M, c, lo, hi, tol)


@maybe_njit
def _solve_gen(H, q, r0, bound, R_u, alpha, lam_max, lo, hi, tol):
    """General-m dual bisection with projected-Newton inner solves."""
    m = q.shape[0]
    iters = 0
    uc, cv_min = min_quad_over_box(H, q, r0, lo, hi, tol)
    feas_eps = 1e-8 * (1.0 + abs(bound))
    if cv_min > bound + lam_max + feas_eps:
        return uc, 0.0, np.nan, INFEASIBLE, np.nan, iters

    zeros = np.zeros(m)
    u0 = box_qp(R_u, zeros, lo, hi, tol)
    cv0 = quad_value(H, q, r0, u0)
    if cv0 <= bound:
        return u0, 0.0, quad_value(R_u, zeros, 0.0, u0), OPTIMAL, 0.0, iters

    mu_hi = 1.0
    if 2.0 * alpha > mu_hi:
        mu_hi = 2.0 * alpha
    bracketed = True
    while True:
        u = _argmin_effort_mu(H, q, R_u, mu_hi, lo, hi, tol)
        lam_mu = lam_max if mu_hi > alpha else 0.0
        if quad_value(H, q, r0, u) - bound - lam_mu <= 0.0:
            break
        mu_hi *= 2.0
        iters += 1
        if mu_hi > 1e30:
            bracketed = False
            break
    if not bracketed:
        lam = cv_min - bound
        if lam < 0.0:
            lam = 0.0
        elif lam > lam_max:
            lam = lam_max
        viol = cv_min - bound - lam
        if viol < 0.0:
            viol = 0.0
        obj = quad_value(R_u, zeros, 0.0, uc) + alpha * lam
        return uc, lam, obj, OPTIMAL, viol, iters

    mu_lo = 0.0
    while mu_hi - mu_lo > 1e-12 * (1.0 + mu_hi):
        mu = 0.5 * (mu_lo + mu_hi)
        u = _argmin_effort_mu(H, q, R_u, mu, lo, hi, tol)
        lam_mu = lam_max if mu > alpha else 0.0
        if quad_value(H, q, r0, u) - bound - lam_mu > 0.0:
            mu_lo = mu
        else:
            mu_hi = mu
        iters += 1

    u = _argmin_effort_mu(H, q, R_u, mu_hi, lo, hi, tol)
    cvu = quad_value(H, q, r0, u)
    lam = cvu - bound
    if lam < 0.0:
        lam = 0.0
    elif lam > lam_max:
        lam = lam_max

    station = 0.0
    for i in range(m):
        gi = 0.0
        for j in range(m):
            gi += 2.0 * (R_u[i, j] + mu_hi * H[i, j]) * u[j]
        gi += mu_hi * q[i]
        at_lo = u[i] <= lo[i] and gi > 0.0
        at_hi = u[i] >= hi[i] and gi < 0.0
        if not (at_lo or at_hi) and abs(gi) > station:
            station = abs(gi)
    viol = cvu - bound - lam
    if viol < 0.0:
        viol = 0.0
    comp = abs(mu_hi * (cvu - bound - lam))
    kkt = station
    if comp > kkt:
        kkt = comp
    if viol > kkt:
        kkt = viol
    obj = quad_value(R_u, zeros, 0.0, u) + alpha * lam
    return u, lam, obj, OPTIMAL, kkt, iters


@maybe_njit
def solve_one_step_kernel(H, q, r0, bound, R_u, alpha, lam_max, lo, hi, tol):
    """Dual bisection on the quadratic-constraint multiplier.

    Returns (u, lam, objective, status, kkt_residual, iterations).  The slack
    reported is the smallest one satisfying the constraint at the returned u,
    so ties at the penalty-weight multiplier resolve to least relaxation.
    """
    m = q.shape[0]
    if m == 1:
        u1, lam, obj, status, kkt, iters = _solve_m1(
            H[0, 0], q[0], r0, bound, R_u[0, 0], alpha, lam_max,
            lo[0], hi[0], tol,
        )
        u = np.empty(1)
        u[0] = u1
        return u, lam, obj, status, kkt, iters
    return _solve_gen(H, q, r0, bound, R_u, alpha, lam_max, lo, hi, tol)
