"""Allocation-free numeric kernels: dual active-set QP and first-order-hold weights.

Everything here is numba-compiled and operates on caller-owned buffers; the
solve path performs no heap allocation (verified in the benchmark suite via
the numba runtime's allocation counters). The QP method is the classic dual
active-set scheme for strictly convex problems: start at the unconstrained
minimum, add the most violated constraint, take dual steps (Givens updates
of the active-set factorization) until primal feasible, with an unbounded
dual step serving as the infeasibility certificate.

Status codes returned by gi_solve:
    0  optimal
    1  infeasible (dual step unbounded, or inconsistent equalities)
    2  degenerate / iteration limit
    3  Hessian not positive definite (Cholesky breakdown)
"""
from __future__ import annotations

import numpy as np
from numba import njit

OPTIMAL = 0
INFEASIBLE = 1
DEGENERATE = 2
NOT_POSITIVE_DEFINITE = 3

_EPS = 2.220446049250313e-16


@njit(cache=True)
def _cholesky_lower(G, L, n):
    """L lower-triangular with L L^T = G; returns False on a nonpositive pivot."""
    for i in range(n):
        for j in range(i + 1):
            acc = G[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            if i == j:
                if acc <= 0.0:
                    return False
                L[i, i] = np.sqrt(acc)
            else:
                L[i, j] = acc / L[j, j]
        for j in range(i + 1, n):
            L[i, j] = 0.0
    return True


@njit(cache=True)
def _unconstrained_min(L, a, x, n):
    """x = -G^{-1} a via forward/back substitution with G = L L^T."""
    for i in range(n):
        acc = -a[i]
        for k in range(i):
            acc -= L[i, k] * x[k]
        x[i] = acc / L[i, i]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for k in range(i + 1, n):
            acc -= L[k, i] * x[k]
        x[i] = acc / L[i, i]


@njit(cache=True)
def _inverse_transpose_chol(L, J, n):
    """J = L^{-T}: columns solve L^T e_j, giving G^{-1} = J J^T."""
    for i in range(n):
        for j in range(n):
            J[i, j] = 0.0
        J[i, i] = 1.0
    # back-substitute each column of the identity through L^T
    for j in range(n):
        for i in range(n - 1, -1, -1):
            acc = J[i, j]
            for k in range(i + 1, n):
                acc -= L[k, i] * J[k, j]
            J[i, j] = acc / L[i, i]


@njit(cache=True)
def _distance(a, b):
    """hypot without overflow."""
    a1 = abs(a)
    b1 = abs(b)
    if a1 > b1:
        t = b1 / a1
        return a1 * np.sqrt(1.0 + t * t)
    if b1 > a1:
        t = a1 / b1
        return b1 * np.sqrt(1.0 + t * t)
    return a1 * np.sqrt(2.0)


@njit(cache=True)
def _add_constraint(R, J, d, n, q, R_norm):
    """Rotate the normal's coordinates into the active-set factor.

    Returns the new R_norm, or -1.0 when the new diagonal entry is
    numerically zero (linearly dependent constraint).
    """
    for j in range(n - 1, q, -1):
        cc = d[j - 1]
        ss = d[j]
        h = _distance(cc, ss)
        if h == 0.0:
            continue
        d[j] = 0.0
        ss = ss / h
        cc = cc / h
        if cc < 0.0:
            cc = -cc
            ss = -ss
            d[j - 1] = -h
        else:
            d[j - 1] = h
        xny = ss / (1.0 + cc)
        for k in range(n):
            t1 = J[k, j - 1]
            t2 = J[k, j]
            J[k, j - 1] = t1 * cc + t2 * ss
            J[k, j] = xny * (t1 + J[k, j - 1]) - t2
    for i in range(q + 1):
        R[i, q] = d[i]
    if abs(d[q]) <= _EPS * R_norm:
        return -1.0
    return max(R_norm, abs(d[q]))


@njit(cache=True)
def _delete_constraint(R, J, A, u, n, p, q, l):
    """Remove active constraint with slot index l (an inequality, l >= p)."""
    qq = -1
    for i in range(p, q):
        if A[i] == l:
            qq = i
            break
    if qq < 0:
        return q  # not active; nothing to do
    for i in range(qq, q - 1):
        A[i] = A[i + 1]
        u[i] = u[i + 1]
        for j in range(q):
            R[j, i] = R[j, i + 1]
    A[q - 1] = A[q]
    u[q - 1] = u[q]
    A[q] = 0
    u[q] = 0.0
    for j in range(q):
        R[j, q - 1] = 0.0
    q = q - 1
    for j in range(qq, q):
        cc = R[j, j]
        ss = R[j + 1, j]
        h = _distance(cc, ss)
        if h == 0.0:
            continue
        cc = cc / h
        ss = ss / h
        R[j + 1, j] = 0.0
        if cc < 0.0:
            R[j, j] = -h
            cc = -cc
            ss = -ss
        else:
            R[j, j] = h
        xny = ss / (1.0 + cc)
        for k in range(j + 1, q):
            t1 = R[j, k]
            t2 = R[j + 1, k]
            R[j, k] = t1 * cc + t2 * ss
            R[j + 1, k] = xny * (t1 + R[j, k]) - t2
        for k in range(n):
            t1 = J[k, j]
            t2 = J[k, j + 1]
            J[k, j] = t1 * cc + t2 * ss
            J[k, j + 1] = xny * (t1 + J[k, j]) - t2
    return q


@njit(cache=True)
def _compute_step_direction(J, R, np_vec, d, z, r, n, q):
    """d = J^T n+, z = J_2 d_2 (primal step), r = R^{-1} d_1 (dual step)."""
    for i in range(n):
        acc = 0.0
        for k in range(n):
            acc += J[k, i] * np_vec[k]
        d[i] = acc
    for i in range(n):
        acc = 0.0
        for j in range(q, n):
            acc += J[i, j] * d[j]
        z[i] = acc
    for i in range(q - 1, -1, -1):
        acc = d[i]
        for k in range(i + 1, q):
            acc -= R[i, k] * r[k]
        r[i] = acc / R[i, i] if R[i, i] != 0.0 else 0.0


@njit(cache=True)
def gi_solve(G, a, CE, be, CI, bi, x, u, L, J, R, d, z, r, np_vec, A, s,
             max_iter):
    """Dual active-set solve of min 1/2 x^T G x + a^T x, CE x = be, CI x >= bi.

    All buffers are caller-owned: x (n), u (n+1), L/J/R (n,n), d/z/r/np_vec (n),
    A (n+1) int64 active slots, s (m) slacks. Returns (status, q, iters); the
    multipliers of the final active set live in u[:q] with slots in A[:q]
    (equalities first, then inequality row indices).
    """
    n = G.shape[0]
    p = CE.shape[0]
    m = CI.shape[0]

    if not _cholesky_lower(G, L, n):
        return NOT_POSITIVE_DEFINITE, 0, 0
    _unconstrained_min(L, a, x, n)
    _inverse_transpose_chol(L, J, n)

    # conditioning-scaled tolerances, in the spirit of trace-based scaling
    c1 = 0.0
    c2 = 0.0
    for i in range(n):
        c1 += G[i, i]
        c2 += J[i, i]
    tol = 100.0 * _EPS * (1.0 + abs(c1) / n * abs(c2) / n)

    R_norm = 1.0
    q = 0
    for i in range(n + 1):
        A[i] = 0
        u[i] = 0.0
    iters = 0

    # phase 1: equalities, never released
    for ie in range(p):
        for k in range(n):
            np_vec[k] = CE[ie, k]
        _compute_step_direction(J, R, np_vec, d, z, r, n, q)
        z2 = 0.0
        for k in range(n):
            z2 += z[k] * z[k]
        resid = -be[ie]
        for k in range(n):
            resid += np_vec[k] * x[k]
        if z2 <= tol * tol:
            # normal lies in the span of the active set; consistent only if satisfied
            if abs(resid) > 1e-9:
                return INFEASIBLE, q, iters
            t2 = 0.0
        else:
            zn = 0.0
            for k in range(n):
                zn += z[k] * np_vec[k]
            t2 = -resid / zn
        for k in range(n):
            x[k] += t2 * z[k]
        for k in range(q):
            u[k] -= t2 * r[k]
        u[q] = t2
        R_norm = _add_constraint(R, J, d, n, q, R_norm)
        if R_norm < 0.0:
            return DEGENERATE, q, iters
        A[q] = -(ie + 1)  # negative slots mark equalities
        q += 1

    # phase 2: inequalities
    while True:
        iters += 1
        if iters > max_iter:
            return DEGENERATE, q, iters
        # most violated inactive constraint
        ip = -1
        worst = -tol - 1e-11
        for i in range(m):
            acc = -bi[i]
            for k in range(n):
                acc += CI[i, k] * x[k]
            s[i] = acc
        for i in range(m):
            active = False
            for k in range(p, q):
                if A[k] == i:
                    active = True
                    break
            if not active and s[i] < worst:
                worst = s[i]
                ip = i
        if ip < 0:
            return OPTIMAL, q, iters

        for k in range(n):
            np_vec[k] = CI[ip, k]
        u[q] = 0.0

        while True:
            iters += 1
            if iters > max_iter:
                return DEGENERATE, q, iters
            _compute_step_direction(J, R, np_vec, d, z, r, n, q)
            # partial step length (inequality actives only)
            t1 = np.inf
            l = -1
            for k in range(p, q):
                if r[k] > 0.0 and u[k] / r[k] < t1:
                    t1 = u[k] / r[k]
                    l = A[k]
            z2 = 0.0
            for k in range(n):
                z2 += z[k] * z[k]
            if z2 > tol * tol:
                zn = 0.0
                for k in range(n):
                    zn += z[k] * np_vec[k]
                t2 = -s[ip] / zn if zn > 0.0 else np.inf
            else:
                t2 = np.inf
            t = t1 if t1 < t2 else t2

            if not np.isfinite(t):
                return INFEASIBLE, q, iters  # dual unbounded

            if not np.isfinite(t2):
                # dual-only step: shrink multipliers, drop the blocking constraint
                for k in range(q):
                    u[k] -= t * r[k]
                u[q] += t
                q = _delete_constraint(R, J, A, u, n, p, q, l)
                continue

            for k in range(n):
                x[k] += t * z[k]
            for k in range(q):
                u[k] -= t * r[k]
            u[q] += t
            zn = 0.0
            for k in range(n):
                zn += z[k] * np_vec[k]
            s[ip] += t * zn

            if t == t2:
                R_norm = _add_constraint(R, J, d, n, q, R_norm)
                if R_norm < 0.0:
                    return DEGENERATE, q, iters
                A[q] = ip
                q += 1
                break  # back to violation scan
            # partial step: drop blocker, keep driving the same constraint
            q = _delete_constraint(R, J, A, u, n, p, q, l)

    return DEGENERATE, q, iters


@njit(cache=True)
def foh_terminal_weights(nodes, omega, m_out, w1, w2):
    """Exact terminal map of the piecewise-linear input on the given nodes.

    x1(T) = m_out[0] x1(0) + w1 . u_nodes, x2(T) = m_out[1] x2(0) + w2 . u_nodes,
    built by forward accumulation of per-segment closed forms (expm1-based so
    short segments keep full precision).
    """
    P = nodes.shape[0]
    for k in range(P):
        w1[k] = 0.0
        w2[k] = 0.0
    m1 = 1.0
    m2 = 1.0
    for k in range(P - 1):
        h = omega * (nodes[k + 1] - nodes[k])
        E = np.exp(h)
        F = np.exp(-h)
        r = np.expm1(h) / h
        rm = -np.expm1(-h) / h
        m1 *= E
        m2 *= F
        for i in range(k + 1):
            w1[i] *= E
            w2[i] *= F
        w1[k] += r - E
        w1[k + 1] += 1.0 - r
        w2[k] += F - rm
        w2[k + 1] += rm - 1.0
    m_out[0] = m1
    m_out[1] = m2


@njit(cache=True)
def solve_foh_reach(x0, xf, T, P, extra_x, extra_y, omega,
                    um_x, uM_x, um_y, uM_y,
                    nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
                    x, u, L, J, R, d, z, r, np_vec, A, s, max_iter):
    """Transcribe the planar reach problem at horizon T and solve it in place.

    Each extra marks an input discontinuity: the continuous piecewise-linear
    plan cannot jump, so a pair of nodes (e, e + delta) is inserted to ramp
    across within a sliver. Pass a negative extra to skip it; nodes landing
    within the minimum segment duration of an existing node are dropped.
    Buffers must be sized for P + 4 nodes. Returns (gi_solve status code,
    node count actually used); on success the plan values sit in x[:2 Pn]
    and the grid in nodes[:Pn].

    x0, xf: (2, 2) axis-major boundary states. Bounds are per axis.
    """
    for i in range(P):
        nodes[i] = T * i / (P - 1.0)
    nodes[P - 1] = T
    Pn = P
    min_gap = 1e-6 * T
    delta = 3.0 * min_gap
    for e0 in (extra_x, extra_y):
        for e in (e0, e0 + delta):
            if e0 < 0.0:
                continue
            if e <= min_gap or e >= T - min_gap:
                continue
            pos = 0
            while pos < Pn and nodes[pos] < e:
                pos += 1
            if pos > 0 and e - nodes[pos - 1] < min_gap:
                continue
            if pos < Pn and nodes[pos] - e < min_gap:
                continue
            for j in range(Pn, pos, -1):
                nodes[j] = nodes[j - 1]
            nodes[pos] = e
            Pn += 1

    foh_terminal_weights(nodes[:Pn], omega, m_out, w1[:Pn], w2[:Pn])

    n = 2 * Pn
    for i in range(n):
        avec[i] = 0.0
        for j in range(n):
            G[i, j] = 0.0
    for axis in range(2):
        off = axis * Pn
        for k in range(Pn - 1):
            dk = nodes[k + 1] - nodes[k]
            G[off + k, off + k] += 2.0 / 3.0 * dk
            G[off + k + 1, off + k + 1] += 2.0 / 3.0 * dk
            G[off + k, off + k + 1] += dk / 3.0
            G[off + k + 1, off + k] += dk / 3.0

    for i in range(4):
        for j in range(n):
            CE[i, j] = 0.0
    for axis in range(2):
        off = axis * Pn
        for k in range(Pn):
            CE[2 * axis, off + k] = w1[k]
            CE[2 * axis + 1, off + k] = w2[k]
        be[2 * axis] = xf[axis, 0] - m_out[0] * x0[axis, 0]
        be[2 * axis + 1] = xf[axis, 1] - m_out[1] * x0[axis, 1]
    for i in range(4):
        nrm = 0.0
        for j in range(n):
            nrm += CE[i, j] * CE[i, j]
        nrm = np.sqrt(nrm)
        for j in range(n):
            CE[i, j] /= nrm
        be[i] /= nrm

    m_rows = 2 * n
    for i in range(m_rows):
        for j in range(n):
            CI[i, j] = 0.0
    row = 0
    for axis in range(2):
        lo = um_x if axis == 0 else um_y
        hi = uM_x if axis == 0 else uM_y
        off = axis * Pn
        for k in range(Pn):
            CI[row, off + k] = 1.0
            bi[row] = lo
            row += 1
            CI[row, off + k] = -1.0
            bi[row] = -hi
            row += 1

    status, q, iters = gi_solve(
        G[:n, :n], avec[:n], CE[:, :n], be, CI[:m_rows, :n], bi[:m_rows],
        x[:n], u[:n + 1], L[:n, :n], J[:n, :n], R[:n, :n],
        d[:n], z[:n], r[:n], np_vec[:n], A[:n + 1], s[:m_rows], max_iter)
    return status, Pn


@njit(cache=True)
def foh_simulate_nodes(nodes, values, x1_0, x2_0, omega, out_x1, out_x2):
    """Exact state at every node under the piecewise-linear input."""
    P = nodes.shape[0]
    x1 = x1_0
    x2 = x2_0
    out_x1[0] = x1
    out_x2[0] = x2
    for k in range(P - 1):
        h = omega * (nodes[k + 1] - nodes[k])
        E = np.exp(h)
        F = np.exp(-h)
        r = np.expm1(h) / h
        rm = -np.expm1(-h) / h
        x1 = E * x1 + (r - E) * values[k] + (1.0 - r) * values[k + 1]
        x2 = F * x2 + (F - rm) * values[k] + (rm - 1.0) * values[k + 1]
        out_x1[k + 1] = x1
        out_x2[k + 1] = x2


@njit(cache=True)
def _arc_violation_at(s, T, omega, x01, x02, xf1, xf2, u_lo, u_hi):
    """Box violation of the free-level two-arc plan switching at s."""
    es = np.exp(omega * s)
    eTs = np.exp(omega * (T - s))
    b11 = (1.0 - es) * eTs
    b12 = 1.0 - eTs
    fs = 1.0 / es
    fTs = 1.0 / eTs
    b21 = (fs - 1.0) * fTs
    b22 = fTs - 1.0
    r1 = xf1 - es * eTs * x01
    r2 = xf2 - fs * fTs * x02
    det = b11 * b22 - b12 * b21
    if abs(det) < 1e-300:
        return np.inf
    v1 = (r1 * b22 - b12 * r2) / det
    v2 = (b11 * r2 - b21 * r1) / det
    viol = 0.0
    if u_lo - v1 > viol:
        viol = u_lo - v1
    if v1 - u_hi > viol:
        viol = v1 - u_hi
    if u_lo - v2 > viol:
        viol = u_lo - v2
    if v2 - u_hi > viol:
        viol = v2 - u_hi
    return viol


@njit(cache=True)
def arc_min_violation(T, omega, x01, x02, xf1, xf2, u_lo, u_hi):
    """Smallest box violation over all free-level one-switch plans on [0, T].

    Coarse grid over the switch time then golden-section refinement around
    the best cell. Returns (violation, switch time); a violation of zero
    means some one-switch plan with levels inside the box does the transfer.
    """
    n_coarse = 33
    best = np.inf
    s_best = 0.0
    for i in range(n_coarse):
        s = T * i / (n_coarse - 1.0)
        v = _arc_violation_at(s, T, omega, x01, x02, xf1, xf2, u_lo, u_hi)
        if v < best:
            best = v
            s_best = s
    step = T / (n_coarse - 1.0)
    lo = s_best - step
    hi = s_best + step
    if lo < 0.0:
        lo = 0.0
    if hi > T:
        hi = T
    gr = 0.6180339887498949
    c = hi - gr * (hi - lo)
    d = lo + gr * (hi - lo)
    fc = _arc_violation_at(c, T, omega, x01, x02, xf1, xf2, u_lo, u_hi)
    fd = _arc_violation_at(d, T, omega, x01, x02, xf1, xf2, u_lo, u_hi)
    for _ in range(60):
        if fc < fd:
            hi = d
            d = c
            fd = fc
            c = hi - gr * (hi - lo)
            fc = _arc_violation_at(c, T, omega, x01, x02, xf1, xf2, u_lo, u_hi)
        else:
            lo = c
            c = d
            fc = fd
            d = lo + gr * (hi - lo)
            fd = _arc_violation_at(d, T, omega, x01, x02, xf1, xf2, u_lo, u_hi)
        if fc < best:
            best = fc
            s_best = c
        if fd < best:
            best = fd
            s_best = d
    return best, s_best


# free-level one-switch candidates within this box violation get a QP retry
ARC_PRESOLVE_TOL = 1e-9


@njit(cache=True)
def certified_reach(x0, xf, T, P, omega, um_x, uM_x, um_y, uM_y,
                    nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
                    x, u, L, J, R, d, z, r, np_vec, A, s, max_iter):
    """solve_foh_reach with the adapted-grid retry folded in.

    A uniform-grid infeasibility may be interpolation conservatism rather
    than a true certificate. When the free-level one-switch presolve finds a
    box-respecting plan on either axis, the QP is re-solved once with node
    pairs at the switch times; the retry's verdict is final. Same buffers,
    same status codes, no allocation.
    """
    status, pn = solve_foh_reach(
        x0, xf, T, P, -1.0, -1.0, omega, um_x, uM_x, um_y, uM_y,
        nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
        x, u, L, J, R, d, z, r, np_vec, A, s, max_iter)
    if status != INFEASIBLE:
        return status, pn
    vx, sx = arc_min_violation(T, omega, x0[0, 0], x0[0, 1],
                               xf[0, 0], xf[0, 1], um_x, uM_x)
    if vx > ARC_PRESOLVE_TOL:
        return INFEASIBLE, pn
    vy, sy = arc_min_violation(T, omega, x0[1, 0], x0[1, 1],
                               xf[1, 0], xf[1, 1], um_y, uM_y)
    if vy > ARC_PRESOLVE_TOL:
        return INFEASIBLE, pn
    return solve_foh_reach(
        x0, xf, T, P, sx, sy, omega, um_x, uM_x, um_y, uM_y,
        nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
        x, u, L, J, R, d, z, r, np_vec, A, s, max_iter)


REPLAN_OK = 0
REPLAN_GUESS_INFEASIBLE = 1
REPLAN_NUMERIC_ERROR = 2


@njit(cache=True)
def replan_bisect(x0, xf, t_target, t_guess, max_iters, min_horizon,
                  P, omega, um_x, uM_x, um_y, uM_y,
                  nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
                  x, u, L, J, R, d, z, r, np_vec, A, s, max_iter):
    """Project the target horizon onto the feasible set by bisection.

    Target first: one solve and done when the request is feasible. Otherwise
    the guess anchors the feasible end of the bracket. Before bisecting, a
    probe one final-bracket-width from the guess toward the target detects a
    warm start that is already tight (the recursive tick-to-tick case), so a
    repeated request costs one solve beyond the two checks instead of a full
    bisection. On success the winning plan sits in the buffers.

    Returns (code, t_star, target_ok, iters, qp_calls, node count).
    """
    tt = t_target if t_target > min_horizon else min_horizon
    tg = t_guess if t_guess > min_horizon else min_horizon

    st, pn = certified_reach(x0, xf, tt, P, omega, um_x, uM_x, um_y, uM_y,
                             nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
                             x, u, L, J, R, d, z, r, np_vec, A, s, max_iter)
    calls = 1
    if st == OPTIMAL:
        return REPLAN_OK, tt, True, 0, calls, pn
    if st != INFEASIBLE:
        return REPLAN_NUMERIC_ERROR, tt, False, 0, calls, pn
    if tg == tt:
        return REPLAN_GUESS_INFEASIBLE, tg, False, 0, calls, pn

    slack = abs(tg - tt) * 0.5 ** max_iters
    probe = tg + (slack if tt > tg else -slack)
    st, pn = certified_reach(x0, xf, probe, P, omega, um_x, uM_x, um_y, uM_y,
                             nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
                             x, u, L, J, R, d, z, r, np_vec, A, s, max_iter)
    calls += 1
    if st == INFEASIBLE:
        # tight or invalid warm start; one more solve settles which
        st, pn = certified_reach(x0, xf, tg, P, omega, um_x, uM_x, um_y, uM_y,
                                 nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
                                 x, u, L, J, R, d, z, r, np_vec, A, s, max_iter)
        calls += 1
        if st == OPTIMAL:
            return REPLAN_OK, tg, False, 0, calls, pn
        if st == INFEASIBLE:
            return REPLAN_GUESS_INFEASIBLE, tg, False, 0, calls, pn
        return REPLAN_NUMERIC_ERROR, tg, False, 0, calls, pn
    if st != OPTIMAL:
        return REPLAN_NUMERIC_ERROR, probe, False, 0, calls, pn

    feas = probe
    infeas = tt
    pn_feas = pn
    last_was_feas = True
    for _ in range(max_iters):
        mid = 0.5 * (feas + infeas)
        st, pn = certified_reach(x0, xf, mid, P, omega, um_x, uM_x, um_y, uM_y,
                                 nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
                                 x, u, L, J, R, d, z, r, np_vec, A, s, max_iter)
        calls += 1
        if st == OPTIMAL:
            feas = mid
            pn_feas = pn
            last_was_feas = True
        elif st == INFEASIBLE:
            infeas = mid
            last_was_feas = False
        else:
            return REPLAN_NUMERIC_ERROR, mid, False, 0, calls, pn
    if not last_was_feas:
        # deterministic re-solve restores the feasible endpoint's plan
        st, pn_feas = certified_reach(x0, xf, feas, P, omega,
                                      um_x, uM_x, um_y, uM_y,
                                      nodes, w1, w2, m_out, G, avec,
                                      CE, be, CI, bi, x, u, L, J, R,
                                      d, z, r, np_vec, A, s, max_iter)
        calls += 1
        if st != OPTIMAL:
            return REPLAN_NUMERIC_ERROR, feas, False, max_iters, calls, pn_feas
    return REPLAN_OK, feas, False, max_iters, calls, pn_feas
