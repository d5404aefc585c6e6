"""Independent oracles the library must agree with.

Nothing in here calls back into lipstep's closed forms for the quantity under
test: propagation is checked against an adaptive ODE integrator, reachability
against a support-function computation of the convex reachable set, and
minimum time against brute-force enumeration of one-switch controls.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp


def rk_propagate(x1: float, x2: float, u: float, dt: float, omega: float) -> tuple[float, float]:
    """Integrate x1' = w(x1-u), x2' = w(-x2-u) with DOP853 at tight tolerance."""

    def rhs(_t, y):
        return [omega * (y[0] - u), omega * (-y[1] - u)]

    sol = solve_ivp(rhs, (0.0, dt), [x1, x2], method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=False)
    assert sol.success
    return sol.y[0, -1], sol.y[1, -1]


def support_gap(x0, xf, T: float, omega: float, u_m: float, u_M: float,
                n_dir: int = 4096) -> float:
    """min over directions eta of [h_Reach(T)(eta) - eta . xf].

    Nonnegative iff xf lies in the set reachable from x0 at time T (up to
    direction resolution; the set is convex). With tau = T - s the adjoint
    weight on u is sigma(tau) = -omega (eta1 e^{omega tau} + eta2 e^{-omega tau}),
    which has at most one sign change, so each directional maximizer is a
    one-switch bang-bang control and the u-integral splits into at most two
    pieces with a constant-sign weight, integrated in closed form.
    """
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)

    def weight_integral(ta: float, tb: float, e1: float, e2: float) -> float:
        # integral of sigma over [ta, tb]
        return -(e1 * (math.exp(omega * tb) - math.exp(omega * ta))
                 + e2 * (math.exp(-omega * ta) - math.exp(-omega * tb)))

    best = np.inf
    for k in range(n_dir):
        th = 2.0 * math.pi * (k + 0.5) / n_dir
        e1, e2 = math.cos(th), math.sin(th)
        h = e1 * math.exp(omega * T) * x0[0] + e2 * math.exp(-omega * T) * x0[1]
        # sigma's sign change: e^{2 omega tau} = -e2/e1
        taus = [0.0, T]
        if e1 != 0.0 and -e2 / e1 > 0.0:
            ts = math.log(-e2 / e1) / (2.0 * omega)
            if 0.0 < ts < T:
                taus = [0.0, ts, T]
        for a, b in zip(taus[:-1], taus[1:]):
            seg = weight_integral(a, b, e1, e2)  # constant-sign weight on this piece
            h += (u_M if seg > 0 else u_m) * seg
        gap = h - (e1 * xf[0] + e2 * xf[1])
        if gap < best:
            best = gap
    return best


def support_feasible(x0, xf, T: float, omega: float, u_m: float, u_M: float,
                     tol: float = 1e-9) -> bool:
    return support_gap(x0, xf, T, omega, u_m, u_M) >= -tol


def brute_min_time(x0, xf, omega: float, u_m: float, u_M: float,
                   t_max: float = 8.0, n: int = 3000, match_tol: float = 8e-3):
    """Smallest total time of a one-switch bang-bang steering x0 near xf.

    Grid enumeration over (first value, switch time, total time); None when
    nothing lands within match_tol. Resolution-limited by construction.
    """
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    ts = np.linspace(0.0, t_max, n + 1)
    best = None
    for u1, u2 in ((u_m, u_M), (u_M, u_m), (u_m, u_m), (u_M, u_M)):
        e = np.exp(omega * ts)
        # state after first arc of duration a, all a at once
        y1 = e * x0[0] + (1 - e) * u1
        y2 = x0[1] / e + (1 / e - 1) * u1
        for i, a in enumerate(ts):
            if best is not None and a >= best:
                break
            rem = ts[ts + a <= t_max + 1e-12]
            e2v = np.exp(omega * rem)
            z1 = e2v * y1[i] + (1 - e2v) * u2
            z2 = y2[i] / e2v + (1 / e2v - 1) * u2
            err = np.hypot(z1 - xf[0], z2 - xf[1])
            j = int(np.argmin(err))
            if err[j] <= match_tol:
                t = a + rem[j]
                if best is None or t < best:
                    best = t
    return best
