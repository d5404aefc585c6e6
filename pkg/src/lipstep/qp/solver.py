"""Solver wrapper around the dual active-set kernel, plus feasibility checks.

DualActiveSetSolver owns every buffer the kernel touches, sized once at
construction, so repeated solves of same-shape problems allocate nothing on
the hot path. The module-level solve_qp is the convenient one-shot entry
that sizes a solver to the problem at hand.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lip_core import ControlBounds, PendulumParams
from . import kernel
from .kernel import foh_simulate_nodes, gi_solve
from .transcription import (FohPlan, QpOutcome, QpProblem, foh_transcribe,
                            plan_from_solution)

# a feasible plan must reproduce the requested terminal pair this tightly;
# a violation means the solver or transcription is broken, not the problem
TERMINAL_CHECK_TOL = 1e-7


class NotPositiveDefiniteError(ValueError):
    """Hessian failed its Cholesky factorization; not an infeasibility verdict."""


class QpNumericsError(RuntimeError):
    """Active-set cycling or a degenerate factorization update."""


@dataclass(frozen=True)
class QpSolution:
    """Primal-dual solution with objective value and active-set diagnostics.

    status is "optimal" or "infeasible"; the remaining fields are None when
    infeasible. active_set holds inequality row indices active at the
    solution; multipliers satisfy G z + a = C_E^T lam_eq + C_I^T lam_ineq
    with lam_ineq >= 0 supported on the active set.
    """

    status: str
    z: np.ndarray | None
    cost: float | None
    iterations: int
    active_set: np.ndarray | None
    eq_multipliers: np.ndarray | None = None
    ineq_multipliers: np.ndarray | None = None


class DualActiveSetSolver:
    """Reusable solver for dense strictly convex QPs up to a fixed size."""

    def __init__(self, max_vars: int, max_ineq: int, max_iter: int | None = None):
        n = int(max_vars)
        m = int(max_ineq)
        self.max_vars = n
        self.max_ineq = m
        self.max_iter = max_iter if max_iter is not None else 50 * (n + m + 1)
        self._x = np.empty(n)
        self._u = np.empty(n + 1)
        self._L = np.empty((n, n))
        self._J = np.empty((n, n))
        self._R = np.empty((n, n))
        self._d = np.empty(n)
        self._z = np.empty(n)
        self._r = np.empty(n)
        self._np = np.empty(n)
        self._A = np.empty(n + 1, dtype=np.int64)
        self._s = np.empty(max(m, 1))

    def solve(self, problem: QpProblem) -> QpSolution:
        n = problem.G.shape[0]
        m = problem.C_I.shape[0]
        p = problem.C_E.shape[0]
        if n > self.max_vars or m > self.max_ineq:
            raise ValueError(
                f"problem size ({n} vars, {m} inequalities) exceeds workspace "
                f"({self.max_vars}, {self.max_ineq})")
        G = np.ascontiguousarray(problem.G, dtype=np.float64)
        a = np.ascontiguousarray(problem.a, dtype=np.float64)
        CE = np.ascontiguousarray(problem.C_E, dtype=np.float64)
        be = np.ascontiguousarray(problem.b_E, dtype=np.float64)
        CI = np.ascontiguousarray(problem.C_I, dtype=np.float64)
        bi = np.ascontiguousarray(problem.b_I, dtype=np.float64)

        status, q, iters = gi_solve(
            G, a, CE, be, CI, bi,
            self._x[:n], self._u[:n + 1], self._L[:n, :n], self._J[:n, :n],
            self._R[:n, :n], self._d[:n], self._z[:n], self._r[:n],
            self._np[:n], self._A[:n + 1], self._s[:max(m, 1)],
            self.max_iter)

        if status == kernel.NOT_POSITIVE_DEFINITE:
            raise NotPositiveDefiniteError(
                "Hessian is not positive definite; refusing to report on feasibility")
        if status == kernel.DEGENERATE:
            raise QpNumericsError(
                f"active-set iteration failed after {iters} steps "
                f"({n} vars, {p} eq, {m} ineq)")
        if status == kernel.INFEASIBLE:
            return QpSolution(status="infeasible", z=None, cost=None,
                              iterations=iters, active_set=None)
        z = self._x[:n].copy()
        cost = 0.5 * float(z @ problem.G @ z) + float(problem.a @ z)
        lam_eq = np.zeros(p)
        lam_ineq = np.zeros(m)
        for k in range(q):
            slot = int(self._A[k])
            if slot < 0:
                lam_eq[-slot - 1] = self._u[k]
            else:
                lam_ineq[slot] = self._u[k]
        act = np.array(sorted(int(i) for i in self._A[:q] if i >= 0),
                       dtype=np.int64)
        return QpSolution(status="optimal", z=z, cost=cost,
                          iterations=iters, active_set=act,
                          eq_multipliers=lam_eq, ineq_multipliers=lam_ineq)


def solve_qp(problem: QpProblem, max_iter: int | None = None) -> QpSolution:
    """One-shot solve; sizes a fresh workspace to the problem."""
    solver = DualActiveSetSolver(problem.G.shape[0], problem.C_I.shape[0],
                                 max_iter=max_iter)
    return solver.solve(problem)


class ReachWorkspace:
    """Buffers for the jitted transcribe-and-solve path at P uniform nodes.

    One instance owns everything kernel.solve_foh_reach touches (sized for
    up to two doubled adapted nodes, so P + 4), so repeated feasibility
    queries allocate nothing. Not thread-safe; use one instance per worker.
    """

    def __init__(self, P: int = 8):
        if P < 2:
            raise ValueError(f"need at least 2 nodes, got {P}")
        self.P = P
        cap = P + 4
        n = 2 * cap
        m = 2 * n
        self._nodes = np.empty(cap)
        self._w1 = np.empty(cap)
        self._w2 = np.empty(cap)
        self._m_out = np.empty(2)
        self._G = np.empty((n, n))
        self._a = np.empty(n)
        self._CE = np.empty((4, n))
        self._be = np.empty(4)
        self._CI = np.empty((m, n))
        self._bi = np.empty(m)
        self._x = np.empty(n)
        self._u = np.empty(n + 1)
        self._L = np.empty((n, n))
        self._J = np.empty((n, n))
        self._R = np.empty((n, n))
        self._d = np.empty(n)
        self._z = np.empty(n)
        self._r = np.empty(n)
        self._np = np.empty(n)
        self._A = np.empty(n + 1, dtype=np.int64)
        self._s = np.empty(m)
        self._x0 = np.empty((2, 2))
        self._xf = np.empty((2, 2))
        self.max_iter = 50 * (n + m + 1)
        self._last_pn = 0

    def kernel_buffers(self):
        """Workspace arrays in kernel argument order, for direct jit calls.

        Callers running the kernel inside their own jitted loops unpack
        this instead of restating the buffer list.
        """
        return (self._nodes, self._w1, self._w2, self._m_out, self._G,
                self._a, self._CE, self._be, self._CI, self._bi,
                self._x, self._u, self._L, self._J, self._R, self._d,
                self._z, self._r, self._np, self._A, self._s, self.max_iter)

    def feasible(self, x0_2d, xf_2d, T: float,
                 bounds2d: tuple[ControlBounds, ControlBounds],
                 params: PendulumParams,
                 extra_x: float = -1.0, extra_y: float = -1.0) -> bool:
        """One transcribe-and-solve round trip; extras add adapted node pairs."""
        self._x0[:] = x0_2d
        self._xf[:] = xf_2d
        status, pn = kernel.solve_foh_reach(
            self._x0, self._xf, float(T), self.P, float(extra_x), float(extra_y),
            params.omega, bounds2d[0].u_m, bounds2d[0].u_M,
            bounds2d[1].u_m, bounds2d[1].u_M,
            self._nodes, self._w1, self._w2, self._m_out,
            self._G, self._a, self._CE, self._be, self._CI, self._bi,
            self._x, self._u, self._L, self._J, self._R,
            self._d, self._z, self._r, self._np, self._A, self._s,
            self.max_iter)
        return self._digest(status, pn, T)

    def certified(self, x0_2d, xf_2d, T: float,
                  bounds2d: tuple[ControlBounds, ControlBounds],
                  params: PendulumParams) -> bool:
        """Feasibility with the one-switch presolve and adapted-grid retry."""
        self._x0[:] = x0_2d
        self._xf[:] = xf_2d
        status, pn = kernel.certified_reach(
            self._x0, self._xf, float(T), self.P,
            params.omega, bounds2d[0].u_m, bounds2d[0].u_M,
            bounds2d[1].u_m, bounds2d[1].u_M,
            self._nodes, self._w1, self._w2, self._m_out,
            self._G, self._a, self._CE, self._be, self._CI, self._bi,
            self._x, self._u, self._L, self._J, self._R,
            self._d, self._z, self._r, self._np, self._A, self._s,
            self.max_iter)
        return self._digest(status, pn, T)

    def replan(self, x0_2d, xf_2d, t_target: float, t_guess: float,
               max_iters: int, min_horizon: float,
               bounds2d: tuple[ControlBounds, ControlBounds],
               params: PendulumParams) -> tuple[int, float, bool, int, int]:
        """Bisection projection of t_target onto the feasible horizons.

        Returns (code, t_star, target_was_feasible, iterations, qp_calls);
        on the ok code last_plan() yields the plan at t_star.
        """
        self._x0[:] = x0_2d
        self._xf[:] = xf_2d
        code, t_star, target_ok, iters, calls, pn = kernel.replan_bisect(
            self._x0, self._xf, float(t_target), float(t_guess),
            int(max_iters), float(min_horizon), self.P,
            params.omega, bounds2d[0].u_m, bounds2d[0].u_M,
            bounds2d[1].u_m, bounds2d[1].u_M,
            self._nodes, self._w1, self._w2, self._m_out,
            self._G, self._a, self._CE, self._be, self._CI, self._bi,
            self._x, self._u, self._L, self._J, self._R,
            self._d, self._z, self._r, self._np, self._A, self._s,
            self.max_iter)
        if code == kernel.REPLAN_NUMERIC_ERROR:
            raise QpNumericsError(
                f"replan solve broke down near T={t_star:.6g}")
        if code == kernel.REPLAN_OK:
            self._last_pn = pn
        return code, t_star, bool(target_ok), iters, calls

    def _digest(self, status: int, pn: int, T: float) -> bool:
        if status == kernel.NOT_POSITIVE_DEFINITE:
            raise NotPositiveDefiniteError("reach transcription Hessian broke down")
        if status == kernel.DEGENERATE:
            raise QpNumericsError(f"active-set failure at T={T}")
        self._last_pn = pn
        return status == kernel.OPTIMAL

    def last_plan(self) -> FohPlan:
        """Plan from the most recent feasible solve; copies out of the buffers."""
        pn = self._last_pn
        if pn == 0:
            raise RuntimeError("no feasible solve has been run yet")
        return FohPlan(nodes=self._nodes[:pn].copy(),
                       values_x=self._x[:pn].copy(),
                       values_y=self._x[pn:2 * pn].copy())


def check_feasible(x0_2d, xf_2d, T: float, P: int,
                   bounds2d: tuple[ControlBounds, ControlBounds],
                   params: PendulumParams,
                   node_spacing="uniform",
                   solver: DualActiveSetSolver | None = None) -> QpOutcome:
    """Can some FOH plan on P nodes steer x0 to xf in exactly time T?

    On the feasible verdict the minimum-effort plan is returned after being
    re-simulated through the exact segment maps; the reproduced terminal pair
    must match the request to TERMINAL_CHECK_TOL on every component (scaled
    by the state magnitude), which guards the solver and the transcription
    against each other.
    """
    problem = foh_transcribe(x0_2d, xf_2d, T, P, bounds2d, params,
                             node_spacing=node_spacing)
    sol = solver.solve(problem) if solver is not None else solve_qp(problem)
    if sol.status != "optimal":
        return QpOutcome(feasible=False)
    plan = plan_from_solution(problem, sol.z)
    _verify_terminal(plan, np.asarray(x0_2d, float), np.asarray(xf_2d, float),
                     params)
    return QpOutcome(feasible=True, plan=plan, cost=sol.cost)


def _verify_terminal(plan: FohPlan, x0_2d: np.ndarray, xf_2d: np.ndarray,
                     params: PendulumParams) -> None:
    P = plan.nodes.shape[0]
    out1 = np.empty(P)
    out2 = np.empty(P)
    for axis, values in ((0, plan.values_x), (1, plan.values_y)):
        foh_simulate_nodes(plan.nodes, values, x0_2d[axis, 0], x0_2d[axis, 1],
                           params.omega, out1, out2)
        scale = 1.0 + max(abs(xf_2d[axis, 0]), abs(xf_2d[axis, 1]))
        err = max(abs(out1[-1] - xf_2d[axis, 0]), abs(out2[-1] - xf_2d[axis, 1]))
        if err > TERMINAL_CHECK_TOL * scale:
            raise QpNumericsError(
                f"plan re-simulation missed the terminal state by {err:.3e} "
                f"on axis {axis}")


def simulate_plan(plan: FohPlan, x0_2d, params: PendulumParams) -> np.ndarray:
    """Exact node-by-node states under the plan; shape (2, P, 2), axis-major."""
    x0_2d = np.asarray(x0_2d, dtype=np.float64)
    P = plan.nodes.shape[0]
    out = np.empty((2, P, 2))
    buf1 = np.empty(P)
    buf2 = np.empty(P)
    for axis, values in ((0, plan.values_x), (1, plan.values_y)):
        foh_simulate_nodes(plan.nodes, values, x0_2d[axis, 0], x0_2d[axis, 1],
                           params.omega, buf1, buf2)
        out[axis, :, 0] = buf1
        out[axis, :, 1] = buf2
    return out


def dump_problem(problem: QpProblem, max_rows: int = 40) -> str:
    """Plain-text rendering for debugging: sizes, spectra, and constraint rows."""
    n = problem.G.shape[0]
    p = problem.C_E.shape[0]
    m = problem.C_I.shape[0]
    eigs = np.linalg.eigvalsh(problem.G)
    lines = [
        f"qp: {n} vars, {p} equalities, {m} inequalities",
        f"hessian eigenvalue range: [{eigs[0]:.6e}, {eigs[-1]:.6e}]",
    ]
    if problem.nodes is not None:
        lines.append("nodes: " + " ".join(f"{t:.9g}" for t in problem.nodes))
    for i in range(min(p, max_rows)):
        row = " ".join(f"{v:+.6e}" for v in problem.C_E[i])
        lines.append(f"eq[{i}]: [{row}] = {problem.b_E[i]:+.6e}")
    for i in range(min(m, max_rows)):
        nz = np.nonzero(problem.C_I[i])[0]
        terms = " ".join(f"{problem.C_I[i, j]:+g}*z[{j}]" for j in nz)
        lines.append(f"ineq[{i}]: {terms} >= {problem.b_I[i]:+.6e}")
    if m > max_rows:
        lines.append(f"... {m - max_rows} more inequality rows")
    return "\n".join(lines)
