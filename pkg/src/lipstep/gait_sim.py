"""Synthetic gait, request signals, closed-loop experiments, and benchmarks.

The nominal step is a constant-CoP pendulum gait in support-foot
coordinates: the CoP sits at the foot center, the sagittal CoM crosses the
foot in a sinh arc and the lateral CoM sways in a cosh arc, so each step is
an exact flow of the model. Chaining steps mirrors the world about the
walking axis at every support change, which keeps the nominal boundary
states of every step identical; replanning therefore always projects onto
the same terminal condition.

Three experiments are built on top: a single-step scenario with an
oscillating velocity request and a per-tick feasible-band trace, a
closed-loop success-rate heatmap comparing timing replanning against naive
time rescaling, and a latency benchmark of the replan call. All of them are
deterministic given a seed, and all write fixed-schema CSV plus a JSON
metadata sidecar.
"""
from __future__ import annotations

import gc
import hashlib
import json
import math
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numba import njit

from .lip_core import ControlBounds, PendulumParams
from .qp import kernel
from .qp.kernel import foh_simulate_nodes
from .qp.solver import QpNumericsError, ReachWorkspace
from .qp.transcription import FohPlan
from .replanner import (MIN_HORIZON, InfeasibleGuess, Replanner,
                        ReplanRequest, update_guess)
from .structure import CertifiedFeasibility

SIGNAL_KINDS = ("constant", "sinusoid", "square_wave")

# reduced-model fall proxy: DCM beyond the support polygon inflated by this
# margin, continuously for this window, while the CoP command is pinned at
# a bound; any proxy for a full-body fall is a modeling choice, so both
# knobs are exposed by the experiment entry points
FALL_MARGIN = 0.15
FALL_WINDOW = 0.2

# step commitment: with a state error delta, correcting the terminal miss
# needs roughly 0.1 * (omega T)^2 > delta of control authority, so at tick
# -scale tracking drift the last couple of centiseconds of a step cannot be
# recertified at all; below this multiple of the horizon floor the step is
# committed and ridden to the swap at the patient pace
FINALIZE_FACTOR = 5.0

NAIVE, REPLAN = 0, 1


@dataclass(frozen=True)
class StepConfig:
    """Geometry and timing of the synthetic nominal step.

    step_width is the lateral distance between consecutive footprints; the
    default 0 keeps the lateral axis at its fixed point, which makes the
    stationary-step degenerate cases exact.
    """

    step_length: float = 0.2
    duration: float = 0.9
    com_height: float = 0.9
    foot_length: float = 0.20
    foot_width: float = 0.10
    step_width: float = 0.0
    gravity: float = 9.81
    n_samples: int = 201

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.com_height <= 0.0:
            raise ValueError(f"com_height must be positive, got {self.com_height}")
        if self.gravity <= 0.0:
            raise ValueError(f"gravity must be positive, got {self.gravity}")
        if self.n_samples < 2:
            raise ValueError(f"need at least 2 path samples, got {self.n_samples}")
        if self.step_length < 0.0 or self.step_width < 0.0:
            raise ValueError("step_length and step_width must be nonnegative")


@njit(cache=True)
def _nominal_com(tau, step_len, step_width, T, omega):
    """CoM position and velocity of the nominal step at nominal time tau.

    Support-foot frame, CoP identically at the origin: the sagittal arc is
    odd about mid-stance and the lateral sway is even, so consecutive steps
    chain exactly under the mirror transform.
    """
    half = 0.5 * T
    arg = omega * (tau - half)
    dx = 0.5 * step_len / np.sinh(omega * half)
    cx = dx * np.sinh(arg)
    vx = dx * omega * np.cosh(arg)
    ey = -0.5 * step_width / np.cosh(omega * half)
    cy = ey * np.cosh(arg)
    vy = ey * omega * np.sinh(arg)
    return cx, vx, cy, vy


@dataclass(frozen=True)
class NominalStep:
    """One support phase of the synthetic gait, in support-foot coordinates.

    com_pos and com_vel sample the path on the uniform phase grid; x0_2d
    and xf_2d are the boundary states in diagonal coordinates, axis-major.
    The support polygon is the foot rectangle centered on the origin.
    """

    duration_nom: float
    omega: float
    step_length: float
    step_width: float
    phase: np.ndarray
    com_pos: np.ndarray
    com_vel: np.ndarray
    x0_2d: np.ndarray
    xf_2d: np.ndarray
    support_polygon: tuple[ControlBounds, ControlBounds]

    def state_2d(self, phase: float) -> np.ndarray:
        """Diagonal-coordinate state (2, 2) of the nominal path at a phase."""
        if not 0.0 <= phase <= 1.0:
            raise ValueError(f"phase must lie in [0, 1], got {phase}")
        cx, vx, cy, vy = _nominal_com(phase * self.duration_nom,
                                      self.step_length, self.step_width,
                                      self.duration_nom, self.omega)
        w = self.omega
        return np.array([[cx + vx / w, -cx + vx / w],
                         [cy + vy / w, -cy + vy / w]])


def make_nominal_step(config: StepConfig | None = None) -> NominalStep:
    """Synthesize a model-consistent step from the geometry config.

    The CoP stays at the foot center for the whole phase, so the sampled
    path is an exact flow and the terminal state is reached exactly; a foot
    dimension of zero leaves no CoP interval and is rejected.
    """
    cfg = config if config is not None else StepConfig()
    omega = math.sqrt(cfg.gravity / cfg.com_height)
    bounds_x = ControlBounds(-0.5 * cfg.foot_length, 0.5 * cfg.foot_length)
    bounds_y = ControlBounds(-0.5 * cfg.foot_width, 0.5 * cfg.foot_width)
    for b in (bounds_x, bounds_y):
        if not b.u_m < 0.0 < b.u_M:
            raise ValueError("nominal CoP (foot center) must be interior to "
                             f"the support polygon, got [{b.u_m}, {b.u_M}]")
    phase = np.linspace(0.0, 1.0, cfg.n_samples)
    com_pos = np.empty((2, cfg.n_samples))
    com_vel = np.empty((2, cfg.n_samples))
    for i, s in enumerate(phase):
        cx, vx, cy, vy = _nominal_com(s * cfg.duration, cfg.step_length,
                                      cfg.step_width, cfg.duration, omega)
        com_pos[0, i], com_pos[1, i] = cx, cy
        com_vel[0, i], com_vel[1, i] = vx, vy
    step = NominalStep(
        duration_nom=cfg.duration, omega=omega,
        step_length=cfg.step_length, step_width=cfg.step_width,
        phase=phase, com_pos=com_pos, com_vel=com_vel,
        x0_2d=np.empty((2, 2)), xf_2d=np.empty((2, 2)),
        support_polygon=(bounds_x, bounds_y))
    # boundary states must equal the sampled path ends exactly
    x0 = step.state_2d(0.0)
    xf = step.state_2d(1.0)
    step.x0_2d[:] = x0
    step.xf_2d[:] = xf
    return step


@dataclass(frozen=True)
class VelocitySignal:
    """Patient velocity request as a multiplier of the nominal pace.

    kinds: constant (always magnitude), sinusoid (oscillates between
    2 - magnitude and magnitude around 1), square_wave (magnitude during
    [start, start + duration), 1 elsewhere).
    """

    kind: str
    magnitude: float
    period: float = 0.9
    duration: float = 0.4
    start: float = 0.0

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"kind must be one of {SIGNAL_KINDS}, got {self.kind!r}")
        if self.magnitude <= 0.0:
            raise ValueError(f"magnitude must be positive, got {self.magnitude}")
        if self.kind == "sinusoid":
            if self.period <= 0.0:
                raise ValueError(f"period must be positive, got {self.period}")
            if self.magnitude >= 2.0:
                raise ValueError("sinusoid trough 2 - magnitude must stay "
                                 f"positive, got magnitude {self.magnitude}")
        if self.kind == "square_wave":
            if self.duration < 0.0 or self.start < 0.0:
                raise ValueError("square wave start and duration must be "
                                 "nonnegative")

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return self.magnitude
        if self.kind == "sinusoid":
            return 1.0 + (self.magnitude - 1.0) * math.sin(
                2.0 * math.pi * t / self.period)
        return self.magnitude if self.start <= t < self.start + self.duration \
            else 1.0

    def _encode(self) -> tuple[int, float, float, float, float]:
        return (SIGNAL_KINDS.index(self.kind), self.magnitude, self.period,
                self.duration, self.start)


def fig1_signal(step: NominalStep) -> VelocitySignal:
    """Default oscillating request: plus and minus 50 percent of nominal."""
    return VelocitySignal("sinusoid", 1.5, period=step.duration_nom)


def phase_to_target(step: NominalStep, phase: float,
                    velocity_request: float) -> float:
    """Patient-requested remaining step duration at the current phase."""
    if velocity_request <= 0.0:
        raise ValueError(f"velocity_request must be positive, got {velocity_request}")
    if not 0.0 <= phase < 1.0:
        raise ValueError(f"phase must lie in [0, 1), got {phase}")
    return (1.0 - phase) * step.duration_nom / velocity_request


def dcm_track_control(xi: float, xi_ref: float, xi_ref_dot: float,
                      k_xi: float, params: PendulumParams,
                      bounds: ControlBounds) -> float:
    """Saturated CoP command tracking a DCM reference on one axis.

    Away from saturation the closed-loop error obeys de/dt = -k_xi e. The
    jitted simulation loop inlines this exact law.
    """
    if k_xi <= 0.0:
        raise ValueError(f"k_xi must be positive, got {k_xi}")
    w = params.omega
    u = xi_ref - xi_ref_dot / w + (1.0 + k_xi / w) * (xi - xi_ref)
    return min(max(u, bounds.u_m), bounds.u_M)


@dataclass(frozen=True)
class SimReport:
    """Per-tick record of one simulation run plus its outcome.

    feasible is 1 on ticks where the patient target was honored (or where
    no replanning was attempted: naive mode and step-finalization ticks),
    0 when the replanner clamped or froze. scan_lo and scan_hi are only
    filled by the single-step scenario; t_star is NaN on frozen ticks.
    """

    tick: np.ndarray
    v_request: np.ndarray
    t_target: np.ndarray
    t_star: np.ndarray
    feasible: np.ndarray
    dcm_error: np.ndarray
    cop_x: np.ndarray
    cop_y: np.ndarray
    outcome: str
    fall_time: Optional[float] = None
    scan_lo: Optional[np.ndarray] = None
    scan_hi: Optional[np.ndarray] = None


def _foh_advance(x_2d: np.ndarray, plan: FohPlan, t0: float, dt: float,
                 omega: float) -> np.ndarray:
    """Exact state after riding the plan from plan time t0 to t0 + dt.

    Splits at plan breakpoints so every subinterval sees a linear input;
    beyond the last node the terminal value is held.
    """
    out = np.array(x_2d, dtype=np.float64)
    for axis, values in ((0, plan.values_x), (1, plan.values_y)):
        x1, x2 = out[axis, 0], out[axis, 1]
        cuts = [t0, t0 + dt]
        for node in plan.nodes:
            if t0 < node < t0 + dt:
                cuts.append(float(node))
        cuts.sort()
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b <= a:
                continue
            va = np.interp(a, plan.nodes, values)
            vb = np.interp(b, plan.nodes, values)
            h = omega * (b - a)
            E = np.exp(h)
            F = np.exp(-h)
            r = np.expm1(h) / h
            rm = -np.expm1(-h) / h
            x1 = E * x1 + (r - E) * va + (1.0 - r) * vb
            x2 = F * x2 + (F - rm) * va + (rm - 1.0) * vb
        out[axis, 0], out[axis, 1] = x1, x2
    return out


def _verify_plan(plan: FohPlan, x0_2d: np.ndarray, xf_2d: np.ndarray,
                 omega: float,
                 bounds2d: tuple[ControlBounds, ControlBounds]) -> None:
    """Every emitted plan must stay in the polygon and reach the target."""
    P = plan.nodes.shape[0]
    out1 = np.empty(P)
    out2 = np.empty(P)
    for axis, values in ((0, plan.values_x), (1, plan.values_y)):
        b = bounds2d[axis]
        if values.min() < b.u_m - 1e-9 or values.max() > b.u_M + 1e-9:
            raise QpNumericsError(f"plan leaves the support polygon on axis {axis}")
        foh_simulate_nodes(plan.nodes, values, x0_2d[axis, 0], x0_2d[axis, 1],
                           omega, out1, out2)
        scale = 1.0 + max(abs(xf_2d[axis, 0]), abs(xf_2d[axis, 1]))
        err = max(abs(out1[-1] - xf_2d[axis, 0]), abs(out2[-1] - xf_2d[axis, 1]))
        if err > 1e-7 * scale:
            raise QpNumericsError(
                f"plan misses the terminal state by {err:.3e} on axis {axis}")


def _feasible_band(cf: CertifiedFeasibility, x_2d: np.ndarray,
                   xf_2d: np.ndarray, t_star: float, cap: float,
                   iters: int) -> tuple[float, float]:
    """Refined edges of the feasible run containing t_star, for plotting."""
    floor = 0.01
    if t_star <= floor:
        lo = t_star
    elif cf(x_2d, xf_2d, floor):
        lo = floor
    else:
        bad, good = floor, t_star
        for _ in range(iters):
            mid = 0.5 * (bad + good)
            if cf(x_2d, xf_2d, mid):
                good = mid
            else:
                bad = mid
        lo = 0.5 * (bad + good)
    if t_star >= cap or cf(x_2d, xf_2d, cap):
        hi = cap
    else:
        good, bad = t_star, cap
        for _ in range(iters):
            mid = 0.5 * (good + bad)
            if cf(x_2d, xf_2d, mid):
                good = mid
            else:
                bad = mid
        hi = 0.5 * (good + bad)
    return lo, hi


def run_fig1_scenario(step: NominalStep,
                      signal: VelocitySignal | None = None,
                      tick: float = 1e-3,
                      replanner: Replanner | None = None,
                      scan_cap: float = 10.0,
                      band_iters: int = 10,
                      max_time: float = 8.0) -> SimReport:
    """One step under an oscillating request, replanned every tick.

    The state rides the replanned CoP plan open loop, so the executed pace
    is the replanner's: the phase advances at the patient rate while the
    target stays feasible and at the projected rate otherwise. Each tick
    also emits the refined feasible band around the answer. If the warm
    start itself dies the previous plan is frozen and the run continues,
    flagged infeasible.
    """
    sig = signal if signal is not None else fig1_signal(step)
    params = PendulumParams(step.omega)
    rp = replanner if replanner is not None else Replanner(
        step.support_polygon, params, P=8)
    cf = CertifiedFeasibility(step.support_polygon, params, P=rp.P)
    x = step.x0_2d.copy()
    xf = step.xf_2d
    p = 0.0
    t = 0.0
    guess = step.duration_nom
    plan: FohPlan | None = None
    plan_off = 0.0
    alpha = 1.0
    rows: list[tuple[float, float, float, float, int, float, float, float, float]] = []
    commit = FINALIZE_FACTOR * MIN_HORIZON
    while t < max_time:
        v = sig(t)
        if (1.0 - p) * step.duration_nom <= commit:
            break
        tt = phase_to_target(step, p, v)
        if tt <= commit:
            break
        try:
            res = rp.project_duration(ReplanRequest(x, xf, tt, guess))
            plan = res.plan
            plan_off = 0.0
            _verify_plan(plan, x, xf, step.omega, step.support_polygon)
            t_star = res.t_star
            feas = 1 if res.target_was_feasible else 0
            guess = update_guess(res, tick)
            alpha = v if res.target_was_feasible \
                else (1.0 - p) * step.duration_nom / t_star
            lo, hi = _feasible_band(cf, x, xf, t_star, scan_cap, band_iters)
        except InfeasibleGuess:
            if plan is None:
                raise
            t_star = math.nan
            feas = 0
            lo = hi = math.nan
            guess = max((1.0 - p) * step.duration_nom, MIN_HORIZON)
        ux, uy = plan.value_at(plan_off)
        rows.append((t, v, tt, t_star, feas, ux, uy, lo, hi))
        x = _foh_advance(x, plan, plan_off, tick, step.omega)
        plan_off += tick
        p += tick * alpha / step.duration_nom
        t += tick
    arr = np.array(rows)
    return SimReport(
        tick=arr[:, 0], v_request=arr[:, 1], t_target=arr[:, 2],
        t_star=arr[:, 3], feasible=arr[:, 4].astype(np.int64),
        dcm_error=np.zeros(len(rows)), cop_x=arr[:, 5], cop_y=arr[:, 6],
        outcome="completed", fall_time=None,
        scan_lo=arr[:, 7], scan_hi=arr[:, 8])


@njit(cache=True)
def _closed_loop_jit(mode, n_ticks, tick, T_nom, step_len, step_width, omega,
                     um_x, uM_x, um_y, uM_y,
                     sig_kind, sig_mag, sig_period, sig_dur, sig_start,
                     k_xi, fall_margin, fall_window, min_horizon, max_iters, P,
                     x0b, xfb,
                     nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
                     xb, ub, Lb, Jb, Rb, db, zb, rb, npb, Ab, sb, max_iter,
                     out_t, out_v, out_tt, out_ts, out_feas, out_err,
                     out_ux, out_uy):
    """Shared tick loop for both control modes; returns (fell, fall_time, n).

    Both modes track the nominal step retimed by a pace factor through the
    same saturated DCM law; they differ only in where the factor comes
    from: the raw patient request (naive) or the feasibility projection of
    the patient target (replan). At multiplier 1 the two branches evaluate
    identical arithmetic, which makes the baseline equivalence exact. A
    support change shifts the sagittal frame by the step length and
    mirrors the lateral axis, so the terminal pair never changes. fell is
    -1 on a QP breakdown.
    """
    # plant state, diagonal coordinates per axis
    cx, vx, cy, vy = _nominal_com(0.0, step_len, step_width, T_nom, omega)
    x1s = cx + vx / omega
    x2s = -cx + vx / omega
    x1l = cy + vy / omega
    x2l = -cy + vy / omega
    E = np.exp(omega * tick)
    F = 1.0 / E

    p = 0.0
    t = 0.0
    guess = T_nom
    alpha = 1.0
    ctr_x = 0.0
    ctr_y = 0.0
    for i in range(n_ticks):
        if sig_kind == 0:
            v = sig_mag
        elif sig_kind == 1:
            v = 1.0 + (sig_mag - 1.0) * np.sin(2.0 * np.pi * t / sig_period)
        else:
            v = sig_mag if (t >= sig_start and t < sig_start + sig_dur) else 1.0
        tt = (1.0 - p) * T_nom / v

        if mode == 0:
            alpha = v
            t_star = tt
            feas = 1.0
        else:
            remaining = (1.0 - p) * T_nom
            commit = FINALIZE_FACTOR * min_horizon
            if tt <= commit or remaining <= commit:
                # step committed: this close to the swap the terminal
                # equality is beyond the control authority of any replan,
                # so hold the last approved pace to the swap (a late brake
                # slam must not stall the step at its most fragile phase)
                t_star = tt
                feas = 1.0
            else:
                x0b[0, 0] = x1s
                x0b[0, 1] = x2s
                x0b[1, 0] = x1l
                x0b[1, 1] = x2l
                code, ts, target_ok, _, _, _ = kernel.replan_bisect(
                    x0b, xfb, tt, guess, max_iters, min_horizon,
                    P, omega, um_x, uM_x, um_y, uM_y,
                    nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
                    xb, ub, Lb, Jb, Rb, db, zb, rb, npb, Ab, sb, max_iter)
                if code == kernel.REPLAN_OK:
                    t_star = ts
                    feas = 1.0 if target_ok else 0.0
                    alpha = v if target_ok else remaining / ts
                    guess = max(ts - tick, min_horizon)
                elif code == kernel.REPLAN_GUESS_INFEASIBLE:
                    # no feasible timing from here: hold the last approved
                    # pace so the swap still arrives, and retry from the
                    # nominal remainder next tick
                    t_star = np.nan
                    feas = 0.0
                    guess = max(remaining, min_horizon)
                else:
                    return -1, t, i

        # retimed nominal reference at the current phase
        tau = p * T_nom
        cx, vx, cy, vy = _nominal_com(tau, step_len, step_width, T_nom, omega)
        xi_ref_x = cx + alpha * vx / omega
        xi_dot_x = alpha * vx + alpha * alpha * omega * cx
        xi_ref_y = cy + alpha * vy / omega
        xi_dot_y = alpha * vy + alpha * alpha * omega * cy

        e_x = x1s - xi_ref_x
        e_y = x1l - xi_ref_y
        raw_x = xi_ref_x - xi_dot_x / omega + (1.0 + k_xi / omega) * e_x
        raw_y = xi_ref_y - xi_dot_y / omega + (1.0 + k_xi / omega) * e_y
        u_x = min(max(raw_x, um_x), uM_x)
        u_y = min(max(raw_y, um_y), uM_y)

        out_t[i] = t
        out_v[i] = v
        out_tt[i] = tt
        out_ts[i] = t_star
        out_feas[i] = feas
        out_err[i] = max(abs(e_x), abs(e_y))
        out_ux[i] = u_x
        out_uy[i] = u_y

        # exact plant flow under the held CoP
        x1s = E * x1s + (1.0 - E) * u_x
        x2s = F * x2s + (F - 1.0) * u_x
        x1l = E * x1l + (1.0 - E) * u_y
        x2l = F * x2l + (F - 1.0) * u_y

        # fall proxy: DCM outside the inflated polygon while the command
        # is pinned, sustained for the whole window
        out_x = x1s > uM_x + fall_margin or x1s < um_x - fall_margin
        pin_x = raw_x > uM_x or raw_x < um_x
        ctr_x = ctr_x + tick if (out_x and pin_x) else 0.0
        out_y = x1l > uM_y + fall_margin or x1l < um_y - fall_margin
        pin_y = raw_y > uM_y or raw_y < um_y
        ctr_y = ctr_y + tick if (out_y and pin_y) else 0.0
        t += tick
        if ctr_x >= fall_window - 1e-12 or ctr_y >= fall_window - 1e-12:
            return 1, t, i + 1

        p += tick * alpha / T_nom
        if p >= 1.0:
            p -= 1.0
            x1s -= step_len
            x2s += step_len
            x1l, x2l = -x1l - step_width, -x2l + step_width
            guess = max((1.0 - p) * T_nom, min_horizon)
    return 0, t, n_ticks


def run_closed_loop(step: NominalStep, signal: VelocitySignal, *,
                    replan: bool, tick: float = 1e-3, horizon: float = 10.0,
                    k_xi: float = 3.0, fall_margin: float = FALL_MARGIN,
                    fall_window: float = FALL_WINDOW, P: int = 4,
                    max_iters: int = 10) -> SimReport:
    """Closed-loop walk under the saturated DCM tracking controller.

    Steps chain cyclically through mirror support changes. replan=True
    projects the patient target onto the feasible horizons every tick and
    retimes the gait accordingly; replan=False rescales time at the raw
    patient pace. The run ends at the horizon or at the first fall.
    """
    if k_xi <= 0.0:
        raise ValueError(f"k_xi must be positive, got {k_xi}")
    n_ticks = int(round(horizon / tick))
    ws = ReachWorkspace(P)
    xfb = np.ascontiguousarray(step.xf_2d)
    x0b = np.empty((2, 2))
    outs = [np.empty(n_ticks) for _ in range(8)]
    kind, mag, period, dur, start = signal._encode()
    bx, by = step.support_polygon
    fell, fall_time, n = _closed_loop_jit(
        REPLAN if replan else NAIVE, n_ticks, tick, step.duration_nom,
        step.step_length, step.step_width, step.omega,
        bx.u_m, bx.u_M, by.u_m, by.u_M,
        kind, mag, period, dur, start,
        k_xi, fall_margin, fall_window, MIN_HORIZON, max_iters, P,
        x0b, xfb, *ws.kernel_buffers(),
        *outs)
    if fell < 0:
        raise QpNumericsError(f"replanning QP broke down at t={fall_time:.3f}")
    t_arr, v_arr, tt_arr, ts_arr, feas, err, ux, uy = (o[:n].copy() for o in outs)
    return SimReport(
        tick=t_arr, v_request=v_arr, t_target=tt_arr, t_star=ts_arr,
        feasible=feas.astype(np.int64), dcm_error=err, cop_x=ux, cop_y=uy,
        outcome="fell" if fell == 1 else "completed",
        fall_time=fall_time if fell == 1 else None)


@dataclass(frozen=True)
class HeatmapRow:
    """Success rate of one (duration, magnitude, mode) cell.

    success_rate is None for grid cells violating the phase-validity
    constraint (the wave alone would exhaust a whole step of scaled
    phase); those appear blank in the CSV.
    """

    duration: float
    magnitude: float
    mode: str
    success_rate: Optional[float]
    n_runs: int


def _heatmap_cell(args) -> tuple[float, float, float, float, int]:
    (step, duration, magnitude, starts, tick, horizon, k_xi,
     fall_margin, fall_window, P, max_iters) = args
    ok = [0, 0]
    for mode_replan in (False, True):
        for t0 in starts:
            sig = VelocitySignal("square_wave", magnitude,
                                 duration=duration, start=t0)
            rep = run_closed_loop(step, sig, replan=mode_replan, tick=tick,
                                  horizon=horizon, k_xi=k_xi,
                                  fall_margin=fall_margin,
                                  fall_window=fall_window, P=P,
                                  max_iters=max_iters)
            ok[int(mode_replan)] += int(rep.outcome == "completed")
    n = len(starts)
    return duration, magnitude, ok[0] / n, ok[1] / n, n


def run_heatmap(step: NominalStep, *,
                magnitudes: np.ndarray | None = None,
                durations: np.ndarray | None = None,
                n_starts: int = 15, tick: float = 1e-3,
                horizon: float = 10.0, k_xi: float = 3.0,
                fall_margin: float = FALL_MARGIN,
                fall_window: float = FALL_WINDOW, P: int = 4,
                max_iters: int = 10, jobs: int = 1) -> list[HeatmapRow]:
    """Success rates over the square-wave disturbance grid, both modes.

    Start times sweep one full step beginning after a settling step. Cells
    where magnitude times duration reaches the nominal step duration would
    drive the scaled phase past 1 within the wave and are reported blank.
    """
    mags = np.round(np.arange(0.1, 2.0 + 1e-9, 0.1), 10) \
        if magnitudes is None else np.asarray(magnitudes, dtype=np.float64)
    durs = np.round(np.arange(0.2, 2.0 + 1e-9, 0.2), 10) \
        if durations is None else np.asarray(durations, dtype=np.float64)
    if n_starts < 1:
        raise ValueError(f"need at least one start time, got {n_starts}")
    starts = tuple(step.duration_nom * (1.0 + k / n_starts)
                   for k in range(n_starts))
    jobs_args = []
    blanks = []
    for d in durs:
        for m in mags:
            # strict inequality with a guard so grid products landing on
            # the knife edge are classified the same on every platform
            if m * d >= step.duration_nom - 1e-9:
                blanks.append((float(d), float(m)))
                continue
            jobs_args.append((step, float(d), float(m), starts, tick, horizon,
                              k_xi, fall_margin, fall_window, P, max_iters))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_heatmap_cell, jobs_args))
    else:
        results = [_heatmap_cell(a) for a in jobs_args]
    rows = []
    for (d, m, rate_naive, rate_replan, n) in results:
        rows.append(HeatmapRow(d, m, "naive", rate_naive, n))
        rows.append(HeatmapRow(d, m, "replan", rate_replan, n))
    for (d, m) in blanks:
        rows.append(HeatmapRow(d, m, "naive", None, 0))
        rows.append(HeatmapRow(d, m, "replan", None, 0))
    rows.sort(key=lambda r: (r.duration, r.magnitude, r.mode))
    return rows


@njit(cache=True)
def _replan_alloc_probe(n_calls, x0, xf, t_target, t_guess, max_iters,
                        min_horizon, P, omega, um_x, uM_x, um_y, uM_y,
                        nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
                        xb, ub, Lb, Jb, Rb, db, zb, rb, npb, Ab, sb,
                        max_iter):
    """Repeated in-loop replans, for marginal allocation measurement."""
    acc = 0.0
    for _ in range(n_calls):
        code, ts, ok, it, calls, pn = kernel.replan_bisect(
            x0, xf, t_target, t_guess, max_iters, min_horizon,
            P, omega, um_x, uM_x, um_y, uM_y,
            nodes, w1, w2, m_out, G, avec, CE, be, CI, bi,
            xb, ub, Lb, Jb, Rb, db, zb, rb, npb, Ab, sb, max_iter)
        acc += ts
    return acc


def _marginal_allocs(step: NominalStep, P: int, max_iters: int) -> float:
    """Heap allocations per replan solve inside a compiled loop.

    Measured as a difference of two loop lengths, so the fixed cost of
    crossing the Python boundary (one meminfo per array argument) cancels
    and only per-solve allocations remain. Probes both the fast path and
    a full bisection.
    """
    from numba.core.runtime import rtsys
    from numba.core.runtime.nrt import _nrt

    params = PendulumParams(step.omega)
    ws = ReachWorkspace(P)
    bx, by = step.support_polygon
    xf = np.ascontiguousarray(step.xf_2d)
    cases = []
    x_easy = np.ascontiguousarray(step.state_2d(0.3))
    cases.append((x_easy, 0.7 * step.duration_nom, 0.7 * step.duration_nom))
    x_late = np.ascontiguousarray(step.state_2d(0.8))
    cases.append((x_late, 5.0, 0.2 * step.duration_nom))
    worst = 0.0
    stats_were_on = _nrt.memsys_stats_enabled()
    _nrt.memsys_enable_stats()
    try:
        for x0, tt, tg in cases:
            deltas = []
            for n_calls in (64, 192):
                _replan_alloc_probe(n_calls, x0, xf, tt, tg, max_iters,
                                    MIN_HORIZON, P, step.omega,
                                    bx.u_m, bx.u_M, by.u_m, by.u_M,
                                    *ws.kernel_buffers())
                s0 = rtsys.get_allocation_stats()
                _replan_alloc_probe(n_calls, x0, xf, tt, tg, max_iters,
                                    MIN_HORIZON, P, step.omega,
                                    bx.u_m, bx.u_M, by.u_m, by.u_M,
                                    *ws.kernel_buffers())
                s1 = rtsys.get_allocation_stats()
                deltas.append(s1.alloc - s0.alloc)
            worst = max(worst, (deltas[1] - deltas[0]) / 128.0)
    finally:
        if not stats_were_on:
            _nrt.memsys_disable_stats()
    return worst


def run_bench(step: NominalStep | None = None, *, P: int = 4,
              max_iters: int = 10, n_iters: int = 10000,
              seed: int = 0) -> dict:
    """Latency of the replan call over seeded in-distribution requests.

    Requests start from random phases of the nominal path with patient
    velocities around nominal, so the mix covers the fast path and full
    bisections. Latency wraps the public call end to end, Python layer
    included. The allocation figure counts heap allocations per solve
    inside a compiled loop, the embedded-relevant number; the Python entry
    point additionally pays a fixed boundary cost (one meminfo per array
    argument plus the result wrapper), which is marshaling, not solving.
    """

    st = step if step is not None else make_nominal_step()
    params = PendulumParams(st.omega)
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 0.95, size=n_iters)
    vels = rng.uniform(0.4, 1.8, size=n_iters)
    reqs = []
    for ph, v in zip(phases, vels):
        x0 = st.state_2d(ph)
        tt = phase_to_target(st, ph, v)
        tg = (1.0 - ph) * st.duration_nom
        reqs.append(ReplanRequest(x0, st.xf_2d, tt, max(tg, MIN_HORIZON),
                                  max_iters=max_iters))
    rp = Replanner(st.support_polygon, params, P=P)
    for req in reqs[:50]:
        rp.project_duration(req)
    samples = np.empty(n_iters)
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for i, req in enumerate(reqs):
            t0 = time.perf_counter_ns()
            rp.project_duration(req)
            samples[i] = time.perf_counter_ns() - t0
    finally:
        if gc_was_enabled:
            gc.enable()
    samples /= 1e6
    return {
        "min_ms": float(samples.min()),
        "max_ms": float(samples.max()),
        "mean_ms": float(samples.mean()),
        "p99_ms": float(np.percentile(samples, 99.0)),
        "allocs_per_call": _marginal_allocs(st, P, max_iters),
        "n": n_iters,
    }


FIG1_HEADER = "tick,s;v_request;t_target,s;t_star,s;feasible,0/1;scan_lo,s;scan_hi,s"
HEATMAP_HEADER = "duration,s;magnitude;mode;success_rate;n_runs"
BENCH_HEADER = "min_ms;max_ms;mean_ms;p99_ms;allocs_per_call"


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_fig1_csv(report: SimReport, path: str | Path) -> None:
    """Fixed-schema scenario trace; fields are semicolon-separated."""
    lines = [FIG1_HEADER]
    for i in range(report.tick.shape[0]):
        lines.append(";".join((
            _fmt(report.tick[i]), _fmt(report.v_request[i]),
            _fmt(report.t_target[i]), _fmt(report.t_star[i]),
            str(int(report.feasible[i])),
            _fmt(report.scan_lo[i]), _fmt(report.scan_hi[i]))))
    Path(path).write_text("\n".join(lines) + "\n")


def write_heatmap_csv(rows: list[HeatmapRow], path: str | Path) -> None:
    """Fixed-schema success-rate table; invalid cells have a blank rate."""
    lines = [HEATMAP_HEADER]
    for r in rows:
        rate = "" if r.success_rate is None else _fmt(r.success_rate)
        lines.append(";".join((_fmt(r.duration), _fmt(r.magnitude),
                               r.mode, rate, str(r.n_runs))))
    Path(path).write_text("\n".join(lines) + "\n")


def write_bench_csv(stats: dict, path: str | Path) -> None:
    """Single-row latency summary."""
    line = ";".join((_fmt(stats["min_ms"]), _fmt(stats["max_ms"]),
                     _fmt(stats["mean_ms"]), _fmt(stats["p99_ms"]),
                     _fmt(stats["allocs_per_call"])))
    Path(path).write_text(BENCH_HEADER + "\n" + line + "\n")


def _git_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"],
                             capture_output=True, text=True, timeout=10,
                             cwd=Path(__file__).resolve().parent)
        rev = out.stdout.strip()
        return rev if out.returncode == 0 and rev else "unknown"
    except OSError:
        return "unknown"


def write_run_metadata(csv_path: str | Path, seed: int,
                       config_text: str = "") -> Path:
    """JSON sidecar tying an output file to its seed and configuration."""
    meta = {
        "seed": int(seed),
        "config_hash": hashlib.sha256(config_text.encode()).hexdigest(),
        "git_revision": _git_revision(),
    }
    path = Path(str(csv_path) + ".meta.json")
    path.write_text(json.dumps(meta, sort_keys=True) + "\n")
    return path
