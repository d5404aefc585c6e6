"""Feasible-time analysis for a single-axis reach problem.

For a boundary pair (x0, xf) in diagonal coordinates, the set of horizons
T > 0 admitting a CoP trajectory inside [u_m, u_M] that steers x0 to xf is
either empty, a closed interval, a closed half-line, or an interval plus a
half-line. This module computes that structure:

* two_arc_solve enumerates the at-most-one-switch bang-bang connections;
  substituting p = e^(omega a), q = e^(omega b) and eliminating q turns the
  boundary conditions into one quadratic in p per level ordering;
* min_max_time reduces extremal horizons to those connections (the extremal
  controls are bang-bang with at most one switch);
* boundedness_class reads the answer off the region grid of the phase plane;
* in_J detects when the feasible set splits into two components;
* t_structure assembles the full classification, bracketing the split
  points by bisection on certified QP feasibility;
* exhaustive_scan grids a time interval with the same certified check and
  serves as the ground-truth oracle in tests and plots.

The certified check solves the uniform-grid QP first and, if infeasible,
retries once with grid nodes adapted to the best free-level one-switch
candidate. The weighting that any supporting direction applies to the input
changes sign at most once over the horizon, so every boundary point of the
reachable set is attained by a one-switch input; adapting the grid to that
switch removes the interpolation conservatism of fixed uniform nodes while
every "feasible" verdict stays backed by an explicit QP solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .lip_core import (DEFAULT_BOUNDARY_TOL, ControlBounds, ControlSequence,
                       DiagonalState, PendulumParams, Region, apply_sequence,
                       classify_region, d_crossing_time, propagate_const)
from .qp.kernel import ARC_PRESOLVE_TOL, arc_min_violation
from .qp.solver import ReachWorkspace

# a returned connection must reproduce xf this tightly or it is discarded
VERIFY_TOL = 1e-9
# quadratic roots this close to p = 1 collapse to a zero-duration arc
SWITCH_COLLAPSE_TOL = 1e-12

_R258 = frozenset({Region.R2, Region.R5, Region.R8})
_R456 = frozenset({Region.R4, Region.R5, Region.R6})
_R123 = frozenset({Region.R1, Region.R2, Region.R3})
_R789 = frozenset({Region.R7, Region.R8, Region.R9})


class BoundaryStateError(ValueError):
    """A state sits on the region grid; the classification is open-region only."""


class Boundedness(Enum):
    EMPTY_CANDIDATE = "empty_candidate"
    BOUNDED = "bounded"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class BoundaryPair:
    x0: DiagonalState
    xf: DiagonalState

    def __post_init__(self) -> None:
        for s in (self.x0, self.xf):
            if not (math.isfinite(s.x1) and math.isfinite(s.x2)):
                raise ValueError(f"boundary states must be finite, got {s}")


@dataclass(frozen=True)
class BangBangSolution:
    """A verified at-most-one-switch connection and its total duration."""

    seq: ControlSequence
    total_time: float


@dataclass(frozen=True)
class MinMaxTimes:
    """Extremal one-switch connections: min over T > 0, max when bounded.

    zero carries the T = 0 connection when x0 = xf; it never participates in
    min. No positive connection and no zero witness means the feasible set
    is empty. The one case min/zero cannot express is an equilibrium pair,
    where every horizon works via the constant input but no bang-bang
    witness exists; t_structure special-cases it.
    """

    min: Optional[BangBangSolution]
    max: Optional[BangBangSolution]
    zero: Optional[BangBangSolution]


@dataclass(frozen=True)
class TSetStructure:
    """Tagged classification of the feasible-time set.

    kind is one of "empty", "bounded", "half_line", "two_components". For
    two_components the set is [t_min, a] plus [b, inf); a and b come from
    bisection on certified QP feasibility and carry the stated resolution.
    t_min_attained is False only when t_min = 0 is an infimum (equilibrium
    pairs, where arbitrarily short but not zero-duration transits exist).
    """

    kind: str
    t_min: Optional[float] = None
    t_max: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    t_min_attained: bool = True
    resolution: Optional[float] = None

    EMPTY = "empty"
    BOUNDED = "bounded"
    HALF_LINE = "half_line"
    TWO_COMPONENTS = "two_components"

    def __post_init__(self) -> None:
        if self.kind == self.BOUNDED:
            if not (0.0 <= self.t_min <= self.t_max):
                raise ValueError(f"need 0 <= t_min <= t_max, got {self}")
        elif self.kind == self.TWO_COMPONENTS:
            if not (self.t_min <= self.a < self.b):
                raise ValueError(f"need t_min <= a < b, got {self}")
        elif self.kind == self.HALF_LINE:
            if self.t_min is None or self.t_min < 0.0:
                raise ValueError(f"half line needs t_min >= 0, got {self}")
        elif self.kind != self.EMPTY:
            raise ValueError(f"unknown kind {self.kind!r}")

    @classmethod
    def empty(cls) -> "TSetStructure":
        return cls(kind=cls.EMPTY)

    @classmethod
    def bounded(cls, t_min: float, t_max: float) -> "TSetStructure":
        return cls(kind=cls.BOUNDED, t_min=t_min, t_max=t_max)

    @classmethod
    def half_line(cls, t_min: float, attained: bool = True) -> "TSetStructure":
        return cls(kind=cls.HALF_LINE, t_min=t_min, t_min_attained=attained)

    @classmethod
    def two_components(cls, t_min: float, a: float, b: float,
                       resolution: float) -> "TSetStructure":
        return cls(kind=cls.TWO_COMPONENTS, t_min=t_min, a=a, b=b,
                   resolution=resolution)


def _solution_from_arcs(u1: float, a: float, u2: float, b: float) -> BangBangSolution:
    """Build the sequence, dropping collapsed arcs so durations stay positive."""
    if a > 0.0 and b > 0.0:
        seq = ControlSequence(u1, (a, b), u2)
    elif a > 0.0:
        seq = ControlSequence(u1, (a,))
    elif b > 0.0:
        seq = ControlSequence(u2, (b,))
    else:
        seq = ControlSequence(u1, ())
    return BangBangSolution(seq=seq, total_time=a + b)


def _verify(pair: BoundaryPair, sol: BangBangSolution,
            params: PendulumParams) -> bool:
    terminal, _ = apply_sequence(pair.x0, sol.seq, params)
    return (abs(terminal.x1 - pair.xf.x1) <= VERIFY_TOL
            and abs(terminal.x2 - pair.xf.x2) <= VERIFY_TOL)


def _duration_from_p(p: float, omega: float) -> Optional[float]:
    """Map a growth factor to an arc duration; None when it implies t < 0."""
    if abs(p - 1.0) <= SWITCH_COLLAPSE_TOL:
        return 0.0
    if p > 1.0:
        return math.log(p) / omega
    return None


def _single_arc(pair: BoundaryPair, u: float,
                params: PendulumParams) -> list[BangBangSolution]:
    g1 = pair.x0.x1 - u
    gf = pair.xf.x1 - u
    b1 = pair.x0.x2 + u
    bf = pair.xf.x2 + u
    candidates = []
    if abs(g1) > 1e-300:
        candidates.append(gf / g1)
    if abs(bf) > 1e-300:
        candidates.append(b1 / bf)
    if not candidates and pair.x0 == pair.xf:
        candidates.append(1.0)  # resting at the equilibrium of this level
    out = []
    seen = []
    for p in candidates:
        if any(abs(p - q) <= 1e-12 * (1.0 + abs(p)) for q in seen):
            continue
        seen.append(p)
        t = _duration_from_p(p, params.omega)
        if t is None:
            continue
        sol = _solution_from_arcs(u, t, u, 0.0)
        if _verify(pair, sol, params):
            out.append(sol)
    return out


def two_arc_solve(pair: BoundaryPair, u_first: float, u_second: float,
                  bounds: ControlBounds,
                  params: PendulumParams) -> list[BangBangSolution]:
    """All bang-bang connections (u_first for a, then u_second for b), a, b >= 0.

    Levels must be the bounds themselves. With p = e^(omega a) and
    q = e^(omega b), eliminating q leaves alpha gamma p^2 +
    (beta gamma - alpha^2 - K) p - alpha beta = 0 where alpha = u2 - u1,
    beta = x0_2 + u1, gamma = x0_1 - u1 and K = (xf_1 - u2)(xf_2 + u2); real
    roots with p, q >= 1 are kept, roots within 1e-12 of 1 collapse to a
    zero-duration arc. Every candidate is re-simulated before being
    reported, so an empty list is a sound "no connection".
    """
    for u in (u_first, u_second):
        if u != bounds.u_m and u != bounds.u_M:
            raise ValueError(f"arc level {u} is not one of the bounds {bounds}")
    if u_first == u_second:
        return _single_arc(pair, u_first, params)

    omega = params.omega
    alpha = u_second - u_first
    beta = pair.x0.x2 + u_first
    gamma = pair.x0.x1 - u_first

    if abs(beta) <= 1e-300 and abs(gamma) <= 1e-300:
        # x0 rests at the first level's equilibrium; the first arc is idle
        return _single_arc(pair, u_second, params)
    if (abs(pair.xf.x1 - u_second) <= 1e-300
            and abs(pair.xf.x2 + u_second) <= 1e-300):
        # xf is the second level's equilibrium; the second arc is idle
        return [_solution_from_arcs(s.seq.first_value, s.total_time, u_second, 0.0)
                for s in _single_arc(pair, u_first, params)]

    K = (pair.xf.x1 - u_second) * (pair.xf.x2 + u_second)
    A = alpha * gamma
    B = beta * gamma - alpha * alpha - K
    C = -alpha * beta

    scale = max(abs(A), abs(B), abs(C))
    if scale == 0.0:
        return []
    roots: list[float] = []
    if abs(A) <= 1e-14 * scale:
        if abs(B) > 1e-14 * scale:
            roots.append(-C / B)
    else:
        disc = B * B - 4.0 * A * C
        if disc >= 0.0:
            sq = math.sqrt(disc)
            # stable split: the large-magnitude root first, the other via C/(A p)
            if B >= 0.0:
                r1 = (-B - sq) / (2.0 * A)
            else:
                r1 = (-B + sq) / (2.0 * A)
            roots.append(r1)
            if sq > 0.0 and abs(r1) > 1e-300:
                roots.append(C / (A * r1))

    out = []
    for p in roots:
        # one Newton polish kills the residual left by cancellation
        fp = 2.0 * A * p + B
        if abs(fp) > 1e-300:
            p -= (A * p * p + B * p + C) / fp
        a = _duration_from_p(p, omega)
        if a is None:
            continue
        den1 = p * gamma - alpha
        num1 = pair.xf.x1 - u_second
        den2 = p * (pair.xf.x2 + u_second)
        num2 = beta + alpha * p
        if abs(den1) >= abs(den2):
            if abs(den1) <= 1e-300:
                continue
            q = num1 / den1
        else:
            q = num2 / den2
        b = _duration_from_p(q, omega)
        if b is None:
            continue
        sol = _solution_from_arcs(u_first, a, u_second, b)
        if _verify(pair, sol, params):
            out.append(sol)
    return out


def _all_connections(pair: BoundaryPair, bounds: ControlBounds,
                     params: PendulumParams) -> list[BangBangSolution]:
    sols: list[BangBangSolution] = []
    for u1 in (bounds.u_m, bounds.u_M):
        for u2 in (bounds.u_m, bounds.u_M):
            sols.extend(two_arc_solve(pair, u1, u2, bounds, params))
    return sols


def min_max_time(pair: BoundaryPair, bounds: ControlBounds,
                 params: PendulumParams) -> MinMaxTimes:
    """Extremal horizons over all at-most-one-switch connections.

    min is the smallest connection with T > 0; max is the largest, reported
    only when boundedness_class certifies a bounded set (otherwise longer
    and longer connections exist and the largest root is meaningless). A
    zero-duration connection (x0 = xf) is reported separately in zero.
    """
    sols = _all_connections(pair, bounds, params)
    positive = [s for s in sols if s.total_time > 0.0]
    zero = next((s for s in sols if s.total_time == 0.0), None)
    best = min(positive, key=lambda s: s.total_time) if positive else None
    worst = None
    if best is not None:
        try:
            cls = boundedness_class(pair, bounds, params)
        except BoundaryStateError:
            cls = None
        if cls is Boundedness.BOUNDED:
            worst = max(positive, key=lambda s: s.total_time)
    return MinMaxTimes(min=best, max=worst, zero=zero)


def boundedness_class(pair: BoundaryPair, bounds: ControlBounds,
                      params: PendulumParams,
                      tol: float = DEFAULT_BOUNDARY_TOL) -> Boundedness:
    """Bounded / unbounded / candidate-empty from the region grid alone.

    x1 diverges monotonically outside the middle column, which caps the
    horizon; from the center region the state can loop forever; starting on
    the line through the top or bottom middle regions, the answer depends
    on which row xf sits in. States on the grid itself are rejected: the
    classification is only proved on the open regions.
    """
    r0 = classify_region(pair.x0, bounds, tol)
    rf = classify_region(pair.xf, bounds, tol)
    if r0 is Region.BOUNDARY:
        raise BoundaryStateError(f"x0 = {pair.x0} lies on the region grid")
    if rf is Region.BOUNDARY:
        raise BoundaryStateError(f"xf = {pair.xf} lies on the region grid")
    if r0 not in _R258:
        return Boundedness.BOUNDED
    if r0 is Region.R5:
        return Boundedness.UNBOUNDED
    if r0 is Region.R2:
        if rf in _R123:
            return Boundedness.BOUNDED
        if rf in _R456:
            return Boundedness.UNBOUNDED
        return Boundedness.EMPTY_CANDIDATE
    # r0 is R8, the mirror of R2 under the half-turn about the grid center
    if rf in _R789:
        return Boundedness.BOUNDED
    if rf in _R456:
        return Boundedness.UNBOUNDED
    return Boundedness.EMPTY_CANDIDATE


def _pincer_branch(pair: BoundaryPair, u_x0: float, u_xf: float,
                   x_d_on_the_right: bool, bounds: ControlBounds,
                   params: PendulumParams) -> bool:
    t_d = d_crossing_time(pair.x0, u_x0, "forward", params)
    t_D = d_crossing_time(pair.xf, u_xf, "backward", params)
    if t_d is None or t_D is None:
        return False
    x_d = propagate_const(pair.x0, u_x0, t_d, params)
    x_D = propagate_const(pair.xf, u_xf, -t_D, params)
    for x in (x_d, x_D):
        if not (bounds.u_m < x.x1 < bounds.u_M):
            return False
    if x_d_on_the_right:
        return x_d.x1 > x_D.x1
    return x_d.x1 < x_D.x1


def in_J(pair: BoundaryPair, bounds: ControlBounds,
         params: PendulumParams) -> bool:
    """Does the feasible set split into an interval plus a half-line?

    Necessary condition built from two crossings of the line x2 = -x1: flow
    x0 forward under one bound until the line (x_d), flow xf backward under
    the other bound until the line (x_D). Both must hit the open middle
    segment with strictly positive transit times. Along that segment the
    trajectory invariant (x1 - u)(x2 + u) equals -(x1 - u)^2, strictly
    decreasing in x1 for either bound u, so the short-horizon window pinches
    off exactly when x_d lies to the right of x_D (forward under the upper
    bound, backward under the lower bound; the mirrored branch reverses the
    inequality). One-root pairs that pass this test are filtered out by the
    connection count in t_structure.
    """
    r0 = classify_region(pair.x0, bounds, DEFAULT_BOUNDARY_TOL)
    rf = classify_region(pair.xf, bounds, DEFAULT_BOUNDARY_TOL)
    if r0 not in _R258 or rf not in _R456:
        return False
    return (_pincer_branch(pair, bounds.u_M, bounds.u_m, True, bounds, params)
            or _pincer_branch(pair, bounds.u_m, bounds.u_M, False, bounds, params))


class CertifiedFeasibility:
    """QP feasibility of a planar pair at horizon T, with adapted-grid retry.

    Callable as check(x0_2d, xf_2d, T) -> bool. Reuses one workspace, so a
    single instance is not safe to share between threads; make one per
    worker instead.
    """

    def __init__(self, bounds2d: tuple[ControlBounds, ControlBounds],
                 params: PendulumParams, P: int = 8):
        self.bounds2d = bounds2d
        self.params = params
        self.P = P
        self._ws = ReachWorkspace(P)

    def __call__(self, x0_2d: np.ndarray, xf_2d: np.ndarray, T: float) -> bool:
        return self._ws.certified(x0_2d, xf_2d, T, self.bounds2d, self.params)


def _planar(x: DiagonalState) -> np.ndarray:
    return np.array([[x.x1, x.x2], [x.x1, x.x2]])


def exhaustive_scan(pair: BoundaryPair,
                    bounds2d: tuple[ControlBounds, ControlBounds],
                    params: PendulumParams, t_grid: np.ndarray,
                    feasibility: Optional[Callable[[BoundaryPair, float], bool]] = None,
                    P: int = 8) -> np.ndarray:
    """Feasibility of each horizon in t_grid, as booleans.

    The default check duplicates the pair onto both axes and asks the QP
    module (with the adapted-grid retry); pass feasibility to substitute any
    other oracle, e.g. for cross-checking.
    """
    grid = np.asarray(t_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("t_grid must be a nonempty 1-d array")
    if grid[0] <= 0.0 or np.any(np.diff(grid) <= 0.0):
        raise ValueError("t_grid must be strictly increasing and positive")
    out = np.empty(grid.size, dtype=bool)
    if feasibility is None:
        check = CertifiedFeasibility(bounds2d, params, P)
        x0p = _planar(pair.x0)
        xfp = _planar(pair.xf)
        for k in range(grid.size):
            out[k] = check(x0p, xfp, float(grid[k]))
    else:
        for k in range(grid.size):
            out[k] = bool(feasibility(pair, float(grid[k])))
    return out


def _is_equilibrium_pair(pair: BoundaryPair, bounds: ControlBounds) -> bool:
    return (pair.x0 == pair.xf and pair.x0.x2 == -pair.x0.x1
            and bounds.u_m <= pair.x0.x1 <= bounds.u_M)


def _distinct_times(sols: list[BangBangSolution]) -> list[float]:
    times = sorted(s.total_time for s in sols if s.total_time > 0.0)
    out: list[float] = []
    for t in times:
        if not out or t - out[-1] > 1e-7 * (1.0 + t):
            out.append(t)
    return out


def t_structure(pair: BoundaryPair, bounds: ControlBounds,
                params: PendulumParams, *,
                feasibility: Optional[Callable[[np.ndarray, np.ndarray, float], bool]] = None,
                resolution: float = 1e-4) -> TSetStructure:
    """Classification of the feasible-time set for the pair.

    Combines the boundedness class, the extremal connections, and the
    two-component test. A split is declared only when the pincer condition
    holds and at least three distinct connection times exist; its endpoints
    are then bracketed by bisection on certified QP feasibility down to the
    requested resolution. feasibility overrides the certified check in the
    bisection (signature: (x0_2d, xf_2d, T) -> bool).
    """
    cls = boundedness_class(pair, bounds, params)
    if _is_equilibrium_pair(pair, bounds):
        # holding the equilibrium input works for every horizon; no positive
        # bang-bang witness exists and T = 0 is excluded by definition
        return TSetStructure.half_line(0.0, attained=False)
    mm = min_max_time(pair, bounds, params)
    if mm.min is None:
        return TSetStructure.empty()
    t_min = mm.min.total_time
    if cls is Boundedness.BOUNDED:
        if mm.max is None:
            raise RuntimeError(
                f"bounded class but no maximal connection for {pair}")
        return TSetStructure.bounded(t_min, mm.max.total_time)
    if cls is Boundedness.EMPTY_CANDIDATE:
        raise RuntimeError(
            f"verified connection on a pair the region tree rules out: {pair}")

    roots = _distinct_times(_all_connections(pair, bounds, params))
    if len(roots) < 3 or not in_J(pair, bounds, params):
        return TSetStructure.half_line(t_min)

    if feasibility is None:
        feasibility = CertifiedFeasibility((bounds, bounds), params)
    x0p = _planar(pair.x0)
    xfp = _planar(pair.xf)

    def feas(T: float) -> bool:
        return feasibility(x0p, xfp, T)

    # locate the gap between consecutive connection times
    gap = None
    for i in range(1, len(roots) - 1):
        if roots[i + 1] - roots[i] <= 2.0 * resolution:
            continue
        mid = 0.5 * (roots[i] + roots[i + 1])
        if not feas(mid):
            gap = (roots[i], mid, roots[i + 1])
            break
    if gap is None:
        # the pincer test over-fired; every probed horizon is reachable
        return TSetStructure.half_line(t_min)

    lo, mid, hi = gap
    a_lo, a_hi = lo, mid
    if not feas(a_lo):
        a_lo = max(t_min, a_lo - resolution)  # root can sit on the QP tolerance edge
    while a_hi - a_lo > resolution:
        m = 0.5 * (a_lo + a_hi)
        if feas(m):
            a_lo = m
        else:
            a_hi = m
    b_lo, b_hi = mid, hi
    if not feas(b_hi):
        b_hi = b_hi + resolution
    while b_hi - b_lo > resolution:
        m = 0.5 * (b_lo + b_hi)
        if feas(m):
            b_hi = m
        else:
            b_lo = m
    # midpoints of the final brackets halve the worst-case error
    a_val = 0.5 * (a_lo + a_hi)
    b_val = 0.5 * (b_lo + b_hi)
    return TSetStructure.two_components(t_min, a_val, b_val, resolution)
