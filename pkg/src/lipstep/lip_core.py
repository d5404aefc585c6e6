"""Exact dynamics and phase-plane geometry of the diagonalized LIP model.

The one-axis LIP with CoM height fixed is c_ddot = omega^2 (c - u), u the CoP.
In the diagonal coordinates

    x1 = c + c_dot/omega        (the DCM, unstable mode)
    x2 = -c + c_dot/omega       (stable mode)

the dynamics decouple into x1_dot = omega (x1 - u), x2_dot = omega (-x2 - u),
so a constant CoP held for dt propagates exactly:

    x1(dt) = e^{omega dt} x1 + (1 - e^{omega dt}) u
    x2(dt) = e^{-omega dt} x2 + (e^{-omega dt} - 1) u

Everything in this module is built on that closed form: region labels on the
phase plane, the mirror line D = {x2 = -x1} (states with c = 0), the double
cones from which a single constant arc reaches the mirrored state, and the
time at which a constant arc crosses D.

All geometry below uses strict inequalities; regions and cones are open sets,
and points within a tolerance of their boundaries are reported as such rather
than silently classified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Literal, Optional

DEFAULT_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class PendulumParams:
    """Natural frequency omega = sqrt(g / c_z); g and c_z only enter through it."""

    omega: float

    def __post_init__(self) -> None:
        if not (self.omega > 0.0 and math.isfinite(self.omega)):
            raise ValueError(f"omega must be finite and > 0, got {self.omega}")


@dataclass(frozen=True)
class ComState:
    """One-axis CoM position and velocity."""

    c: float
    c_dot: float


@dataclass(frozen=True)
class DiagonalState:
    """Phase point (x1, x2); x1 is the DCM."""

    x1: float
    x2: float


@dataclass(frozen=True)
class ControlBounds:
    """Per-axis CoP interval [u_m, u_M] cut out of the support polygon."""

    u_m: float
    u_M: float

    def __post_init__(self) -> None:
        if not (self.u_m < self.u_M):
            raise ValueError(f"need u_m < u_M, got [{self.u_m}, {self.u_M}]")

    def clamp(self, u: float) -> float:
        return min(max(u, self.u_m), self.u_M)


class Region(Enum):
    """Open phase-plane regions R1..R9 plus the separating grid lines.

    Columns by x1 (left: x1 < u_m, middle, right: x1 > u_M), rows by x2
    (top: x2 > -u_m, middle, bottom: x2 < -u_M). R1 is top-left, R5 the
    center, R9 bottom-right. With this numbering R2 lies strictly above
    the line D and R8 strictly below it.
    """

    R1 = 1
    R2 = 2
    R3 = 3
    R4 = 4
    R5 = 5
    R6 = 6
    R7 = 7
    R8 = 8
    R9 = 9
    BOUNDARY = 0


class DSide(Enum):
    """Side of the mirror line D = {x1 + x2 = 0}."""

    D_PLUS = 1
    ON_D = 0
    D_MINUS = -1


class ConeMembership(Enum):
    """Membership in the open double cones C_m (u_m arcs) and C_M (u_M arcs)."""

    NEITHER = 0
    C_M_ONLY = 1
    C_MAX_ONLY = 2
    BOTH = 3


class NotInConeError(ValueError):
    """State lies outside both mirror cones; no single constant arc reaches Sx."""


@dataclass(frozen=True)
class ControlSequence:
    """Bang-bang control: a first value and the durations of its arcs.

    Values alternate starting from first_value; second_value names the level
    the odd arcs take and is required once there are two or more arcs. An
    empty durations tuple is the zero-duration sequence.
    """

    first_value: float
    durations: tuple[float, ...]
    second_value: Optional[float] = None

    def __post_init__(self) -> None:
        if any(not (d > 0.0) for d in self.durations):
            raise ValueError(f"arc durations must be > 0, got {self.durations}")
        if len(self.durations) >= 2:
            if self.second_value is None or self.second_value == self.first_value:
                raise ValueError("alternating sequence needs a distinct second_value")

    @property
    def total_time(self) -> float:
        return sum(self.durations)

    def arc_values(self) -> tuple[float, ...]:
        out = []
        for i in range(len(self.durations)):
            if i % 2 == 0:
                out.append(self.first_value)
            else:
                out.append(self.second_value)  # validated non-None above
        return tuple(out)


def to_diagonal(com: ComState, params: PendulumParams) -> DiagonalState:
    """Coordinate change (c, c_dot) -> (x1, x2)."""
    return DiagonalState(com.c + com.c_dot / params.omega,
                         -com.c + com.c_dot / params.omega)


def from_diagonal(x: DiagonalState, params: PendulumParams) -> ComState:
    """Inverse coordinate change: c = (x1 - x2)/2, c_dot = omega (x1 + x2)/2."""
    return ComState(0.5 * (x.x1 - x.x2), 0.5 * params.omega * (x.x1 + x.x2))


def propagate_const(x: DiagonalState, u: float, dt: float,
                    params: PendulumParams) -> DiagonalState:
    """Exact flow under a constant CoP for time dt; negative dt flows backward."""
    e = math.exp(params.omega * dt)
    return DiagonalState(e * x.x1 + (1.0 - e) * u,
                         x.x2 / e + (1.0 / e - 1.0) * u)


def apply_sequence(x0: DiagonalState, seq: ControlSequence,
                   params: PendulumParams) -> tuple[DiagonalState, Callable[[float], DiagonalState]]:
    """Terminal state of a bang-bang sequence plus a sampler of x(tau).

    The sampler accepts tau in [0, total duration] and evaluates the exact
    solution by propagating the prefix of completed arcs and the remainder
    of the current one.
    """
    values = seq.arc_values()
    knots = [0.0]
    states = [x0]
    for u, d in zip(values, seq.durations):
        states.append(propagate_const(states[-1], u, d, params))
        knots.append(knots[-1] + d)
    terminal = states[-1]
    total = knots[-1]

    def sampler(tau: float) -> DiagonalState:
        if tau < -1e-12 or tau > total + 1e-12:
            raise ValueError(f"tau={tau} outside [0, {total}]")
        tau = min(max(tau, 0.0), total)
        # locate the arc containing tau; right-continuous at knots
        k = 0
        while k < len(seq.durations) - 1 and tau >= knots[k + 1]:
            k += 1
        if not seq.durations:
            return x0
        return propagate_const(states[k], values[k], tau - knots[k], params)

    return terminal, sampler


def classify_region(x: DiagonalState, bounds: ControlBounds,
                    tol: float = DEFAULT_BOUNDARY_TOL) -> Region:
    """Open-region label of x, or BOUNDARY within tol of any grid line."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    u_m, u_M = bounds.u_m, bounds.u_M
    for line in (u_m, u_M):
        if abs(x.x1 - line) <= tol:
            return Region.BOUNDARY
    for line in (-u_m, -u_M):
        if abs(x.x2 - line) <= tol:
            return Region.BOUNDARY
    col = 0 if x.x1 < u_m else (1 if x.x1 < u_M else 2)
    row = 0 if x.x2 > -u_m else (1 if x.x2 > -u_M else 2)
    return Region(3 * row + col + 1)


def side_of_D(x: DiagonalState, tol: float = DEFAULT_BOUNDARY_TOL) -> DSide:
    s = x.x1 + x.x2
    if abs(s) <= tol:
        return DSide.ON_D
    return DSide.D_PLUS if s > 0 else DSide.D_MINUS


def mirror_point(x: DiagonalState) -> DiagonalState:
    """S x = (-x2, -x1): same CoM position, reversed velocity."""
    return DiagonalState(-x.x2, -x.x1)


def cone_membership(x: DiagonalState, bounds: ControlBounds) -> ConeMembership:
    """Open double cones from which one constant arc reaches the mirror image.

    C_m collects states with (x in D- and x1 > u_m) or (x in D+ and x1 < u_m);
    C_M likewise with u_M. Both conditions can hold at once (e.g. left of u_m
    and above D); points on D belong to neither (the cones are open).
    """
    s = x.x1 + x.x2
    in_cm = (s < 0 and x.x1 > bounds.u_m) or (s > 0 and x.x1 < bounds.u_m)
    in_cM = (s > 0 and x.x1 < bounds.u_M) or (s < 0 and x.x1 > bounds.u_M)
    if in_cm and in_cM:
        return ConeMembership.BOTH
    if in_cm:
        return ConeMembership.C_M_ONLY
    if in_cM:
        return ConeMembership.C_MAX_ONLY
    return ConeMembership.NEITHER


def mirror_transit(x: DiagonalState, bounds: ControlBounds,
                   params: PendulumParams) -> tuple[float, float, DiagonalState]:
    """Constant arc taking x to its mirror image Sx.

    Uses u = u_m inside C_m, u = u_M inside C_M (either choice is valid on
    the overlap; u_m is picked there, and the transit time differs). The
    transit time is t = log((u + x2) / (u - x1)) / omega, strictly positive
    on the open cones.
    """
    member = cone_membership(x, bounds)
    if member is ConeMembership.NEITHER:
        raise NotInConeError(f"{x} lies outside both mirror cones")
    u = bounds.u_m if member in (ConeMembership.C_M_ONLY, ConeMembership.BOTH) else bounds.u_M
    ratio = (u + x.x2) / (u - x.x1)
    t = math.log(ratio) / params.omega
    return u, t, mirror_point(x)


def d_crossing_time(x: DiagonalState, u: float,
                    direction: Literal["forward", "backward"],
                    params: PendulumParams) -> Optional[float]:
    """Smallest t > 0 at which the constant-u flow (by +t or -t) meets D.

    Along the flow x1 + x2 = e^{omega t}(x1 - u) + e^{-omega t}(x2 + u), so
    with s = e^{omega t} the forward crossing solves s^2 = (x2+u)/(u-x1) and
    the backward one the reciprocal. A crossing exists iff the ratio exceeds
    1; each trajectory crosses D at most once in total, so the returned root
    is the only one. None is a valid result (no crossing on that side).
    """
    num = x.x2 + u
    den = u - x.x1
    if direction == "backward":
        num, den = den, num
    elif direction != "forward":
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    if abs(den) < 1e-300:
        return None
    ratio = num / den
    if ratio <= 1.0:
        return None
    return 0.5 * math.log(ratio) / params.omega
