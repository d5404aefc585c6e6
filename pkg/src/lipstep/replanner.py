"""Projection of a requested step duration onto the feasible horizon set.

The controller asks for a step of duration t_target; the plant may not be
able to honor it from the current boundary conditions. project_duration
answers with the feasible duration nearest the request, found by bisection
on certified QP feasibility between the request and a known-feasible warm
start, and hands back the minimum-effort plan at that duration.

The warm start carries across control ticks: update_guess shifts the
previous answer by the elapsed tick so the next call starts from a horizon
that was feasible a tick ago. When the warm start itself has gone
infeasible the step cannot be salvaged and InfeasibleGuess says so; the
caller decides what to do with the old plan.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lip_core import ControlBounds, PendulumParams
from .qp import kernel
from .qp.solver import ReachWorkspace
from .qp.transcription import FohPlan

# horizons below this are not worth replanning at a 1 kHz tick; both the
# request and the warm start are clamped up to it
MIN_HORIZON = 5e-3


class InfeasibleGuess(RuntimeError):
    """The warm-start horizon is itself infeasible; the step is unsalvageable."""


@dataclass(frozen=True)
class ReplanRequest:
    """One tick's projection problem.

    x0_2d and xf_2d are (2, 2) diagonal-coordinate states, axis-major
    (row 0 sagittal, row 1 lateral). t_target is the horizon the caller
    wants, t_guess a horizon the caller believes feasible, max_iters the
    bisection depth N (the bracket shrinks by 2^-N).
    """

    x0_2d: np.ndarray
    xf_2d: np.ndarray
    t_target: float
    t_guess: float
    max_iters: int = 10

    def __post_init__(self):
        for name in ("x0_2d", "xf_2d"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (2, 2):
                raise ValueError(f"{name} must have shape (2, 2), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite, got {arr!r}")
            object.__setattr__(self, name, arr)
        if not (self.t_target > 0.0 and np.isfinite(self.t_target)):
            raise ValueError(f"t_target must be positive, got {self.t_target}")
        if not (self.t_guess > 0.0 and np.isfinite(self.t_guess)):
            raise ValueError(f"t_guess must be positive, got {self.t_guess}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")


@dataclass(frozen=True)
class ReplanResult:
    """Feasible horizon nearest the request, with its plan.

    t_star is certified feasible and never farther from t_target than the
    warm start was. iterations_used is 0 when bisection was skipped (the
    target was feasible, or the warm start was already within one final
    bracket width of the boundary), else max_iters. qp_calls counts every
    feasibility solve spent on this request.
    """

    t_star: float
    plan: FohPlan
    target_was_feasible: bool
    iterations_used: int
    qp_calls: int


class Replanner:
    """Reusable projection engine; one instance per control loop.

    Owns a ReachWorkspace, so a call allocates only the returned plan.
    Not thread-safe; parallel scenarios each build their own.
    """

    def __init__(self, bounds2d: tuple[ControlBounds, ControlBounds],
                 params: PendulumParams, P: int = 8):
        self.bounds2d = bounds2d
        self.params = params
        self.P = P
        self._ws = ReachWorkspace(P)

    def project_duration(self, req: ReplanRequest) -> ReplanResult:
        """Nearest feasible horizon to req.t_target, bisecting toward it.

        The target is tried first and returned outright when feasible. On
        failure a probe one final-bracket-width from the warm start toward
        the target decides whether bisection can help at this resolution;
        when it cannot, the warm start is verified and returned, so a tick
        that repeats the previous request costs three solves, not a full
        bisection. Bisection narrows [guess-side, target] by 2^-max_iters
        and returns the feasible end of the final bracket.

        Lives entirely in the component of the feasible set holding the
        warm start; with several components the answer may land in one
        nearer the target when a probe point happens to fall inside it,
        which only tightens the projection. Raises InfeasibleGuess when
        even the warm start fails, and QpNumericsError if a solve breaks
        down. Horizons below MIN_HORIZON are clamped up to it.
        """
        code, t_star, target_ok, iters, calls = self._ws.replan(
            req.x0_2d, req.xf_2d, req.t_target, req.t_guess,
            req.max_iters, MIN_HORIZON, self.bounds2d, self.params)
        if code == kernel.REPLAN_GUESS_INFEASIBLE:
            raise InfeasibleGuess(
                f"warm-start horizon {t_star:.6g} s is infeasible for this "
                f"boundary pair; the current step cannot be salvaged")
        return ReplanResult(t_star=t_star, plan=self._ws.last_plan(),
                            target_was_feasible=target_ok,
                            iterations_used=iters, qp_calls=calls)


def update_guess(prev: ReplanResult, tick: float) -> float:
    """Warm start for the next tick: the previous answer less elapsed time.

    The remainder of the previous plan steers the advanced state to the
    same terminal condition in exactly prev.t_star - tick, so that horizon
    is feasible at the old boundary conditions. Clamped to MIN_HORIZON once
    the step is effectively over.
    """
    if tick < 0.0:
        raise ValueError(f"tick must be nonnegative, got {tick}")
    return max(prev.t_star - tick, MIN_HORIZON)
