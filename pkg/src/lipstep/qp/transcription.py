"""First-order-hold transcription of planar reach problems into dense QPs.

A candidate plan is a continuous piecewise-linear CoP trajectory on a node
grid covering [0, T], one value series per horizontal axis. Both axes share
the node grid, decouple in the dynamics, and couple only through the cost,
which is the exact integral of ||u(t)||^2 under the piecewise-linear
interpolation (a tridiagonal Gram matrix per axis, positive definite once
segment durations are floored away from zero).

The terminal constraint rows use the exact per-segment closed form of the
diagonalized dynamics, so a QP-feasible plan reproduces the requested
boundary pair to solver precision; there is no integration error to tune.
Transcription feasibility is conservative: plans are a strict subset of all
admissible inputs, and refining the grid only widens what is representable.

Variable layout: z = [u_x(t_0)..u_x(t_{P-1}), u_y(t_0)..u_y(t_{P-1})].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lip_core import ControlBounds, PendulumParams
from .kernel import foh_terminal_weights

# segments shorter than this fraction of T are rejected: they add nothing
# representable and drive the cost Gram toward singularity
MIN_SEGMENT_FRACTION = 1e-6

_GEOMETRIC_RATIO = 1.5


@dataclass(frozen=True)
class QpProblem:
    """Dense strictly convex QP: min 1/2 z^T G z + a^T z, C_E z = b_E, C_I z >= b_I.

    Equality rows are normalized to unit 2-norm so residual tolerances mean
    the same thing across horizons. ``nodes`` is carried along when the
    problem came out of a transcription (None for hand-built problems).
    """

    G: np.ndarray
    a: np.ndarray
    C_E: np.ndarray
    b_E: np.ndarray
    C_I: np.ndarray
    b_I: np.ndarray
    nodes: np.ndarray | None = None

    def __post_init__(self):
        n = self.G.shape[0]
        if self.G.shape != (n, n) or self.a.shape != (n,):
            raise ValueError("inconsistent Hessian / linear term shapes")
        if self.C_E.shape[1:] != (n,) or self.b_E.shape != (self.C_E.shape[0],):
            raise ValueError("inconsistent equality block shapes")
        if self.C_I.shape[1:] != (n,) or self.b_I.shape != (self.C_I.shape[0],):
            raise ValueError("inconsistent inequality block shapes")


@dataclass(frozen=True)
class FohPlan:
    """Piecewise-linear CoP plan: shared nodes, one value series per axis."""

    nodes: np.ndarray
    values_x: np.ndarray
    values_y: np.ndarray

    @property
    def duration(self) -> float:
        return float(self.nodes[-1] - self.nodes[0])

    def value_at(self, t: float) -> tuple[float, float]:
        """Linear interpolation; clamps outside the node range."""
        vx = float(np.interp(t, self.nodes, self.values_x))
        vy = float(np.interp(t, self.nodes, self.values_y))
        return vx, vy


@dataclass(frozen=True)
class QpOutcome:
    """Feasibility verdict plus the certified plan and its cost when feasible."""

    feasible: bool
    plan: FohPlan | None = None
    cost: float | None = None


def make_nodes(T: float, P: int, node_spacing="uniform") -> np.ndarray:
    """Node grid on [0, T] with P nodes.

    node_spacing: "uniform", "geometric" (segments grow by a fixed ratio so
    the grid is densest near t = 0, where replanning bites hardest), or an
    explicit increasing array starting at 0 and ending at T.
    """
    if not np.isfinite(T) or T <= 0.0:
        raise ValueError(f"horizon must be positive, got {T}")
    if P < 2:
        raise ValueError(f"need at least 2 nodes, got {P}")
    if isinstance(node_spacing, str):
        if node_spacing == "uniform":
            nodes = np.linspace(0.0, T, P)
        elif node_spacing == "geometric":
            g = _GEOMETRIC_RATIO
            d0 = T * (g - 1.0) / (g ** (P - 1) - 1.0)
            gaps = d0 * g ** np.arange(P - 1)
            nodes = np.concatenate(([0.0], np.cumsum(gaps)))
            nodes[-1] = T
        else:
            raise ValueError(f"unknown node spacing {node_spacing!r}")
    else:
        nodes = np.asarray(node_spacing, dtype=np.float64)
        if nodes.ndim != 1 or nodes.shape[0] != P:
            raise ValueError("explicit nodes must be a 1-d array of length P")
        if abs(nodes[0]) > 0.0 or abs(nodes[-1] - T) > 1e-12 * max(1.0, T):
            raise ValueError("explicit nodes must start at 0 and end at T")
        nodes = nodes.copy()
        nodes[-1] = T
    gaps = np.diff(nodes)
    if np.any(gaps < MIN_SEGMENT_FRACTION * T):
        raise ValueError("node grid contains a segment below the minimum duration")
    return nodes


def _cost_gram(nodes: np.ndarray) -> np.ndarray:
    """Hessian of the exact integral of u(t)^2 for one axis.

    integral = sum_k (d_k / 3) (u_k^2 + u_k u_{k+1} + u_{k+1}^2), so the
    Gram is tridiagonal with 2/3 (d_{k-1} + d_k) on the diagonal and d_k / 3
    off it. Positive definite for strictly positive segment durations.
    """
    d = np.diff(nodes)
    P = nodes.shape[0]
    G = np.zeros((P, P))
    idx = np.arange(P - 1)
    G[idx, idx] += 2.0 / 3.0 * d
    G[idx + 1, idx + 1] += 2.0 / 3.0 * d
    G[idx, idx + 1] = d / 3.0
    G[idx + 1, idx] = d / 3.0
    return G


def foh_transcribe(x0_2d: np.ndarray, xf_2d: np.ndarray, T: float, P: int,
                   bounds2d: tuple[ControlBounds, ControlBounds],
                   params: PendulumParams,
                   node_spacing="uniform") -> QpProblem:
    """Build the dense QP whose solutions are exact-terminal FOH plans.

    x0_2d, xf_2d: arrays of shape (2, 2), axis-major: row 0 is the x axis
    (x1, x2), row 1 the y axis. bounds2d gives one CoP interval per axis.
    """
    x0_2d = np.asarray(x0_2d, dtype=np.float64)
    xf_2d = np.asarray(xf_2d, dtype=np.float64)
    if x0_2d.shape != (2, 2) or xf_2d.shape != (2, 2):
        raise ValueError("boundary states must have shape (2, 2), axis-major")
    nodes = make_nodes(T, P, node_spacing)
    omega = params.omega

    w1 = np.empty(P)
    w2 = np.empty(P)
    m_out = np.empty(2)
    foh_terminal_weights(nodes, omega, m_out, w1, w2)

    n = 2 * P
    C_E = np.zeros((4, n))
    b_E = np.zeros(4)
    for axis in range(2):
        sl = slice(axis * P, (axis + 1) * P)
        C_E[2 * axis, sl] = w1
        b_E[2 * axis] = xf_2d[axis, 0] - m_out[0] * x0_2d[axis, 0]
        C_E[2 * axis + 1, sl] = w2
        b_E[2 * axis + 1] = xf_2d[axis, 1] - m_out[1] * x0_2d[axis, 1]
    norms = np.linalg.norm(C_E, axis=1)
    C_E /= norms[:, None]
    b_E /= norms

    C_I = np.zeros((4 * P, n))
    b_I = np.zeros(4 * P)
    row = 0
    for axis in range(2):
        lo, hi = bounds2d[axis].u_m, bounds2d[axis].u_M
        for k in range(P):
            C_I[row, axis * P + k] = 1.0
            b_I[row] = lo
            row += 1
            C_I[row, axis * P + k] = -1.0
            b_I[row] = -hi
            row += 1

    gram = _cost_gram(nodes)
    G = np.zeros((n, n))
    G[:P, :P] = gram
    G[P:, P:] = gram
    a = np.zeros(n)
    return QpProblem(G=G, a=a, C_E=C_E, b_E=b_E, C_I=C_I, b_I=b_I, nodes=nodes)


def plan_from_solution(problem: QpProblem, z: np.ndarray) -> FohPlan:
    """Split the stacked variable vector back into per-axis node values."""
    if problem.nodes is None:
        raise ValueError("problem carries no node grid; not a transcription")
    P = problem.nodes.shape[0]
    return FohPlan(nodes=problem.nodes.copy(),
                   values_x=z[:P].copy(), values_y=z[P:].copy())
