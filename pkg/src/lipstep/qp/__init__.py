from .kernel import (foh_simulate_nodes, foh_terminal_weights, gi_solve,
                     solve_foh_reach)
from .solver import (DualActiveSetSolver, NotPositiveDefiniteError,
                     QpNumericsError, QpSolution, ReachWorkspace,
                     check_feasible, dump_problem, simulate_plan, solve_qp)
from .transcription import (FohPlan, QpOutcome, QpProblem, foh_transcribe,
                            make_nodes, plan_from_solution)

__all__ = [
    "DualActiveSetSolver",
    "FohPlan",
    "NotPositiveDefiniteError",
    "QpNumericsError",
    "QpOutcome",
    "QpProblem",
    "QpSolution",
    "ReachWorkspace",
    "check_feasible",
    "dump_problem",
    "foh_simulate_nodes",
    "foh_terminal_weights",
    "foh_transcribe",
    "gi_solve",
    "make_nodes",
    "plan_from_solution",
    "simulate_plan",
    "solve_foh_reach",
    "solve_qp",
]
