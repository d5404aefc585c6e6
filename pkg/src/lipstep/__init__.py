"""Step-duration feasibility analysis and real-time CoP replanning on the LIP model."""

from .gait_sim import (
    HeatmapRow,
    NominalStep,
    SimReport,
    StepConfig,
    VelocitySignal,
    dcm_track_control,
    fig1_signal,
    make_nominal_step,
    phase_to_target,
    run_bench,
    run_closed_loop,
    run_fig1_scenario,
    run_heatmap,
    write_bench_csv,
    write_fig1_csv,
    write_heatmap_csv,
    write_run_metadata,
)
from .lip_core import (
    ComState,
    ConeMembership,
    ControlBounds,
    ControlSequence,
    DiagonalState,
    DSide,
    NotInConeError,
    PendulumParams,
    Region,
    apply_sequence,
    classify_region,
    cone_membership,
    d_crossing_time,
    from_diagonal,
    mirror_point,
    mirror_transit,
    propagate_const,
    side_of_D,
    to_diagonal,
)
from .replanner import (
    MIN_HORIZON,
    InfeasibleGuess,
    Replanner,
    ReplanRequest,
    ReplanResult,
    update_guess,
)
from .structure import (
    BangBangSolution,
    Boundedness,
    BoundaryPair,
    BoundaryStateError,
    CertifiedFeasibility,
    MinMaxTimes,
    TSetStructure,
    arc_min_violation,
    boundedness_class,
    exhaustive_scan,
    in_J,
    min_max_time,
    t_structure,
    two_arc_solve,
)

__version__ = "0.1.0"
