"""Equation-free cyclic loop synthesis from sampled trajectories.

Fit a reduced one-step linear surrogate to an observed trajectory, then solve
a closure-constrained quadratic program for the smallest Fourier-parameterized
control that bends the rollout into an exactly periodic loop. Includes
localized interactive editing, desk-scale data generators, a CLI, and an HTTP
edit service.
"""

from .control_basis import (
    DegenerateRegionError,
    FourierBasis,
    LocalBasisColumn,
    LocalBasisSet,
    TemporalProfile,
    build_local_basis,
    make_profile,
    region_from_box,
)
from .cyclic_solver import (
    CyclicSolution,
    CyclicSolveError,
    RolloutSystem,
    SolveMetrics,
    SolverWeights,
    assemble_qp,
    build_rollout,
    evaluate_solution,
    load_solution,
    save_solution,
    solve_cyclic,
)
from .estimators import CyclicLoopPlanner, KoopmanReducer
from .interactive import (
    EditProblem,
    EditSession,
    EditSolution,
    EditSolveError,
    EditWeights,
    build_edit_rollout,
    solve_edit,
)
from .koopman import (
    ReducedModel,
    fit_full,
    fit_reduced,
    fit_reduced_auto,
    holdout_error,
    lift,
    load_model,
    reduce_coords,
    rollout,
    save_model,
)
from .numerics import (
    KKTSolveError,
    SvdTruncation,
    lstsq_operator,
    solve_kkt,
    truncated_svd,
)
from .trajectory import (
    FieldBlock,
    FieldLayout,
    FrameSplit,
    Trajectory,
    TrajectoryFormatError,
    frame_split,
    load_trajectory,
    save_trajectory,
    snapshot_pair,
)

__version__ = "0.1.0"

__all__ = [
    "CyclicLoopPlanner",
    "CyclicSolution",
    "CyclicSolveError",
    "DegenerateRegionError",
    "EditProblem",
    "EditSession",
    "EditSolution",
    "EditSolveError",
    "EditWeights",
    "FieldBlock",
    "FieldLayout",
    "FourierBasis",
    "FrameSplit",
    "KKTSolveError",
    "KoopmanReducer",
    "LocalBasisColumn",
    "LocalBasisSet",
    "ReducedModel",
    "RolloutSystem",
    "SolveMetrics",
    "SolverWeights",
    "SvdTruncation",
    "TemporalProfile",
    "Trajectory",
    "TrajectoryFormatError",
    "assemble_qp",
    "build_edit_rollout",
    "build_local_basis",
    "build_rollout",
    "evaluate_solution",
    "fit_full",
    "fit_reduced",
    "fit_reduced_auto",
    "frame_split",
    "holdout_error",
    "lift",
    "load_model",
    "load_solution",
    "load_trajectory",
    "lstsq_operator",
    "make_profile",
    "reduce_coords",
    "region_from_box",
    "rollout",
    "save_model",
    "save_solution",
    "save_trajectory",
    "snapshot_pair",
    "solve_cyclic",
    "solve_edit",
    "solve_kkt",
    "truncated_svd",
]
