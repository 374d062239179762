"""Low-rank Lyapunov and Sylvester solvers from residual-preserving Runge-Kutta steps."""

from .adi import AdiState, adi_real_double_step, adi_step, solve_adi
from .errors import *  # noqa: F401,F403
from .lyapunov import (
    GramianState,
    SolverConfig,
    StageWorkspace,
    correction_term,
    initial_state,
    residual_defect,
    residual_norm,
    solve_lyapunov,
    solve_lyapunov_sstage,
    step_one_stage,
    step_real_double,
    step_sstage,
)
from .mmio import read_matrix_market, write_matrix_market
from .operator import Operator, as_operator
from .oracle import (
    DenseSolution,
    coupled_stage_solve,
    dense_lyapunov,
    dense_sylvester,
    integrate_gramian,
    multiplicative_update_matrix,
    perfect_shuffle,
    vec,
)
from .shifts import ShiftSet, eig_shifts, heuristic_shifts, is_proper, make_proper
from .sylvester import (
    SylvesterShiftPair,
    SylvesterState,
    lyapunov_reduction_check,
    solve_sylvester,
    sylvester_residual_defect,
    sylvester_residual_norm,
)
from .tableau import (
    ButcherTableau,
    backward_euler,
    check_residual_condition,
    check_solvability,
    gauss_legendre,
    make_dirk_lyapunov,
    make_dirk_sylvester,
    make_one_stage,
    merge_one_stage_steps,
    real_pair_transform,
    stability_function,
)

__version__ = "0.1.0"
