"""Tikhonov-regularized density topology optimization by proximal splitting."""
from .assemble import (
    AssembledOperators,
    HelmholtzFilter,
    assemble_filter,
    assemble_operators,
    assemble_stiffness,
    element_stiffness,
)
from .boxqp import BoxQp, BoxQpResult, BoxQpWarning, kkt_residual, solve_box_qp
from .grid import BoundaryConditions, Mesh, build_grid, inverter_problem, mbb_problem
from .model import (
    Evaluation,
    HessianModel,
    Problem,
    StateSolution,
    discreteness,
    hessian_model,
    objective_and_gradient,
    solve_adjoint,
    solve_state,
)
from .optim import (
    ActiveSet,
    IterationRecord,
    OptimizerConfig,
    RunResult,
    backtrack,
    build_scaling,
    convergence,
    fbs_step,
    gp_step,
    move_bounds,
    oc_step,
    run,
    sensfilter_step,
    tmp_active_set,
    tmp_step,
)
from .solve import Factorization, NotPositiveDefinite, factorize, spd_solve

__all__ = [
    "ActiveSet", "AssembledOperators", "BoundaryConditions", "BoxQp", "BoxQpResult",
    "BoxQpWarning", "Evaluation", "Factorization", "HelmholtzFilter", "HessianModel",
    "IterationRecord", "Mesh", "NotPositiveDefinite", "OptimizerConfig", "Problem",
    "RunResult", "StateSolution", "assemble_filter", "assemble_operators",
    "assemble_stiffness", "backtrack", "build_grid", "build_scaling", "convergence",
    "discreteness", "element_stiffness", "factorize", "fbs_step", "gp_step",
    "hessian_model", "inverter_problem", "kkt_residual", "mbb_problem", "move_bounds",
    "objective_and_gradient", "oc_step", "run", "sensfilter_step", "solve_adjoint",
    "solve_box_qp", "solve_state", "spd_solve", "tmp_active_set", "tmp_step",
]
