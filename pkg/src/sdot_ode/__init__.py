"""Semi-discrete optimal transport by continuation in the entropic parameter.

The entropic dual problem with cost ``t c`` and regularisation ``1 - t`` is
solved at ``t = 0`` in closed form; its minimiser is then followed to the
unregularised problem at ``t = 1`` by integrating an ODE.
"""
from .cells import CellDecomposition1D, RasterGrid, cell_masses, laguerre_boundaries_1d
from .entropic import derivatives, dt_grad_phi, grad_phi, hessian_phi, phi, smoothed_masses
from .linalg import jacobi_eigh, projected_solve, restricted_eigenvalues
from .newton import NewtonConfig, newton_solve, reference_solution_1d
from .ode import RK3Tableau, initial_potential, make_tableau, rhs, solve_ivp
from .problem import (
    BoxDomain,
    CostFunction,
    Problem,
    SourceMeasure,
    TargetMeasure,
    builtin_example,
    exact_solution,
    load_problem,
    save_problem,
)
from .quadrature import QuadratureSpec, integrate
from .report import SolveReport

__all__ = [
    "BoxDomain", "CostFunction", "Problem", "SourceMeasure", "TargetMeasure",
    "builtin_example", "exact_solution", "load_problem", "save_problem",
    "QuadratureSpec", "integrate",
    "phi", "grad_phi", "smoothed_masses", "hessian_phi", "dt_grad_phi", "derivatives",
    "projected_solve", "jacobi_eigh", "restricted_eigenvalues",
    "RK3Tableau", "make_tableau", "initial_potential", "rhs", "solve_ivp",
    "CellDecomposition1D", "RasterGrid", "laguerre_boundaries_1d", "cell_masses",
    "NewtonConfig", "newton_solve", "reference_solution_1d",
    "SolveReport",
]
