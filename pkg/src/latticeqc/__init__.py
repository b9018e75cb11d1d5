"""Coarse-grained solver for 2D truss lattices.

Bilinear elements reduce the degrees of freedom away from full-resolution
regions; node energies inside an element are sampled at six primary nodes
with quadratic Lagrange weights plus optional explicitly sampled nodes.
"""

from .error_norms import (ConvergenceFit, ErrorReport, displacement_error, energy_error,
                          fit_convergence_order, split_errors)
from .estimator import QuasicontinuumSolver
from .exceptions import (BoundaryConditionError, ConfigError, DeadStrutError, ExportError, GeometryError,
                         LatticeQCError, MeshError, SamplingError, SolverError)
from .fracture import (FractureHistory, FractureLoading, LoadStep, evaluate_failure_criterion,
                       external_work, run_quasistatic_fracture)
from .lattice import (LatticeModel, Material, carve_notch, generate_square_lattice,
                      generate_triangular_lattice, node_energies, remove_strut, total_lattice_energy)
from .mesh import CoarseMesh, QuadElement, bilinear_shape_eval, build_coarse_mesh, full_resolution_mesh
from .sampling import SCHEMES, build_sampling, eval_psi
from .solver import DirichletBC, PointLoad, Solution, solve, solve_full_resolution

__version__ = "0.1.0"

__all__ = [
    "BoundaryConditionError", "CoarseMesh", "ConfigError", "ConvergenceFit", "DeadStrutError",
    "DirichletBC", "ErrorReport", "ExportError", "FractureHistory", "FractureLoading", "GeometryError",
    "LatticeModel", "LatticeQCError", "LoadStep", "Material", "MeshError", "PointLoad",
    "QuadElement", "QuasicontinuumSolver", "SCHEMES", "SamplingError", "Solution", "SolverError",
    "bilinear_shape_eval", "build_coarse_mesh", "build_sampling", "carve_notch", "displacement_error",
    "energy_error", "eval_psi", "evaluate_failure_criterion", "external_work", "fit_convergence_order",
    "full_resolution_mesh", "generate_square_lattice", "generate_triangular_lattice", "node_energies",
    "remove_strut", "run_quasistatic_fracture", "solve", "solve_full_resolution", "split_errors",
    "total_lattice_energy",
]
