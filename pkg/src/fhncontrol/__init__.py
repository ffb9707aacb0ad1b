"""Optimal control of the convective FitzHugh-Nagumo system.

Interior-penalty discontinuous Galerkin discretization in space, implicit
Euler in time, exact discrete adjoint gradients, and a projected nonlinear
conjugate-gradient optimizer with box constraints and an L1 sparsity term.
"""

from .assembly import (ReactionParams, SipgConfig, VelocityField,
                       assemble_adjoint_operator, assemble_boundary_load,
                       assemble_couplings, assemble_mass,
                       assemble_sipg_operator, nonlinear_jacobian,
                       nonlinear_vector)
from .config import OcpConfig, apply_coarse, load_config, make_preset, save_config
from .dg_core import DgField, DgSpace, interpolate, jump_average, l2_norm, project
from .experiments import run_experiment, run_tikhonov_sweep
from .fhn_solver import (FhnDiscretization, NewtonConfig, Targets, TimeGrid,
                         Trajectory, adjoint_solve, compute_natural_targets,
                         forward_solve, newton_solve_timestep)
from .mesh import ChannelGeometry, EdgeKind, Mesh, build_channel_mesh, classify_edges
from .optimizer import (ControlBounds, ObjectiveWeights, OptimizeOptions,
                        OptimizerState, cg_direction, composite_gradient,
                        evaluate_objective, line_search, optimize,
                        project_control, projection_formula, subgradient_lambda)
from .sparse_linalg import (IterativeSolveError, LinearSolver,
                            SingularSystemError, add_scaled, factorize,
                            matvec, solve)

__version__ = "0.1.0"
