"""Implicit time integration of the coupled activator/inhibitor system.

The semi-discrete system is stepped with backward Euler; each step solves
the coupled nonlinear pair with Newton's method on the stacked residual

    (M/tau)(y_n - y_{n-1}) + A_y y_n + b(y_n) + M z_n       = l_y^n + M u_n
    (M/tau)(z_n - z_{n-1}) + A_z z_n + eps M z_n - eps c3 M y_n = l_z^n.

The backward sweep solves, per step, the linear coupled system whose
matrix is the transpose of the forward Newton matrix evaluated at the
converged state; pairing the step-n control with the multiplier at the
step's departure node then makes the computed gradient exact for the
discrete objective (see optimizer module).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import (ReactionParams, SipgConfig, VelocityField,
                       assemble_adjoint_operator, assemble_boundary_load,
                       assemble_mass, assemble_sipg_operator,
                       nonlinear_jacobian_blocks, nonlinear_vector)
from .dg_core import DgField, DgSpace
from .sparse_linalg import LinearSolver, as_csr, factorize, solve


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_N = t_final."""

    t_final: float
    n_steps: int

    def __post_init__(self):
        if self.t_final <= 0 or self.n_steps < 1:
            raise ValueError("need t_final > 0 and n_steps >= 1")

    @property
    def tau(self) -> float:
        return self.t_final / self.n_steps

    @property
    def times(self) -> np.ndarray:
        t = self.tau * np.arange(self.n_steps + 1)
        t[-1] = self.t_final
        return t


class Trajectory:
    """Node-indexed pair of fields on one space: rows 0..n_steps."""

    def __init__(self, space: DgSpace, grid: TimeGrid, first, second):
        self.space = space
        self.grid = grid
        self.first = np.asarray(first, dtype=float)
        self.second = np.asarray(second, dtype=float)
        expected = (grid.n_steps + 1, space.n_dofs)
        if self.first.shape != expected or self.second.shape != expected:
            raise ValueError(f"trajectory arrays must have shape {expected}")

    def field_first(self, n: int) -> DgField:
        return DgField(self.space, self.first[n])

    def field_second(self, n: int) -> DgField:
        return DgField(self.space, self.second[n])

    def __len__(self):
        return self.grid.n_steps + 1


@dataclass(frozen=True)
class NewtonConfig:
    tol_abs: float = 1e-10
    tol_rel: float = 1e-12
    max_iter: int = 25
    damping: bool = True

    def __post_init__(self):
        if self.tol_abs <= 0 or self.tol_rel < 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


class NewtonError(RuntimeError):
    def __init__(self, step: int, residual: float, message: str):
        super().__init__(f"time step {step}: {message} (last residual {residual:.3e})")
        self.step = step
        self.residual = residual


@dataclass
class Targets:
    """Tracking data: distributed targets are node-indexed coefficient
    arrays, terminal targets single coefficient vectors; None disables."""

    y_dist: np.ndarray | None = None
    z_dist: np.ndarray | None = None
    y_term: np.ndarray | None = None
    z_term: np.ndarray | None = None


class FhnDiscretization:
    """All time-independent operators of one problem instance.

    Assembles the forward and reversed-transport stiffness operators, the
    mass matrix, and the coupling scalings once; Newton steps only refresh
    the cubic reaction Jacobian. Boundary data callables, when given, map
    (points, t) to values and feed the per-step load vectors.
    """

    def __init__(self, space: DgSpace, reaction: ReactionParams,
                 velocity: VelocityField, d_activator: float = 1.0,
                 d_inhibitor: float = 1.0, sigma_interior: float = 6.0,
                 sigma_boundary: float = 12.0, boundary_data_y=None,
                 boundary_data_z=None,
                 linear_solver: LinearSolver = LinearSolver()):
        self.space = space
        self.reaction = reaction
        self.velocity = velocity
        self.linear_solver = linear_solver
        self.cfg_y = SipgConfig(d_activator, velocity, sigma_interior, sigma_boundary)
        self.cfg_z = SipgConfig(d_inhibitor, velocity, sigma_interior, sigma_boundary)
        self.boundary_data_y = boundary_data_y
        self.boundary_data_z = boundary_data_z

        self.mass = assemble_mass(space)
        self.op_y = assemble_sipg_operator(space, self.cfg_y)
        self.op_z = assemble_sipg_operator(space, self.cfg_z)
        self.op_y_adj = assemble_adjoint_operator(space, self.cfg_y)
        self.op_z_adj = assemble_adjoint_operator(space, self.cfg_z)
        eps, c3 = reaction.epsilon, reaction.c3
        self.coupling_zy = self.mass                      # inhibitor in activator eq
        self.coupling_yz = as_csr(-eps * c3 * self.mass)  # activator in inhibitor eq
        self.relax_z = as_csr(eps * self.mass)
        self._zero_load = np.zeros(space.n_dofs)
        self._steppers: dict = {}

    def stepper(self, tau: float) -> "_StepOperators":
        """Cached per-step-size coupled matrix templates."""
        key = float(tau)
        if key not in self._steppers:
            self._steppers[key] = _StepOperators(self, key)
        return self._steppers[key]

    def loads(self, t: float):
        l_y = self._zero_load if self.boundary_data_y is None else \
            assemble_boundary_load(self.space, self.cfg_y,
                                   lambda pts: self.boundary_data_y(pts, t))
        l_z = self._zero_load if self.boundary_data_z is None else \
            assemble_boundary_load(self.space, self.cfg_z,
                                   lambda pts: self.boundary_data_z(pts, t))
        return l_y, l_z

    def step_residual(self, tau, y_prev, z_prev, y, z, u, loads):
        """Stacked backward-Euler residual of one time step."""
        m_tau = self.mass / tau
        l_y, l_z = loads
        r_y = (m_tau @ (y - y_prev) + self.op_y @ y
               + nonlinear_vector(DgField(self.space, y), self.reaction)
               + self.coupling_zy @ z - l_y - self.mass @ u)
        r_z = (m_tau @ (z - z_prev) + self.op_z @ z + self.relax_z @ z
               + self.coupling_yz @ y - l_z)
        return np.concatenate([r_y, r_z])


class _StepOperators:
    """Coupled step matrices for one step size, with in-place value refresh.

    The reaction Jacobian only touches each element's own 3x3 block, which
    the stiffness pattern already contains, so the coupled sparsity is
    fixed: build the stacked matrix once and rewrite the affected entries
    per Newton iteration instead of re-assembling.
    """

    def __init__(self, problem: FhnDiscretization, tau: float):
        self.problem = problem
        self.tau = tau
        m_tau = as_csr(problem.mass / tau)
        self.m_tau = m_tau
        k_y0 = as_csr(m_tau + problem.op_y)
        k_z = as_csr(m_tau + problem.op_z + problem.relax_z)
        k_p0 = as_csr(m_tau + problem.op_y_adj)
        k_q = as_csr(m_tau + problem.op_z_adj + problem.relax_z)
        self.forward_template, self.forward_slots = self._template(
            k_y0, problem.coupling_zy, problem.coupling_yz, k_z)
        self.adjoint_template, self.adjoint_slots = self._template(
            k_p0, problem.coupling_yz, problem.coupling_zy, k_q)

    def _template(self, k11, k12, k21, k22):
        matrix = sp.bmat([[k11, k12], [k21, k22]], format="csr")
        matrix.sort_indices()
        nd = self.problem.space.n_dofs
        ne = self.problem.space.n_elements
        dofs = np.arange(3 * ne).reshape(ne, 3)
        rows = np.repeat(dofs, 3, axis=1).ravel()
        cols = np.tile(dofs, (1, 3)).ravel()
        # locate each element-block entry inside the csr data array
        width = 2 * nd
        nnz_keys = np.repeat(np.arange(width), np.diff(matrix.indptr)) \
            .astype(np.int64) * width + matrix.indices
        query = rows.astype(np.int64) * width + cols
        slots = np.searchsorted(nnz_keys, query)
        if not np.array_equal(nnz_keys[slots], query):
            raise RuntimeError("stiffness pattern does not contain the element blocks")
        return matrix, slots

    def _materialize(self, template, slots, jac_blocks):
        data = template.data.copy()
        data[slots] += jac_blocks.ravel()
        return sp.csr_matrix((data, template.indices, template.indptr),
                             shape=template.shape)

    def forward_matrix(self, jac_blocks) -> sp.csr_matrix:
        return self._materialize(self.forward_template, self.forward_slots, jac_blocks)

    def adjoint_matrix(self, jac_blocks) -> sp.csr_matrix:
        return self._materialize(self.adjoint_template, self.adjoint_slots, jac_blocks)

    def solve(self, matrix, rhs) -> np.ndarray:
        if self.problem.linear_solver.method == "direct":
            return factorize(matrix).solve(rhs)
        return solve(matrix, rhs, self.problem.linear_solver)


def newton_solve_timestep(problem: FhnDiscretization, tau: float,
                          y_prev, z_prev, u_n, loads,
                          cfg: NewtonConfig = NewtonConfig(), step: int = 0):
    """Solve one coupled implicit step; returns (y, z, iterations, residuals)."""
    space = problem.space
    stepper = problem.stepper(tau)

    y = y_prev.copy()
    z = z_prev.copy()
    residual = problem.step_residual(tau, y_prev, z_prev, y, z, u_n, loads)
    rnorm = np.linalg.norm(residual)
    tol = max(cfg.tol_abs, cfg.tol_rel * rnorm)
    history = [rnorm]
    iters = 0
    while rnorm > tol:
        if iters >= cfg.max_iter:
            raise NewtonError(step, rnorm, f"no convergence in {cfg.max_iter} iterations")
        jac = nonlinear_jacobian_blocks(DgField(space, y), problem.reaction)
        matrix = stepper.forward_matrix(jac)
        delta = stepper.solve(matrix, -residual)
        scale = 1.0
        for _ in range(11):
            y_new = y + scale * delta[:space.n_dofs]
            z_new = z + scale * delta[space.n_dofs:]
            residual_new = problem.step_residual(tau, y_prev, z_prev,
                                                 y_new, z_new, u_n, loads)
            rnorm_new = np.linalg.norm(residual_new)
            if rnorm_new < rnorm or not cfg.damping or rnorm_new <= tol:
                break
            scale *= 0.5
        else:
            raise NewtonError(step, rnorm, "damping failed to reduce the residual")
        y, z, residual, rnorm = y_new, z_new, residual_new, rnorm_new
        history.append(rnorm)
        iters += 1
    return y, z, iters, history


def forward_solve(problem: FhnDiscretization, grid: TimeGrid, control,
                  y0, z0, newton: NewtonConfig = NewtonConfig()):
    """March the state from (y0, z0); control row k acts on step k+1.

    Returns (trajectory, total_newton_iterations).
    """
    nd = problem.space.n_dofs
    if control is None:
        control = np.zeros((grid.n_steps, nd))
    control = np.asarray(control, dtype=float)
    if control.shape != (grid.n_steps, nd):
        raise ValueError(f"control must have shape {(grid.n_steps, nd)}, "
                         f"got {control.shape}")

    y = np.empty((grid.n_steps + 1, nd))
    z = np.empty((grid.n_steps + 1, nd))
    y[0] = np.asarray(y0, dtype=float)
    z[0] = np.asarray(z0, dtype=float)
    tau = grid.tau
    times = grid.times
    total_newton = 0
    for n in range(1, grid.n_steps + 1):
        loads = problem.loads(times[n])
        y[n], z[n], iters, _ = newton_solve_timestep(
            problem, tau, y[n - 1], z[n - 1], control[n - 1], loads, newton, step=n)
        total_newton += iters
    return Trajectory(problem.space, grid, y, z), total_newton


def adjoint_solve(problem: FhnDiscretization, state: Trajectory,
                  targets: Targets, weights) -> Trajectory:
    """Backward sweep for the multiplier pair.

    Terminal data is imposed nodally; each step solves one linear coupled
    system whose blocks transpose the forward couplings, with the reaction
    Jacobian frozen at the state of the step being left.
    """
    space = problem.space
    grid = state.grid
    nd = space.n_dofs
    stepper = problem.stepper(grid.tau)
    m_tau = stepper.m_tau

    p = np.zeros((grid.n_steps + 1, nd))
    q = np.zeros((grid.n_steps + 1, nd))
    if weights.terminal_y != 0.0 and targets.y_term is not None:
        p[-1] = weights.terminal_y * (state.first[-1] - targets.y_term)
    if weights.terminal_z != 0.0 and targets.z_term is not None:
        q[-1] = weights.terminal_z * (state.second[-1] - targets.z_term)

    for n in range(grid.n_steps, 0, -1):
        jac = nonlinear_jacobian_blocks(DgField(space, state.first[n]),
                                        problem.reaction)
        matrix = stepper.adjoint_matrix(jac)
        rhs_p = m_tau @ p[n]
        rhs_q = m_tau @ q[n]
        if weights.track_y != 0.0 and targets.y_dist is not None:
            rhs_p += weights.track_y * (problem.mass @ (state.first[n] - targets.y_dist[n]))
        if weights.track_z != 0.0 and targets.z_dist is not None:
            rhs_q += weights.track_z * (problem.mass @ (state.second[n] - targets.z_dist[n]))
        sol = stepper.solve(matrix, np.concatenate([rhs_p, rhs_q]))
        p[n - 1] = sol[:nd]
        q[n - 1] = sol[nd:]
    return Trajectory(space, grid, p, q)


def compute_natural_targets(problem: FhnDiscretization, grid: TimeGrid,
                            y0, z0, mode: str,
                            newton: NewtonConfig = NewtonConfig()):
    """Run the uncontrolled system and derive tracking data from it.

    mode 'space-time': distributed targets equal the natural trajectory up
    to t_final/2 and vanish afterwards. mode 'terminal': terminal targets
    equal the natural pair at t_final/2.

    Returns (targets, natural_trajectory).
    """
    natural, _ = forward_solve(problem, grid, None, y0, z0, newton)
    times = grid.times
    half = 0.5 * grid.t_final
    if mode == "space-time":
        y_dist = natural.first.copy()
        z_dist = natural.second.copy()
        late = times > half + 1e-12 * grid.t_final
        y_dist[late] = 0.0
        z_dist[late] = 0.0
        targets = Targets(y_dist=y_dist, z_dist=z_dist)
    elif mode == "terminal":
        n_half = int(round(half / grid.tau))
        if abs(times[n_half] - half) > 1e-12 * grid.t_final:
            raise ValueError("t_final/2 must be a grid node for terminal targets")
        targets = Targets(y_term=natural.first[n_half].copy(),
                          z_term=natural.second[n_half].copy())
    else:
        raise ValueError(f"unknown target mode {mode!r}")
    return targets, natural
