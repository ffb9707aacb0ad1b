"""Experiment orchestration: build the discrete problem from a config,
derive tracking targets from the uncontrolled solution, run the
optimizer, and emit result files.

Outputs per run directory:
  summary.csv     one row per optimization (objective, counters)
  iterations.csv  per-iteration optimizer log
  profile_t*.csv  centerline profiles of y, z, u at the requested time
  field_*.vtk     snapshots of y, z, u
  sweep.csv       (sweep runs) error norms against the reference solution
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .assembly import ReactionParams, VelocityField
from .config import OcpConfig
from .dg_core import DgSpace, interpolate
from .fhn_solver import (FhnDiscretization, NewtonConfig, TimeGrid,
                         Trajectory, compute_natural_targets)
from .io_utils import write_profile_csv, write_vtk_fields
from .mesh import ChannelGeometry, build_channel_mesh, classify_edges
from .optimizer import (ControlBounds, ControlInner, ObjectiveWeights,
                        OptimizeOptions, OptimizerState, optimize)
from .sparse_linalg import LinearSolver

SUMMARY_COLUMNS = ("preset", "v_max", "mu", "omega_u", "J", "mu_j",
                   "iterations", "line_searches", "newton_steps")
ITERATION_COLUMNS = ("k", "J", "smooth", "mu_j", "grad_norm", "step",
                     "line_searches", "newton_steps")


@dataclass
class ProblemSetup:
    config: OcpConfig
    problem: FhnDiscretization
    grid: TimeGrid
    y_init: np.ndarray
    z_init: np.ndarray
    weights: ObjectiveWeights
    bounds: ControlBounds
    options: OptimizeOptions


def build_setup(config: OcpConfig) -> ProblemSetup:
    config.validate()
    geom = ChannelGeometry(config.length, config.height, config.nx, config.ny)
    velocity = VelocityField.from_max_speed(config.v_max, config.height)
    mesh = classify_edges(build_channel_mesh(geom), None, velocity)
    space = DgSpace(mesh)
    reaction = ReactionParams(c1=config.c1, c2=config.c2, c3=config.c3,
                              epsilon=config.epsilon)
    problem = FhnDiscretization(
        space, reaction, velocity,
        d_activator=config.d_activator, d_inhibitor=config.d_inhibitor,
        sigma_interior=config.sigma_interior, sigma_boundary=config.sigma_boundary,
        linear_solver=LinearSolver(config.linear_solver))
    grid = TimeGrid(config.t_final, config.n_steps)

    lo, hi, amp = config.pulse_start, config.pulse_end, config.pulse_amplitude
    y_init = interpolate(space, lambda p: np.where(
        (p[:, 0] >= lo) & (p[:, 0] <= hi), amp, 0.0)).coeffs
    z_init = np.zeros(space.n_dofs)

    weights = ObjectiveWeights(track_y=config.track_y, track_z=config.track_z,
                               terminal_y=config.terminal_y,
                               terminal_z=config.terminal_z,
                               tikhonov=config.tikhonov,
                               l1_weight=config.l1_weight)
    bounds = ControlBounds(config.lower, config.upper)
    options = OptimizeOptions(
        tol_gradient=config.tol_gradient, tol_objective=config.tol_objective,
        max_iterations=config.max_iterations, beta_variant=config.beta_variant,
        restart_every=config.restart_every, initial_step=config.initial_step,
        gradient_norm=config.gradient_norm,
        newton=NewtonConfig(tol_abs=config.newton_tol_abs,
                            tol_rel=config.newton_tol_rel,
                            max_iter=config.newton_max_iter,
                            damping=config.newton_damping))
    return ProblemSetup(config, problem, grid, y_init, z_init, weights,
                        bounds, options)


def make_targets(setup: ProblemSetup):
    return compute_natural_targets(setup.problem, setup.grid, setup.y_init,
                                   setup.z_init, setup.config.target_mode,
                                   setup.options.newton)


@dataclass
class ExperimentResult:
    config: OcpConfig
    state: OptimizerState | None
    natural: Trajectory
    output_dir: str


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)


def _write_csv(path, columns, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _summary_row(config: OcpConfig, state: OptimizerState | None):
    if state is None:
        return (config.preset, config.v_max, config.l1_weight, config.tikhonov,
                0.0, 0.0, 0, 0, 0)
    return (config.preset, config.v_max, config.l1_weight, config.tikhonov,
            state.objective, config.l1_weight * state.objective_l1,
            state.iterations, state.line_searches, state.newton_steps)


def _emit_fields(setup: ProblemSetup, out: str, state_traj: Trajectory,
                 control, tag: str = ""):
    config = setup.config
    space = setup.problem.space
    n_profile = int(round(config.profile_time / setup.grid.tau))
    n_profile = min(max(n_profile, 1), setup.grid.n_steps)
    u_rows = np.zeros((setup.grid.n_steps, space.n_dofs)) if control is None \
        else control
    named = {"y": state_traj.first[n_profile], "z": state_traj.second[n_profile],
             "u": u_rows[n_profile - 1]}
    stamp = f"{config.profile_time:g}"
    write_profile_csv(space, named, os.path.join(out, f"profile_t{stamp}{tag}.csv"))
    for name, coeffs in named.items():
        write_vtk_fields(space, {name: coeffs},
                         os.path.join(out, f"field_{name}_{n_profile:04d}{tag}.vtk"))
    final = {"y": state_traj.first[-1], "z": state_traj.second[-1],
             "u": u_rows[-1]}
    for name, coeffs in final.items():
        write_vtk_fields(space, {name: coeffs},
                         os.path.join(out, f"field_{name}_{setup.grid.n_steps:04d}{tag}.vtk"))


def run_experiment(config: OcpConfig) -> ExperimentResult:
    """Run one preset (or custom config) and write its result files."""
    if config.preset == "tikhonov-sweep":
        return run_tikhonov_sweep(config)
    setup = build_setup(config)
    out = config.output_dir
    os.makedirs(out, exist_ok=True)

    targets, natural = make_targets(setup)
    if config.preset == "forward-only":
        _emit_fields(setup, out, natural, None)
        _write_csv(os.path.join(out, "summary.csv"), SUMMARY_COLUMNS,
                   [_summary_row(config, None)])
        return ExperimentResult(config, None, natural, out)

    state = optimize(setup.problem, setup.grid, setup.y_init, setup.z_init,
                     targets, setup.weights, setup.bounds, setup.options)
    _write_csv(os.path.join(out, "summary.csv"), SUMMARY_COLUMNS,
               [_summary_row(config, state)])
    _write_csv(os.path.join(out, "iterations.csv"), ITERATION_COLUMNS,
               state.history)
    _emit_fields(setup, out, state.state, state.control)
    return ExperimentResult(config, state, natural, out)


SWEEP_COLUMNS = ("omega_u", "J", "mu_j", "iterations", "line_searches",
                 "newton_steps", "err_u_l2q", "err_u_linfq", "err_y_l2q",
                 "err_y_linfq", "err_z_l2q", "err_z_linfq",
                 "err_y_target_l2", "err_y_target_linf",
                 "err_z_target_l2", "err_z_target_linf")


def run_tikhonov_sweep(config: OcpConfig) -> ExperimentResult:
    """Solve the sparse terminal-control problem for a decreasing sequence
    of quadratic-penalty weights and report distances to the smallest-weight
    solution and to the targets."""
    if not config.sweep_values:
        raise ValueError("sweep requires a non-empty sweep_values list")
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    setup = build_setup(config)
    targets, natural = make_targets(setup)
    inner = ControlInner(setup.problem.mass, setup.grid.tau)

    def solve_for(omega: float) -> OptimizerState:
        weights = replace(setup.weights, tikhonov=omega)
        return optimize(setup.problem, setup.grid, setup.y_init, setup.z_init,
                        targets, weights, setup.bounds, setup.options)

    reference = solve_for(config.sweep_reference)
    rows = []
    summary_rows = [(config.preset, config.v_max, config.l1_weight,
                     config.sweep_reference, reference.objective,
                     config.l1_weight * reference.objective_l1,
                     reference.iterations, reference.line_searches,
                     reference.newton_steps)]

    def norms(diff_rows):
        return inner.norm(diff_rows), float(np.abs(diff_rows).max())

    mass = setup.problem.mass

    def omega_row(omega: float, state: OptimizerState):
        du = state.control - reference.control
        dy = state.state.first[1:] - reference.state.first[1:]
        dz = state.state.second[1:] - reference.state.second[1:]
        ey = state.state.first[-1] - targets.y_term
        ez = state.state.second[-1] - targets.z_term
        u_l2, u_inf = norms(du)
        y_l2, y_inf = norms(dy)
        z_l2, z_inf = norms(dz)
        return (omega, state.objective, config.l1_weight * state.objective_l1,
                state.iterations, state.line_searches, state.newton_steps,
                u_l2, u_inf, y_l2, y_inf, z_l2, z_inf,
                float(np.sqrt(max(ey @ (mass @ ey), 0.0))), float(np.abs(ey).max()),
                float(np.sqrt(max(ez @ (mass @ ez), 0.0))), float(np.abs(ez).max()))

    for omega in config.sweep_values:
        state = solve_for(omega)
        rows.append(omega_row(omega, state))
        summary_rows.append((config.preset, config.v_max, config.l1_weight,
                             omega, state.objective,
                             config.l1_weight * state.objective_l1,
                             state.iterations, state.line_searches,
                             state.newton_steps))

    rows.append(omega_row(config.sweep_reference, reference))
    _write_csv(os.path.join(out, "sweep.csv"), SWEEP_COLUMNS, rows)
    _write_csv(os.path.join(out, "summary.csv"), SUMMARY_COLUMNS, summary_rows)
    return ExperimentResult(config, reference, natural, out)
