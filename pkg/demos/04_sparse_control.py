"""Sparsity of the optimal control under an L1 penalty.

Sweeping the sparse weight shows the support of the control shrinking
while both cost parts grow, and verifies the dead-zone relation: the
control vanishes exactly wherever the multiplier magnitude stays below
the sparse weight.
"""

import numpy as np

from fhncontrol import (ChannelGeometry, ControlBounds, DgSpace,
                        FhnDiscretization, ObjectiveWeights, ReactionParams,
                        TimeGrid, VelocityField, build_channel_mesh,
                        classify_edges, compute_natural_targets, interpolate,
                        optimize)
from fhncontrol.optimizer import OptimizeOptions, adjoint_control_samples

geometry = ChannelGeometry(100.0, 5.0, 50, 4)
velocity = VelocityField.from_max_speed(32.0, 5.0)
mesh = classify_edges(build_channel_mesh(geometry), None, velocity)
space = DgSpace(mesh)
problem = FhnDiscretization(space, ReactionParams(), velocity)
grid = TimeGrid(1.0, 20)

y0 = interpolate(space, lambda p: np.where(p[:, 0] <= 0.1, 1.0, 0.0)).coeffs
z0 = np.zeros(space.n_dofs)
targets, _ = compute_natural_targets(problem, grid, y0, z0, "space-time")
bounds = ControlBounds(-0.2, 0.0)
options = OptimizeOptions(max_iterations=60, tol_objective=1e-5)

print(f"{'mu':>8s} {'J':>11s} {'mu*j':>11s} {'support':>8s} {'dead-zone ok':>12s}")
for mu in (0.0, 1.0 / 500.0, 1.0 / 100.0, 1.0 / 50.0):
    weights = ObjectiveWeights(track_y=1.0, track_z=1.0, tikhonov=1e-5,
                               l1_weight=mu)
    state = optimize(problem, grid, y0, z0, targets, weights, bounds, options)
    support = int(np.sum(np.abs(state.control) > 1e-6))
    if mu > 0:
        p_ctrl = adjoint_control_samples(state.adjoint)
        dead = np.abs(p_ctrl) <= mu - 1e-8
        ok = "yes" if not np.any(state.control[dead] != 0.0) else "NO"
    else:
        ok = "-"
    print(f"{mu:8.4f} {state.objective:11.4e} "
          f"{mu * state.objective_l1:11.4e} {support:8d} {ok:>12s}")
