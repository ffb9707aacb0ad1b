"""Convergence study of the interior-penalty operator.

Solves a steady convection-diffusion problem with a known smooth solution
on a sequence of meshes and prints the observed L2 orders (target: 2 for
piecewise linears).
"""

import numpy as np

from fhncontrol import (ChannelGeometry, DgSpace, SipgConfig, VelocityField,
                        assemble_boundary_load, assemble_sipg_operator,
                        build_channel_mesh, classify_edges, solve)

velocity = VelocityField.from_max_speed(1.0, 1.0)


def exact(points):
    return np.cos(np.pi * points[:, 0]) * np.cos(np.pi * points[:, 1])


def forcing(points):
    x1, x2 = points[:, 0], points[:, 1]
    vx = velocity.amplitude * x2 * (1.0 - x2)
    return (2.0 * np.pi**2 * np.cos(np.pi * x1) * np.cos(np.pi * x2)
            - vx * np.pi * np.sin(np.pi * x1) * np.cos(np.pi * x2))


errors = []
sizes = (8, 16, 32, 64)
for n in sizes:
    mesh = classify_edges(build_channel_mesh(ChannelGeometry(1.0, 1.0, n, n)),
                          "all", velocity)
    space = DgSpace(mesh)
    cfg = SipgConfig(diffusion=1.0, velocity=velocity)
    matrix = assemble_sipg_operator(space, cfg)
    fq = forcing(space.quad_points_phys.reshape(-1, 2)).reshape(space.n_elements, -1)
    w = space.quad_tri.weights
    rhs = np.einsum("q,n,nq,qj->nj", w, space.quad_scale, fq,
                    space.basis_quad).ravel()
    rhs += assemble_boundary_load(space, cfg, exact)
    y = solve(matrix, rhs)

    ye = exact(space.quad_points_phys.reshape(-1, 2)).reshape(space.n_elements, -1)
    yh = y.reshape(-1, 3) @ space.basis_quad.T
    err = float(np.sqrt(np.einsum("q,n,nq->", w, space.quad_scale, (yh - ye)**2)))
    errors.append(err)
    order = "" if n == sizes[0] else f"  order {np.log2(errors[-2] / err):.2f}"
    print(f"h = 1/{n:<3d} L2 error = {err:.4e}{order}")
