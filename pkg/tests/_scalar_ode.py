"""Independent scalar oracle: backward Euler on the two-component kinetics

    dy/dt = -c1*y*(y - c2)*(y - 1) - z + u
    dz/dt = -eps*(z - c3*y)

solved per step by a hand-rolled 2x2 Newton iteration. Used to check that
spatially constant PDE trajectories reduce to this system.
"""

import numpy as np


def scalar_backward_euler(y0, z0, tau, n_steps, c1=9.0, c2=0.02, c3=5.0,
                          eps=0.1, u=0.0):
    """Returns arrays (y, z) of length n_steps + 1."""
    ys = np.empty(n_steps + 1)
    zs = np.empty(n_steps + 1)
    ys[0], zs[0] = y0, z0
    for n in range(1, n_steps + 1):
        yk, zk = ys[n - 1], zs[n - 1]
        for _ in range(60):
            g = c1 * yk * (yk - c2) * (yk - 1.0)
            dg = c1 * (3.0 * yk**2 - 2.0 * (1.0 + c2) * yk + c2)
            f1 = (yk - ys[n - 1]) / tau + g + zk - u
            f2 = (zk - zs[n - 1]) / tau + eps * (zk - c3 * yk)
            if abs(f1) + abs(f2) < 1e-14:
                break
            jac = np.array([[1.0 / tau + dg, 1.0],
                            [-eps * c3, 1.0 / tau + eps]])
            dy, dz = np.linalg.solve(jac, [-f1, -f2])
            yk += dy
            zk += dz
        ys[n], zs[n] = yk, zk
    return ys, zs
