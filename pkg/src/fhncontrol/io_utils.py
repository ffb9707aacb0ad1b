"""Field export: legacy VTK, MatrixMarket debug dumps, and centerline
profile extraction.

VTK output duplicates the three vertices of every triangle so the
discontinuous nodal values survive; viewers then show the actual broken
field including its jumps.
"""

from __future__ import annotations

import numpy as np
import scipy.io

from .dg_core import DgField, DgSpace


def write_vtk_fields(space: DgSpace, fields: dict, path) -> None:
    """Write named DG fields on duplicated triangle vertices.

    fields maps name -> coefficient vector (or DgField).
    """
    mesh = space.mesh
    nt = space.n_elements
    points = mesh.vertices[mesh.triangles].reshape(-1, 2)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("dg fields\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {3 * nt} double\n")
        for x, y in points:
            fh.write(f"{float(x)!r} {float(y)!r} 0.0\n")
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for k in range(nt):
            fh.write(f"3 {3 * k} {3 * k + 1} {3 * k + 2}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("\n".join(["5"] * nt) + "\n")
        fh.write(f"POINT_DATA {3 * nt}\n")
        for name, field in fields.items():
            coeffs = field.coeffs if isinstance(field, DgField) else np.asarray(field)
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in coeffs:
                fh.write(f"{float(v)!r}\n")


def write_matrix_market(matrix, path) -> None:
    scipy.io.mmwrite(str(path), matrix)


def centerline_samples(space: DgSpace):
    """Deterministic sample points along the channel axis.

    One sample per cell column, at the column center, inside the cell row
    whose center is nearest to (and below) mid-height; the point is kept
    strictly inside an element so the broken field is single-valued there.
    """
    geom = space.mesh.geometry
    if geom is None:
        raise ValueError("centerline sampling needs a structured channel mesh")
    x1 = (np.arange(geom.nx) + 0.5) * geom.dx
    row = max(0, (geom.ny - 1) // 2) if geom.ny % 2 else geom.ny // 2 - 1
    x2 = (row + 0.5) * geom.dy
    return x1, x2, row


def sample_centerline(space: DgSpace, coeffs) -> np.ndarray:
    """Evaluate a coefficient vector at the centerline sample points."""
    geom = space.mesh.geometry
    x1, x2, row = centerline_samples(space)
    fx = 0.5  # column centers
    fy = (x2 - row * geom.dy) / geom.dy
    # cell (i, row) holds triangles 2*(row*nx + i) (below diagonal) and +1
    cells = 2 * (row * geom.nx + np.arange(geom.nx))
    lower = fy <= fx
    tri = np.where(lower, cells, cells + 1)
    vals = np.empty(geom.nx)
    elem_coeffs = np.asarray(coeffs).reshape(space.n_elements, 3)
    for k in range(geom.nx):
        if lower:
            # lower triangle (v00, v10, v11): xi = fx - fy, eta = fy
            phi = np.array([1.0 - fx, fx - fy, fy])
        else:
            # upper triangle (v00, v11, v01): xi = fy... see mapping below
            phi = np.array([1.0 - fy, fx, fy - fx])
        vals[k] = elem_coeffs[tri[k]] @ phi
    return vals


def write_profile_csv(space: DgSpace, named_coeffs: dict, path) -> None:
    """CSV of centerline values: x1 plus one column per named field."""
    x1, _, _ = centerline_samples(space)
    columns = {name: sample_centerline(space, c) for name, c in named_coeffs.items()}
    with open(path, "w") as fh:
        fh.write("x1," + ",".join(columns) + "\n")
        for i in range(len(x1)):
            row = [repr(float(x1[i]))] + [repr(float(columns[n][i])) for n in columns]
            fh.write(",".join(row) + "\n")
