"""Triangulated rectangular channel with edge classification.

The channel [0, L] x [0, H] is covered by an nx-by-ny grid of rectangles,
each split into two triangles along the lower-left to upper-right diagonal.
Every edge stores its incident elements, a unit normal, and a boundary
class; this is the geometric data an interior-penalty assembly needs.

Conventions
-----------
* Triangles are counterclockwise; element k owns degrees of freedom
  3k, 3k+1, 3k+2 in element-major field vectors.
* An edge's normal points from its left element to its right element,
  or outward when the edge lies on the boundary (right element = -1).
* Meshes are immutable after construction (array buffers are locked),
  so instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class EdgeKind(IntEnum):
    INTERIOR = 0
    DIRICHLET = 1
    NEUMANN = 2


@dataclass(frozen=True)
class ChannelGeometry:
    """Rectangular channel [0, length] x [0, height] with cell counts."""

    length: float
    height: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.length <= 0 or self.height <= 0:
            raise ValueError(f"channel dimensions must be positive, got "
                             f"{self.length} x {self.height}")
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"cell counts must be >= 1, got nx={self.nx}, ny={self.ny}")

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def dy(self) -> float:
        return self.height / self.ny


class Mesh:
    """Conforming triangulation with oriented, classified edges.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Vertex indices, counterclockwise.
    tri_area, tri_diameter : (nt,) float arrays
    tri_edges : (nt, 3) int array
        Global edge index of local edge k = (v_k, v_{k+1 mod 3}).
    edges : (ne, 2) int array
        Endpoint vertex indices, oriented as traversed by the left element.
    edge_tri : (ne, 2) int array
        Left and right element; right is -1 on the boundary.
    edge_normal : (ne, 2) float array
        Unit normal, left-to-right (outward on the boundary).
    edge_length : (ne,) float array
    edge_kind : (ne,) int8 array of EdgeKind values
    edge_inflow : (ne,) bool array
        Set by classify_edges for boundary edges where the velocity
        enters the domain; False elsewhere.
    """

    def __init__(self, vertices, triangles, geometry=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        self.geometry = geometry

        p0 = self.vertices[self.triangles[:, 0]]
        p1 = self.vertices[self.triangles[:, 1]]
        p2 = self.vertices[self.triangles[:, 2]]
        cross = ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                 - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))
        if np.any(cross <= 0):
            raise ValueError("all triangles must be counterclockwise")
        self.tri_area = 0.5 * cross
        sides = np.stack([np.linalg.norm(p1 - p0, axis=1),
                          np.linalg.norm(p2 - p1, axis=1),
                          np.linalg.norm(p0 - p2, axis=1)])
        self.tri_diameter = sides.max(axis=0)

        self._build_edges()
        self.edge_kind = np.where(self.edge_tri[:, 1] < 0,
                                  np.int8(EdgeKind.NEUMANN),
                                  np.int8(EdgeKind.INTERIOR))
        self.edge_inflow = np.zeros(len(self.edges), dtype=bool)
        self._lock()

    def _build_edges(self):
        nt = len(self.triangles)
        # local edge k of a triangle runs from vertex k to vertex (k+1) % 3
        first = {}
        edges = []
        edge_tri = []
        tri_edges = np.empty((nt, 3), dtype=np.int64)
        for t in range(nt):
            tri = self.triangles[t]
            for k in range(3):
                a, b = int(tri[k]), int(tri[(k + 1) % 3])
                key = (a, b) if a < b else (b, a)
                if key not in first:
                    first[key] = len(edges)
                    edges.append((a, b))
                    edge_tri.append([t, -1])
                else:
                    e = first[key]
                    if edge_tri[e][1] != -1:
                        raise ValueError(f"edge {key} shared by more than two triangles")
                    edge_tri[e][1] = t
                tri_edges[t, k] = first[key]
        self.edges = np.array(edges, dtype=np.int64)
        self.edge_tri = np.array(edge_tri, dtype=np.int64)
        self.tri_edges = tri_edges

        pa = self.vertices[self.edges[:, 0]]
        pb = self.vertices[self.edges[:, 1]]
        tangent = pb - pa
        self.edge_length = np.linalg.norm(tangent, axis=1)
        # CCW traversal in the left element puts its interior on the left of
        # a->b, so the right-hand perpendicular points out of the left element.
        normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
        self.edge_normal = normal / self.edge_length[:, None]
        self.edge_midpoint = 0.5 * (pa + pb)

    def _lock(self):
        for name in ("vertices", "triangles", "tri_area", "tri_diameter",
                     "tri_edges", "edges", "edge_tri", "edge_normal",
                     "edge_length", "edge_midpoint", "edge_kind", "edge_inflow"):
            getattr(self, name).flags.writeable = False

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def interior_edges(self):
        return np.flatnonzero(self.edge_tri[:, 1] >= 0)

    def boundary_edges(self):
        return np.flatnonzero(self.edge_tri[:, 1] < 0)

    def total_area(self) -> float:
        return float(self.tri_area.sum())

    def __repr__(self):
        return (f"Mesh({len(self.vertices)} vertices, {self.n_triangles} triangles, "
                f"{self.n_edges} edges)")


def build_channel_mesh(geom: ChannelGeometry) -> Mesh:
    """Triangulate the channel as 2*nx*ny triangles on a structured grid.

    Each grid rectangle is split along its lower-left to upper-right
    diagonal; the diagonal direction is fixed for reproducibility.
    All boundary edges start out classified as Neumann.
    """
    xs = np.linspace(0.0, geom.length, geom.nx + 1)
    ys = np.linspace(0.0, geom.height, geom.ny + 1)
    xx, yy = np.meshgrid(xs, ys)  # row j = constant y
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    ncol = geom.nx + 1
    tris = []
    for j in range(geom.ny):
        for i in range(geom.nx):
            v00 = j * ncol + i
            v10 = v00 + 1
            v01 = v00 + ncol
            v11 = v01 + 1
            tris.append((v00, v10, v11))  # below the diagonal
            tris.append((v00, v11, v01))  # above the diagonal
    return Mesh(vertices, np.array(tris), geometry=geom)


def classify_edges(mesh: Mesh, dirichlet=None, velocity=None) -> Mesh:
    """Return a copy of the mesh with boundary classes and inflow tags set.

    Parameters
    ----------
    dirichlet : None, "all", or callable
        Selects Dirichlet boundary edges. None leaves every boundary edge
        Neumann; "all" marks them all; a callable receives the (n, 2) array
        of boundary edge midpoints and returns a boolean mask.
    velocity : object with evaluate(points) -> (n, 2), optional
        Used to tag each boundary edge as inflow (V.n < 0 at the midpoint)
        or outflow. Ties (V.n == 0) count as outflow.
    """
    out = Mesh(mesh.vertices, mesh.triangles, geometry=mesh.geometry)
    kind = np.array(out.edge_kind, copy=True)
    inflow = np.zeros(out.n_edges, dtype=bool)

    boundary = out.boundary_edges()
    if dirichlet is not None and len(boundary):
        if dirichlet == "all":
            mask = np.ones(len(boundary), dtype=bool)
        elif callable(dirichlet):
            mask = np.asarray(dirichlet(out.edge_midpoint[boundary]), dtype=bool)
        else:
            raise TypeError("dirichlet must be None, 'all', or a callable")
        kind[boundary[mask]] = EdgeKind.DIRICHLET

    if velocity is not None and len(boundary):
        vel = velocity.evaluate(out.edge_midpoint[boundary])
        vn = np.einsum("ed,ed->e", vel, out.edge_normal[boundary])
        inflow[boundary] = vn < 0.0

    out.edge_kind = kind
    out.edge_inflow = inflow
    out._lock()
    return out


def write_vtk_mesh(mesh: Mesh, path) -> None:
    """Write the triangulation as a legacy ASCII VTK unstructured grid."""
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("channel mesh\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(mesh.vertices)} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r} 0.0\n")
        nt = mesh.n_triangles
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for tri in mesh.triangles:
            fh.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("\n".join(["5"] * nt) + "\n")
