"""Discontinuous piecewise-linear finite elements on triangles.

Fields live in the broken space of linear polynomials: three nodal
coefficients per triangle (values at its vertices), no continuity across
edges. Coefficient vectors are element-major, so element k's values sit in
entries 3k..3k+2, in vertex order.

The quadrature rules are fixed once: a 6-point triangle rule exact for
total degree 4 (enough for a cubic nonlinearity times a linear test
function) and a 3-point edge rule exact for degree 5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.points.flags.writeable = False
        self.weights.flags.writeable = False


def triangle_rule() -> QuadratureRule:
    """6-point rule on the reference triangle, exact for degree <= 4.

    Weights sum to the reference area 1/2.
    """
    a1, b1, w1 = 0.816847572980459, 0.091576213509771, 0.109951743655322
    a2, b2, w2 = 0.108103018168070, 0.445948490915965, 0.223381589678011
    bary = np.array([
        [a1, b1, b1], [b1, a1, b1], [b1, b1, a1],
        [a2, b2, b2], [b2, a2, b2], [b2, b2, a2],
    ])
    points = bary[:, 1:]  # (xi, eta) = (lambda_1, lambda_2)
    weights = 0.5 * np.array([w1, w1, w1, w2, w2, w2])
    return QuadratureRule(points, weights)


def edge_rule() -> QuadratureRule:
    """3-point Gauss rule on [0, 1], exact for degree <= 5. Weights sum to 1."""
    r = 0.5 * np.sqrt(3.0 / 5.0)
    points = np.array([0.5 - r, 0.5, 0.5 + r])
    weights = np.array([5.0, 8.0, 5.0]) / 18.0
    return QuadratureRule(points, weights)


def basis_at(ref_points) -> np.ndarray:
    """Nodal P1 basis values at reference coordinates, shape (n, 3)."""
    pts = np.atleast_2d(ref_points)
    xi, eta = pts[:, 0], pts[:, 1]
    return np.column_stack([1.0 - xi - eta, xi, eta])


class DgSpace:
    """Broken P1 space on a mesh, with precomputed per-element geometry.

    Attributes
    ----------
    mesh : Mesh
    degree : int
        Always 1; the local dimension (degree+1)(degree+2)/2 is kept
        general but only linears are supported.
    n_local, n_elements, n_dofs : int
    grads : (nt, 3, 2) array
        Constant physical gradient of each local basis function.
    quad_tri, quad_edge : QuadratureRule
    quad_points_phys : (nt, q, 2) array
        Triangle quadrature points mapped to each element.
    quad_scale : (nt,) array
        Jacobian determinant of the reference map (= 2 * area).
    """

    def __init__(self, mesh, degree: int = 1):
        if degree != 1:
            raise NotImplementedError("only piecewise-linear elements are supported")
        self.mesh = mesh
        self.degree = degree
        self.n_local = (degree + 1) * (degree + 2) // 2
        self.n_elements = mesh.n_triangles
        self.n_dofs = self.n_local * self.n_elements

        self.quad_tri = triangle_rule()
        self.quad_edge = edge_rule()

        p0 = mesh.vertices[mesh.triangles[:, 0]]
        p1 = mesh.vertices[mesh.triangles[:, 1]]
        p2 = mesh.vertices[mesh.triangles[:, 2]]
        # columns of B map reference coordinates to the element
        b00 = p1[:, 0] - p0[:, 0]
        b01 = p2[:, 0] - p0[:, 0]
        b10 = p1[:, 1] - p0[:, 1]
        b11 = p2[:, 1] - p0[:, 1]
        det = b00 * b11 - b01 * b10
        self.quad_scale = det

        # physical gradients: B^{-T} times the reference gradients
        inv_t00 = b11 / det
        inv_t01 = -b10 / det
        inv_t10 = -b01 / det
        inv_t11 = b00 / det
        ref_grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        grads = np.empty((self.n_elements, 3, 2))
        for j in range(3):
            gx, gy = ref_grads[j]
            grads[:, j, 0] = inv_t00 * gx + inv_t01 * gy
            grads[:, j, 1] = inv_t10 * gx + inv_t11 * gy
        self.grads = grads

        self.basis_quad = basis_at(self.quad_tri.points)  # (q, 3)
        ref = self.quad_tri.points
        self.quad_points_phys = (p0[:, None, :]
                                 + ref[None, :, 0, None] * np.stack([b00, b10], axis=1)[:, None, :]
                                 + ref[None, :, 1, None] * np.stack([b01, b11], axis=1)[:, None, :])

        for arr in (self.grads, self.basis_quad, self.quad_points_phys, self.quad_scale):
            arr.flags.writeable = False

    def element_dofs(self, element: int) -> np.ndarray:
        return 3 * element + np.arange(3)

    def node_coordinates(self) -> np.ndarray:
        """Physical coordinates of all nodal dofs, shape (n_dofs, 2)."""
        return self.mesh.vertices[self.mesh.triangles].reshape(self.n_dofs, 2)

    def zero_field(self) -> "DgField":
        return DgField(self, np.zeros(self.n_dofs))


@dataclass
class DgField:
    """One scalar field at one time instant: a coefficient vector on a space."""

    space: DgSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.n_dofs,):
            raise ValueError(f"expected {self.space.n_dofs} coefficients, "
                             f"got shape {self.coeffs.shape}")

    def by_element(self) -> np.ndarray:
        """View of the coefficients as (n_elements, 3)."""
        return self.coeffs.reshape(self.space.n_elements, 3)

    def eval(self, element: int, ref_point) -> float:
        """Evaluate inside one element at reference coordinates."""
        if not 0 <= element < self.space.n_elements:
            raise IndexError(f"element {element} out of range")
        phi = basis_at(ref_point)[0]
        return float(self.by_element()[element] @ phi)

    def eval_at_quad(self) -> np.ndarray:
        """Values at all triangle quadrature points, shape (nt, q)."""
        return self.by_element() @ self.space.basis_quad.T

    def max_abs(self) -> float:
        """Sup norm; linears attain their extremes at the nodes."""
        return float(np.abs(self.coeffs).max()) if len(self.coeffs) else 0.0


def interpolate(space: DgSpace, f) -> DgField:
    """Nodal interpolation of f(points) -> values."""
    vals = np.asarray(f(space.node_coordinates()), dtype=float)
    return DgField(space, vals)


def project(space: DgSpace, f) -> DgField:
    """Elementwise L2 projection of f(points) -> values, by quadrature.

    With discontinuous initial data this is the right way to seed a field:
    it conserves the quadrature-resolved mass instead of sampling nodes.
    """
    fvals = np.asarray(f(space.quad_points_phys.reshape(-1, 2)), dtype=float)
    fvals = fvals.reshape(space.n_elements, -1)
    w = space.quad_tri.weights
    rhs = np.einsum("q,nq,qj,n->nj", w, fvals, space.basis_quad, space.quad_scale)
    mloc = np.einsum("q,qi,qj->ij", w, space.basis_quad, space.basis_quad)
    local = mloc[None, :, :] * space.quad_scale[:, None, None]
    coeffs = np.linalg.solve(local, rhs[:, :, None])[:, :, 0]
    return DgField(space, coeffs.ravel())


def jump_average(field: DgField, edge: int, s: float):
    """Jump (vector) and average (scalar) of a field across an edge.

    The edge is parameterized by s in [0, 1] from its first stored vertex
    to its second. On an interior edge the jump is v_L*n_L + v_R*n_R and
    the average is (v_L + v_R)/2; on a boundary edge the trace itself is
    the average and the jump is v*n.
    """
    mesh = field.space.mesh
    a, b = mesh.edges[edge]
    pa, pb = mesh.vertices[a], mesh.vertices[b]
    point = pa + s * (pb - pa)
    n = mesh.edge_normal[edge]
    left, right = mesh.edge_tri[edge]

    v_left = _eval_at_physical(field, left, point)
    if right < 0:
        return v_left * n, v_left
    v_right = _eval_at_physical(field, right, point)
    return v_left * n + v_right * (-n), 0.5 * (v_left + v_right)


def _eval_at_physical(field: DgField, element: int, point):
    mesh = field.space.mesh
    tri = mesh.triangles[element]
    p0, p1, p2 = mesh.vertices[tri]
    mat = np.column_stack([p1 - p0, p2 - p0])
    ref = np.linalg.solve(mat, point - p0)
    return field.eval(element, ref)


def l2_norm(field: DgField, mass) -> float:
    """L2 norm over the domain: sqrt(c' M c) with the assembled mass matrix."""
    c = field.coeffs
    if mass.shape != (len(c), len(c)):
        raise ValueError(f"mass matrix shape {mass.shape} does not match "
                         f"field of size {len(c)}")
    return float(np.sqrt(max(c @ (mass @ c), 0.0)))


def save_field_csv(field: DgField, path) -> None:
    """Write coefficients with a space-metadata header."""
    with open(path, "w") as fh:
        fh.write(f"# elements={field.space.n_elements} degree={field.space.degree}\n")
        fh.write("coefficient\n")
        for c in field.coeffs:
            fh.write(f"{float(c)!r}\n")


def load_field_csv(space: DgSpace, path) -> DgField:
    with open(path) as fh:
        header = fh.readline()
        meta = dict(item.split("=") for item in header.lstrip("# ").split())
        if int(meta["elements"]) != space.n_elements:
            raise ValueError(f"file has {meta['elements']} elements, space has "
                             f"{space.n_elements}")
        fh.readline()
        coeffs = np.array([float(line) for line in fh if line.strip()])
    return DgField(space, coeffs)
