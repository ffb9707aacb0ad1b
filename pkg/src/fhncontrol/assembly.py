"""Matrix and vector assembly for the interior-penalty discretization.

Builds every operator of the coupled activator/inhibitor system: the mass
matrix, the symmetric-interior-penalty diffusion operator with upwinded
convection, boundary load vectors, the mass-proportional coupling
matrices, and the cubic reaction vector with its exact Jacobian.

Face terms follow the standard SIPG layout: consistency and symmetry
terms plus a penalty sigma*d/h_E on solution jumps over interior and
Dirichlet edges; convection is stabilized by upwind jump terms on each
element's inflow faces and a weak inflow-boundary term. The velocity is
always evaluated analytically at quadrature points, so its divergence is
exactly zero and the reversed-velocity operator is the exact transpose of
the forward one (tested; the adjoint sweep relies on it).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .dg_core import DgField, DgSpace
from .mesh import EdgeKind
from .sparse_linalg import as_csr


@dataclass(frozen=True)
class VelocityField:
    """Parabolic channel profile: V = (sign * a * x2 * (H - x2), 0).

    Divergence-free by construction. sign=-1 gives the reversed transport
    used by the backward-in-time sweep.
    """

    amplitude: float
    height: float
    sign: int = 1

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")

    @classmethod
    def from_max_speed(cls, v_max: float, height: float, sign: int = 1):
        # peak of a*x2*(H - x2) sits at x2 = H/2 with value a*H^2/4
        return cls(amplitude=4.0 * v_max / height**2, height=height, sign=sign)

    @property
    def max_speed(self) -> float:
        return self.amplitude * self.height**2 / 4.0

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        x2 = pts[:, 1]
        out = np.zeros_like(pts)
        out[:, 0] = self.sign * self.amplitude * x2 * (self.height - x2)
        return out

    def reversed(self) -> "VelocityField":
        return replace(self, sign=-self.sign)


@dataclass(frozen=True)
class ReactionParams:
    """Cubic activator kinetics g(y) = c1*y*(y - c2)*(y - 1) and the linear
    inhibitor relaxation rate epsilon, coupling strength c3."""

    c1: float = 9.0
    c2: float = 0.02
    c3: float = 5.0
    epsilon: float = 0.1

    def __post_init__(self):
        if self.c1 <= 0:
            raise ValueError("c1 must be positive")

    @property
    def monostable(self) -> bool:
        return 0.0 < self.c1 < 20.0 and self.c2 == 0.02

    def g(self, y):
        return self.c1 * y * (y - self.c2) * (y - 1.0)

    def g_prime(self, y):
        return self.c1 * (3.0 * y**2 - 2.0 * (1.0 + self.c2) * y + self.c2)


@dataclass(frozen=True)
class SipgConfig:
    """Penalty weights, diffusion coefficient, and velocity for one field."""

    diffusion: float
    velocity: VelocityField
    sigma_interior: float = 6.0
    sigma_boundary: float = 12.0

    def __post_init__(self):
        if self.sigma_interior <= 0 or self.sigma_boundary <= 0:
            raise ValueError("penalty parameters must be positive")
        if self.diffusion <= 0:
            raise ValueError("diffusion coefficient must be positive")


def assemble_mass(space: DgSpace) -> sp.csr_matrix:
    """Block-diagonal SPD mass matrix, one 3x3 block per element."""
    base = np.array([[2.0, 1.0, 1.0],
                     [1.0, 2.0, 1.0],
                     [1.0, 1.0, 2.0]]) / 12.0
    blocks = space.mesh.tri_area[:, None, None] * base[None, :, :]
    rows, cols = _block_diag_pattern(space.n_elements)
    return as_csr(sp.coo_matrix((blocks.ravel(), (rows, cols)),
                                shape=(space.n_dofs, space.n_dofs)))


def _block_diag_pattern(n_elements: int):
    dofs = np.arange(3 * n_elements).reshape(n_elements, 3)
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    return rows, cols


def _edge_traces(mesh, edge_ids, tri_ids, s):
    """Local basis traces of the given triangles along the given edges.

    Returns (ne, nq, 3); entry [e, q, j] is basis function j of triangle
    tri_ids[e] at the point a + s_q*(b - a) of edge edge_ids[e]. The same
    endpoint order is used for both sides of an interior edge so the
    quadrature points of the two traces coincide.
    """
    a = mesh.edges[edge_ids, 0]
    b = mesh.edges[edge_ids, 1]
    tris = mesh.triangles[tri_ids]
    la = np.argmax(tris == a[:, None], axis=1)
    lb = np.argmax(tris == b[:, None], axis=1)
    ne, nq = len(edge_ids), len(s)
    tr = np.zeros((ne, nq, 3))
    e_idx = np.arange(ne)[:, None]
    q_idx = np.arange(nq)[None, :]
    tr[e_idx, q_idx, la[:, None]] = 1.0 - s[None, :]
    tr[e_idx, q_idx, lb[:, None]] = s[None, :]
    return tr


def _edge_quad_geometry(space, edge_ids):
    """Physical quadrature points, weights*length, and midpoint V.n sign data."""
    mesh = space.mesh
    s = space.quad_edge.points
    w = space.quad_edge.weights
    pa = mesh.vertices[mesh.edges[edge_ids, 0]]
    pb = mesh.vertices[mesh.edges[edge_ids, 1]]
    pts = pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]
    dsw = mesh.edge_length[edge_ids][:, None] * w[None, :]
    return s, pts, dsw


def _conv_normal(cfg, points, normals):
    """V.n at edge quadrature points, shape (ne, nq)."""
    vel = cfg.velocity.evaluate(points.reshape(-1, 2)).reshape(points.shape)
    return np.einsum("eqd,ed->eq", vel, normals)


def assemble_sipg_operator(space: DgSpace, cfg: SipgConfig) -> sp.csr_matrix:
    """Stiffness operator: diffusion with interior penalty plus upwinded
    convection, for one scalar field.

    Requires a classified mesh (every boundary edge Dirichlet or Neumann).
    """
    mesh = space.mesh
    _check_classification(mesh)
    d = cfg.diffusion
    rows_all, cols_all, data_all = [], [], []

    # volume terms: d * grad(v).grad(w) + (V.grad v) w
    grads = space.grads
    area = mesh.tri_area
    vol = d * area[:, None, None] * np.einsum("njd,nmd->njm", grads, grads)
    # convection: trial gradient against test value, velocity at quad points
    vel = cfg.velocity.evaluate(space.quad_points_phys.reshape(-1, 2))
    vel = vel.reshape(space.n_elements, -1, 2)
    vg = np.einsum("nqd,njd->nqj", vel, grads)  # V.grad(phi_j)
    wq = space.quad_tri.weights
    conv = np.einsum("q,n,nqj,qm->nmj", wq, space.quad_scale, vg, space.basis_quad)
    vol += conv  # both indexed (element, test, trial)
    rows, cols = _block_diag_pattern(space.n_elements)
    rows_all.append(rows)
    cols_all.append(cols)
    data_all.append(vol.reshape(-1))

    interior = mesh.interior_edges()
    if len(interior):
        r, c, v = _interior_face_terms(space, cfg, interior)
        rows_all.append(r)
        cols_all.append(c)
        data_all.append(v)

    boundary = mesh.boundary_edges()
    dirichlet = boundary[mesh.edge_kind[boundary] == EdgeKind.DIRICHLET]
    if len(dirichlet):
        r, c, v = _dirichlet_face_terms(space, cfg, dirichlet)
        rows_all.append(r)
        cols_all.append(c)
        data_all.append(v)

    r, c, v = _inflow_boundary_terms(space, cfg, boundary)
    if len(r):
        rows_all.append(r)
        cols_all.append(c)
        data_all.append(v)

    return as_csr(sp.coo_matrix(
        (np.concatenate(data_all),
         (np.concatenate(rows_all), np.concatenate(cols_all))),
        shape=(space.n_dofs, space.n_dofs)))


def _check_classification(mesh):
    kinds = mesh.edge_kind
    interior = mesh.interior_edges()
    boundary = mesh.boundary_edges()
    if np.any(kinds[interior] != EdgeKind.INTERIOR):
        raise ValueError("interior edge carries a boundary classification")
    if np.any(kinds[boundary] == EdgeKind.INTERIOR):
        raise ValueError("boundary edge left unclassified")


def _interior_face_terms(space, cfg, interior):
    mesh = space.mesh
    d = cfg.diffusion
    left = mesh.edge_tri[interior, 0]
    right = mesh.edge_tri[interior, 1]
    normals = mesh.edge_normal[interior]
    h = mesh.edge_length[interior]

    s, pts, dsw = _edge_quad_geometry(space, interior)
    tr_l = _edge_traces(mesh, interior, left, s)
    tr_r = _edge_traces(mesh, interior, right, s)

    # test/trial jump coefficients in the 6-dof block [left, right]
    jump = np.concatenate([tr_l, -tr_r], axis=2)  # (e, q, 6)
    # averaged normal flux of each of the 6 basis functions (constant on edge)
    gn_l = np.einsum("ejd,ed->ej", space.grads[left], normals)
    gn_r = np.einsum("ejd,ed->ej", space.grads[right], normals)
    gn6 = 0.5 * d * np.concatenate([gn_l, gn_r], axis=1)  # (e, 6)

    jump_w = np.einsum("eq,eqi->ei", dsw, jump)
    penalty = (cfg.sigma_interior * d / h)[:, None, None] \
        * np.einsum("eq,eqi,eqj->eij", dsw, jump, jump)
    consistency = -np.einsum("ei,ej->eij", jump_w, gn6)
    blocks = penalty + consistency + consistency.transpose(0, 2, 1)

    dof6 = np.concatenate([3 * left[:, None] + np.arange(3),
                           3 * right[:, None] + np.arange(3)], axis=1)
    rows = np.repeat(dof6, 6, axis=1).ravel()
    cols = np.tile(dof6, (1, 6)).ravel()
    data = blocks.ravel()

    # upwind jump terms on each element's inflow faces (midpoint sign
    # decides the side; V.n == 0 contributes nothing either way)
    vn = _conv_normal(cfg, pts, normals)
    vn_mid = np.einsum("ed,ed->e",
                       cfg.velocity.evaluate(mesh.edge_midpoint[interior]),
                       normals)
    up_rows, up_cols, up_data = [], [], []
    for downwind_is_left in (True, False):
        mask = vn_mid < 0.0 if downwind_is_left else vn_mid > 0.0
        if not np.any(mask):
            continue
        tr_dw = tr_l[mask] if downwind_is_left else tr_r[mask]
        # integrand vn * (v_right - v_left) * w_downwind for both sides
        blk = np.einsum("eq,eq,eqi,eqj->eij", dsw[mask], vn[mask], tr_dw,
                        -jump[mask])
        dof_dw = 3 * (left if downwind_is_left else right)[mask][:, None] + np.arange(3)
        up_rows.append(np.repeat(dof_dw, 6, axis=1).ravel())
        up_cols.append(np.tile(dof6[mask], (1, 3)).ravel())
        up_data.append(blk.ravel())

    if up_rows:
        rows = np.concatenate([rows] + up_rows)
        cols = np.concatenate([cols] + up_cols)
        data = np.concatenate([data] + up_data)
    return rows, cols, data


def _dirichlet_face_terms(space, cfg, dirichlet):
    mesh = space.mesh
    d = cfg.diffusion
    owner = mesh.edge_tri[dirichlet, 0]
    normals = mesh.edge_normal[dirichlet]
    h = mesh.edge_length[dirichlet]

    s, pts, dsw = _edge_quad_geometry(space, dirichlet)
    tr = _edge_traces(mesh, dirichlet, owner, s)
    gn = d * np.einsum("ejd,ed->ej", space.grads[owner], normals)

    tr_w = np.einsum("eq,eqi->ei", dsw, tr)
    penalty = (cfg.sigma_boundary * d / h)[:, None, None] \
        * np.einsum("eq,eqi,eqj->eij", dsw, tr, tr)
    consistency = -np.einsum("ei,ej->eij", tr_w, gn)
    blocks = penalty + consistency + consistency.transpose(0, 2, 1)

    dof = 3 * owner[:, None] + np.arange(3)
    rows = np.repeat(dof, 3, axis=1).ravel()
    cols = np.tile(dof, (1, 3)).ravel()
    return rows, cols, blocks.ravel()


def _inflow_boundary_terms(space, cfg, boundary):
    """-int_{inflow boundary} (V.n) v w over edges where V.n < 0."""
    mesh = space.mesh
    if not len(boundary):
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0)
    normals = mesh.edge_normal[boundary]
    vn_mid = np.einsum("ed,ed->e",
                       cfg.velocity.evaluate(mesh.edge_midpoint[boundary]),
                       normals)
    inflow = boundary[vn_mid < 0.0]
    if not len(inflow):
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0)

    owner = mesh.edge_tri[inflow, 0]
    normals = mesh.edge_normal[inflow]
    s, pts, dsw = _edge_quad_geometry(space, inflow)
    tr = _edge_traces(mesh, inflow, owner, s)
    vn = _conv_normal(cfg, pts, normals)
    blocks = -np.einsum("eq,eq,eqi,eqj->eij", dsw, vn, tr, tr)

    dof = 3 * owner[:, None] + np.arange(3)
    rows = np.repeat(dof, 3, axis=1).ravel()
    cols = np.tile(dof, (1, 3)).ravel()
    return rows, cols, blocks.ravel()


def assemble_boundary_load(space: DgSpace, cfg: SipgConfig, dirichlet_data=None) -> np.ndarray:
    """Load vector from Dirichlet data (penalty and consistency) and from
    prescribed values on the inflow boundary.

    dirichlet_data maps an (n, 2) point array to values; None means
    homogeneous data, which yields the zero vector.
    """
    rhs = np.zeros(space.n_dofs)
    if dirichlet_data is None:
        return rhs
    mesh = space.mesh
    d = cfg.diffusion

    boundary = mesh.boundary_edges()
    dirichlet = boundary[mesh.edge_kind[boundary] == EdgeKind.DIRICHLET]
    if len(dirichlet):
        owner = mesh.edge_tri[dirichlet, 0]
        normals = mesh.edge_normal[dirichlet]
        h = mesh.edge_length[dirichlet]
        s, pts, dsw = _edge_quad_geometry(space, dirichlet)
        tr = _edge_traces(mesh, dirichlet, owner, s)
        gn = d * np.einsum("ejd,ed->ej", space.grads[owner], normals)
        gd = np.asarray(dirichlet_data(pts.reshape(-1, 2)), dtype=float)
        gd = gd.reshape(len(dirichlet), -1)
        pen = (cfg.sigma_boundary * d / h)[:, None] \
            * np.einsum("eq,eq,eqi->ei", dsw, gd, tr)
        cons = -np.einsum("eq,eq->e", dsw, gd)[:, None] * gn
        np.add.at(rhs, (3 * owner[:, None] + np.arange(3)).ravel(),
                  (pen + cons).ravel())

    normals = mesh.edge_normal[boundary]
    vn_mid = np.einsum("ed,ed->e",
                       cfg.velocity.evaluate(mesh.edge_midpoint[boundary]),
                       normals)
    inflow = boundary[vn_mid < 0.0]
    if len(inflow):
        owner = mesh.edge_tri[inflow, 0]
        normals = mesh.edge_normal[inflow]
        s, pts, dsw = _edge_quad_geometry(space, inflow)
        tr = _edge_traces(mesh, inflow, owner, s)
        vn = _conv_normal(cfg, pts, normals)
        gd = np.asarray(dirichlet_data(pts.reshape(-1, 2)), dtype=float)
        gd = gd.reshape(len(inflow), -1)
        contrib = -np.einsum("eq,eq,eq,eqi->ei", dsw, vn, gd, tr)
        np.add.at(rhs, (3 * owner[:, None] + np.arange(3)).ravel(), contrib.ravel())
    return rhs


def assemble_couplings(space: DgSpace, params: ReactionParams):
    """Mass-proportional coupling matrices.

    Returns (C_z, C_y, B_z): the inhibitor's appearance in the activator
    equation (+M), the activator's appearance in the inhibitor equation
    (-epsilon*c3*M), and the inhibitor's own relaxation (+epsilon*M).
    """
    mass = assemble_mass(space)
    return mass, as_csr(-params.epsilon * params.c3 * mass), as_csr(params.epsilon * mass)


def nonlinear_vector(y: DgField, params: ReactionParams) -> np.ndarray:
    """Integrals of g(y_h) against each test function, degree-4 quadrature."""
    space = y.space
    yq = y.eval_at_quad()
    gq = params.g(yq)
    w = space.quad_tri.weights
    vec = np.einsum("q,n,nq,qj->nj", w, space.quad_scale, gq, space.basis_quad)
    return vec.ravel()


def nonlinear_jacobian(y: DgField, params: ReactionParams) -> sp.csr_matrix:
    """Exact derivative of nonlinear_vector: blocks of g'(y_h) phi_i phi_j."""
    space = y.space
    data = nonlinear_jacobian_blocks(y, params)
    rows, cols = _block_diag_pattern(space.n_elements)
    return as_csr(sp.coo_matrix((data.ravel(), (rows, cols)),
                                shape=(space.n_dofs, space.n_dofs)))


def nonlinear_jacobian_blocks(y: DgField, params: ReactionParams) -> np.ndarray:
    """Per-element 3x3 Jacobian blocks, shape (n_elements, 3, 3)."""
    space = y.space
    yq = y.eval_at_quad()
    dgq = params.g_prime(yq)
    w = space.quad_tri.weights
    return np.einsum("q,n,nq,qi,qj->nij", w, space.quad_scale, dgq,
                     space.basis_quad, space.basis_quad)


def assemble_adjoint_operator(space: DgSpace, cfg: SipgConfig) -> sp.csr_matrix:
    """Stiffness operator for the backward sweep: same diffusion and
    penalties, transport reversed. Equals the transpose of the forward
    operator because the velocity is divergence-free and all face
    integrals are exact."""
    return assemble_sipg_operator(space, replace(cfg, velocity=cfg.velocity.reversed()))


def adjoint_couplings(space: DgSpace, params: ReactionParams):
    """Returns (C_q, B_q, C_p): transposed counterparts of the forward
    couplings, entering the backward system."""
    mass = assemble_mass(space)
    return as_csr(-params.epsilon * params.c3 * mass), as_csr(params.epsilon * mass), mass


def adjoint_tracking_load(mass, weight: float, target: np.ndarray) -> np.ndarray:
    """Constant part of the backward right-hand side, -weight * M * target."""
    if weight == 0.0:
        return np.zeros(mass.shape[0])
    return -weight * (mass @ target)
