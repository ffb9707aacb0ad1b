import numpy as np
import pytest

from fhncontrol.assembly import (ReactionParams, SipgConfig, VelocityField,
                                 assemble_adjoint_operator,
                                 assemble_boundary_load, assemble_couplings,
                                 assemble_mass, assemble_sipg_operator,
                                 nonlinear_jacobian, nonlinear_vector)
from fhncontrol.dg_core import DgField, DgSpace, interpolate
from fhncontrol.mesh import ChannelGeometry, build_channel_mesh, classify_edges

from _manufactured import convergence_orders


@pytest.fixture(scope="module")
def channel():
    geom = ChannelGeometry(100.0, 5.0, 20, 4)
    vel = VelocityField.from_max_speed(16.0, 5.0)
    mesh = classify_edges(build_channel_mesh(geom), None, vel)
    return DgSpace(mesh), vel


def test_velocity_profile():
    vel = VelocityField.from_max_speed(16.0, 5.0)
    assert vel.max_speed == pytest.approx(16.0)
    assert vel.amplitude == pytest.approx(4.0 * 16.0 / 25.0)
    mid = vel.evaluate(np.array([[0.0, 2.5]]))
    assert mid[0, 0] == pytest.approx(16.0)
    assert mid[0, 1] == 0.0
    walls = vel.evaluate(np.array([[3.0, 0.0], [7.0, 5.0]]))
    assert np.abs(walls).max() == 0.0
    assert vel.reversed().evaluate(np.array([[0.0, 2.5]]))[0, 0] == pytest.approx(-16.0)


def test_mass_local_block():
    # any triangle of area 1/2 has the block (1/24) [[2,1,1],[1,2,1],[1,1,2]]
    mesh = build_channel_mesh(ChannelGeometry(1.0, 1.0, 1, 1))
    space = DgSpace(mesh)
    mass = assemble_mass(space).toarray()
    expected = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 24.0
    assert np.allclose(mass[:3, :3], expected, atol=1e-15)
    assert np.allclose(mass[3:, 3:], expected, atol=1e-15)
    assert np.abs(mass[:3, 3:]).max() == 0.0


def test_mass_total_and_scaling():
    geom = ChannelGeometry(100.0, 5.0, 10, 4)
    space = DgSpace(build_channel_mesh(geom))
    mass = assemble_mass(space)
    one = np.ones(space.n_dofs)
    assert one @ (mass @ one) == pytest.approx(500.0, rel=1e-13)

    doubled = ChannelGeometry(200.0, 10.0, 10, 4)
    mass2 = assemble_mass(DgSpace(build_channel_mesh(doubled)))
    assert np.allclose(mass2.toarray(), 4.0 * mass.toarray(), rtol=1e-13)


def test_sipg_pure_diffusion_symmetric(channel):
    space, _ = channel
    cfg = SipgConfig(diffusion=1.0, velocity=VelocityField(0.0, 5.0))
    a = assemble_sipg_operator(space, cfg)
    asym = abs(a - a.T).max()
    assert asym <= 1e-12 * abs(a).max()


def test_sipg_constants_in_kernel(channel):
    space, _ = channel
    cfg = SipgConfig(diffusion=1.0, velocity=VelocityField(0.0, 5.0))
    a = assemble_sipg_operator(space, cfg)
    residual = a @ np.ones(space.n_dofs)
    assert np.abs(residual).max() <= 1e-12 * abs(a).max()


def test_sipg_manufactured_convergence():
    errors, orders = convergence_orders((8, 16, 32))
    assert all(err > 0 for err in errors)
    assert min(orders) >= 1.8


def test_penalty_term_sees_only_jumps(channel):
    space, vel = channel
    base = SipgConfig(diffusion=1.0, velocity=vel, sigma_interior=6.0)
    double = SipgConfig(diffusion=1.0, velocity=vel, sigma_interior=12.0)
    diff = assemble_sipg_operator(space, double) - assemble_sipg_operator(space, base)
    continuous = interpolate(space, lambda p: 1.0 + 0.3 * p[:, 0] - 2.0 * p[:, 1])
    assert np.abs(diff @ continuous.coeffs).max() <= 1e-10
    assert abs(diff - diff.T).max() <= 1e-12 * abs(diff).max()


def test_boundary_load_zero_cases(channel):
    space, vel = channel
    cfg = SipgConfig(diffusion=1.0, velocity=vel)
    assert np.abs(assemble_boundary_load(space, cfg, None)).max() == 0.0
    zero_data = assemble_boundary_load(space, cfg, lambda p: np.zeros(len(p)))
    assert np.abs(zero_data).max() == 0.0


def test_boundary_load_inflow_only(channel):
    # no Dirichlet edges: the load reduces to the weak inflow term
    space, vel = channel
    cfg = SipgConfig(diffusion=1.0, velocity=vel)
    load = assemble_boundary_load(space, cfg, lambda p: np.ones(len(p)))
    nonzero = np.flatnonzero(np.abs(load) > 0)
    xs = space.node_coordinates()[nonzero, 0]
    assert len(nonzero) > 0
    assert xs.max() <= space.mesh.geometry.dx + 1e-12  # inflow face elements only
    assert load[nonzero].min() > 0.0                   # -V.n > 0 there


def test_couplings_scalings(channel):
    space, _ = channel
    params = ReactionParams(epsilon=0.1, c3=5.0)
    c_z, c_y, b_z = assemble_couplings(space, params)
    mass = assemble_mass(space)
    assert abs(c_z - mass).max() == 0.0
    assert np.allclose(c_y.toarray(), -0.5 * mass.toarray(), atol=1e-15)
    assert np.allclose(b_z.toarray(), 0.1 * mass.toarray(), atol=1e-15)

    c_z0, c_y0, b_z0 = assemble_couplings(space, ReactionParams(epsilon=0.0))
    assert abs(c_y0).max() == 0.0
    assert abs(b_z0).max() == 0.0
    one = np.ones(space.n_dofs)
    assert one @ (c_z0 @ one) == pytest.approx(500.0, rel=1e-13)


def test_nonlinear_vector_roots(channel):
    space, _ = channel
    params = ReactionParams()
    for value in (0.0, params.c2, 1.0):
        field = DgField(space, np.full(space.n_dofs, value))
        assert np.abs(nonlinear_vector(field, params)).max() <= 1e-14


def test_nonlinear_vector_midpoint_value(channel):
    # g(0.5) = 9 * 0.5 * 0.48 * (-0.5) = -1.08, constant over the domain
    space, _ = channel
    params = ReactionParams()
    field = DgField(space, np.full(space.n_dofs, 0.5))
    mass = assemble_mass(space)
    expected = -1.08 * (mass @ np.ones(space.n_dofs))
    assert np.allclose(nonlinear_vector(field, params), expected, atol=1e-12)


def test_nonlinear_jacobian_matches_finite_differences(channel):
    space, _ = channel
    params = ReactionParams()
    rng = np.random.default_rng(17)
    y = DgField(space, rng.uniform(-0.2, 1.2, space.n_dofs))
    v = rng.standard_normal(space.n_dofs)
    jac_v = nonlinear_jacobian(y, params) @ v

    errors = []
    deltas = (1e-3, 1e-4, 1e-5, 1e-6)
    for delta in deltas:
        plus = nonlinear_vector(DgField(space, y.coeffs + delta * v), params)
        base = nonlinear_vector(y, params)
        errors.append(np.linalg.norm((plus - base) / delta - jac_v))
    # first-order one-sided differences: error drops linearly with delta
    slopes = [np.log10(errors[i] / errors[i + 1]) for i in range(len(deltas) - 1)]
    assert all(0.7 <= s <= 1.3 for s in slopes)


def test_adjoint_operator_pure_diffusion_identity(channel):
    space, _ = channel
    cfg = SipgConfig(diffusion=1.0, velocity=VelocityField(0.0, 5.0))
    a = assemble_sipg_operator(space, cfg)
    a_adj = assemble_adjoint_operator(space, cfg)
    assert abs(a - a_adj).max() <= 1e-14 * abs(a).max()


def test_adjoint_operator_transpose_duality(channel):
    # with exact quadrature and a divergence-free profile, reversing the
    # velocity transposes the operator, boundary terms included
    space, vel = channel
    cfg = SipgConfig(diffusion=1.0, velocity=vel)
    a = assemble_sipg_operator(space, cfg)
    a_adj = assemble_adjoint_operator(space, cfg)
    assert abs(a_adj - a.T).max() <= 1e-10 * abs(a).max()


def test_adjoint_reaction_weighting_at_zero(channel):
    # g'(0) = c1 * c2 = 0.18: the linearized reaction block is 0.18 * M
    space, _ = channel
    params = ReactionParams()
    mass = assemble_mass(space)
    jac = nonlinear_jacobian(DgField(space, np.zeros(space.n_dofs)), params)
    assert np.allclose(jac.toarray(), 0.18 * mass.toarray(), atol=1e-13)


def test_unclassified_mesh_rejected():
    from fhncontrol.mesh import EdgeKind
    mesh = build_channel_mesh(ChannelGeometry(1.0, 1.0, 2, 2))
    kind = np.array(mesh.edge_kind, copy=True)
    kind[mesh.boundary_edges()] = EdgeKind.INTERIOR
    mesh.edge_kind = kind
    space = DgSpace(mesh)
    cfg = SipgConfig(diffusion=1.0, velocity=VelocityField(0.0, 1.0))
    with pytest.raises(ValueError):
        assemble_sipg_operator(space, cfg)


def test_config_validation():
    vel = VelocityField(1.0, 5.0)
    with pytest.raises(ValueError):
        SipgConfig(diffusion=0.0, velocity=vel)
    with pytest.raises(ValueError):
        SipgConfig(diffusion=1.0, velocity=vel, sigma_interior=0.0)
    with pytest.raises(ValueError):
        ReactionParams(c1=0.0)
    with pytest.raises(ValueError):
        VelocityField(1.0, 5.0, sign=2)
    assert ReactionParams().monostable
