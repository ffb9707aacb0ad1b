import numpy as np
import pytest

from fhncontrol.assembly import ReactionParams, VelocityField
from fhncontrol.dg_core import DgSpace, interpolate
from fhncontrol.fhn_solver import (FhnDiscretization, NewtonConfig, Targets,
                                   TimeGrid, adjoint_solve,
                                   compute_natural_targets, forward_solve)
from fhncontrol.mesh import ChannelGeometry, build_channel_mesh, classify_edges
from fhncontrol.optimizer import (ControlBounds, ControlInner, LineSearchError,
                                  ObjectiveWeights, OptimizeOptions,
                                  adjoint_control_samples, cg_direction,
                                  composite_gradient, evaluate_objective,
                                  line_search, optimize, project_control,
                                  projection_formula, subgradient_lambda)


def make_setup(nx=40, ny=4, n_steps=10, vmax=16.0):
    geom = ChannelGeometry(100.0, 5.0, nx, ny)
    vel = VelocityField.from_max_speed(vmax, 5.0)
    mesh = classify_edges(build_channel_mesh(geom), None, vel)
    space = DgSpace(mesh)
    problem = FhnDiscretization(space, ReactionParams(), vel)
    grid = TimeGrid(1.0, n_steps)
    y0 = interpolate(space, lambda p: np.where(p[:, 0] <= 0.1, 1.0, 0.0)).coeffs
    z0 = np.zeros(space.n_dofs)
    return problem, grid, y0, z0


@pytest.fixture(scope="module")
def coarse():
    problem, grid, y0, z0 = make_setup()
    newton = NewtonConfig(tol_abs=1e-12)
    targets, _ = compute_natural_targets(problem, grid, y0, z0, "space-time",
                                         newton)
    return problem, grid, y0, z0, targets, newton


def test_objective_zero_for_perfect_tracking(coarse):
    problem, grid, y0, z0, targets, newton = coarse
    weights = ObjectiveWeights(track_y=1.0, track_z=1.0)
    traj, _ = forward_solve(problem, grid, None, y0, z0, newton)
    full = Targets(y_dist=traj.first.copy(), z_dist=traj.second.copy())
    smooth, l1, total = evaluate_objective(problem.space, problem.mass, grid,
                                           traj, np.zeros((grid.n_steps,
                                                           problem.space.n_dofs)),
                                           full, weights)
    assert total <= 1e-20
    assert l1 == 0.0


def test_objective_constant_control_analytic(coarse):
    # constant control c: quadratic part (w/2) c^2 |Omega| T, L1 part |c| |Omega| T
    problem, grid, y0, z0, targets, newton = coarse
    weights = ObjectiveWeights(tikhonov=2e-3, l1_weight=0.5)
    c = -0.37
    control = np.full((grid.n_steps, problem.space.n_dofs), c)
    traj, _ = forward_solve(problem, grid, control, np.zeros_like(y0),
                            np.zeros_like(y0), newton)
    smooth, l1, total = evaluate_objective(problem.space, problem.mass, grid,
                                           traj, control, Targets(), weights)
    area_time = 100.0 * 5.0 * 1.0
    assert smooth == pytest.approx(0.5 * 2e-3 * c**2 * area_time, rel=1e-12)
    assert l1 == pytest.approx(abs(c) * area_time, rel=1e-12)
    assert total == pytest.approx(smooth + 0.5 * l1, rel=1e-12)


def test_subgradient_lambda_values():
    # clamp(-p/mu, -1, 1) at sample points
    p = np.array([[0.005, -0.001, 0.0]])
    assert subgradient_lambda(p[:, :1], 1.0 / 200.0)[0, 0] == -1.0
    assert subgradient_lambda(p[:, 1:2], 1.0 / 100.0)[0, 0] == pytest.approx(0.1)
    assert subgradient_lambda(p[:, 2:], 0.5)[0, 0] == 0.0
    with pytest.raises(ValueError):
        subgradient_lambda(p, 0.0)


def test_composite_gradient_plain():
    p = np.array([[1.0, -2.0]])
    u = np.array([[3.0, 4.0]])
    w = ObjectiveWeights()
    assert np.array_equal(composite_gradient(u, p, np.zeros_like(p), w), p)
    w2 = ObjectiveWeights(tikhonov=0.1, l1_weight=2.0)
    lam = np.array([[0.5, -1.0]])
    g = composite_gradient(u, p, lam, w2)
    assert np.allclose(g, 0.1 * u + p + 2.0 * lam)


def test_projection_formula_values():
    bounds = ControlBounds(-0.2, 0.0)
    w = ObjectiveWeights(tikhonov=1e-5)
    lam = np.zeros((1, 1))
    assert projection_formula(np.array([[0.1]]), lam, w, bounds)[0, 0] == -0.2
    assert projection_formula(np.array([[-1e-6]]), lam, w, bounds)[0, 0] == 0.0
    wide = ControlBounds()
    v = np.array([[0.3, -5.0]])
    assert np.array_equal(project_control(v, wide), v)
    with pytest.raises(ValueError):
        projection_formula(np.array([[1.0]]), lam, ObjectiveWeights(), bounds)


def test_cg_direction_variants():
    mass = __import__("scipy.sparse", fromlist=["identity"]).identity(3, format="csr")
    inner = ControlInner(mass, 1.0)
    g = np.array([[1.0, 0.0, 0.0]])
    d0 = -g
    # first iteration convention: caller starts from -g; equal gradients
    d, beta = cg_direction(g, g, d0, "fletcher-reeves", inner)
    assert beta == pytest.approx(1.0)
    d, beta = cg_direction(g, g, d0, "polak-ribiere", inner)
    assert beta == 0.0
    assert np.array_equal(d, -g)
    # orthogonal gradients of equal norm
    g_new = np.array([[0.0, 1.0, 0.0]])
    d, beta = cg_direction(g_new, g, -g, "polak-ribiere", inner)
    assert beta == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cg_direction(g, g, d0, "nonsense", inner)


def test_cg_direction_descent_reset():
    mass = __import__("scipy.sparse", fromlist=["identity"]).identity(2, format="csr")
    inner = ControlInner(mass, 1.0)
    g_new = np.array([[1.0, 0.0]])
    g_old = np.array([[0.5, 0.0]])
    d_old = np.array([[10.0, 0.0]])   # ascent-contaminated history
    d, beta = cg_direction(g_new, g_old, d_old, "fletcher-reeves", inner)
    assert inner.inner(g_new, d) < 0.0
    assert np.array_equal(d, -g_new)


def test_line_search_quadratic_model():
    # scalar objective (u - 1)^2 embedded in the control interface
    import scipy.sparse as sp
    inner = ControlInner(sp.identity(1, format="csr"), 1.0)
    bounds = ControlBounds()

    def evaluate(u):
        val = float((u[0, 0] - 1.0)**2)
        return (val, 0.0, val), None

    u = np.zeros((1, 1))
    g = np.array([[-2.0]])   # gradient at u = 0
    d = -g
    s, u_new, parts, traj, evals = line_search(
        u, d, 1.0, g, evaluate, bounds, inner, s_init=1.0)
    assert parts[2] < 1.0
    assert 0.25 <= s * d[0, 0] <= 2.0


def test_line_search_rejects_zero_direction():
    import scipy.sparse as sp
    inner = ControlInner(sp.identity(1, format="csr"), 1.0)
    with pytest.raises(LineSearchError):
        line_search(np.zeros((1, 1)), np.zeros((1, 1)), 1.0, np.zeros((1, 1)),
                    lambda u: ((0.0, 0.0, 0.0), None), ControlBounds(), inner,
                    s_init=1.0)


def test_gradient_consistency_finite_differences(coarse):
    # adjoint directional derivative vs central differences, 5 directions
    problem, grid, y0, z0, targets, newton = coarse
    weights = ObjectiveWeights(track_y=1.0, track_z=1.0, tikhonov=1e-5)
    inner = ControlInner(problem.mass, grid.tau)
    rng = np.random.default_rng(42)
    u = 0.05 * rng.standard_normal((grid.n_steps, problem.space.n_dofs))

    traj, _ = forward_solve(problem, grid, u, y0, z0, newton)
    adjoint = adjoint_solve(problem, traj, targets, weights)
    p_ctrl = adjoint_control_samples(adjoint)
    g = composite_gradient(u, p_ctrl, np.zeros_like(p_ctrl), weights)

    def objective(control):
        t, _ = forward_solve(problem, grid, control, y0, z0, newton)
        return evaluate_objective(problem.space, problem.mass, grid, t,
                                  control, targets, weights)[2]

    h = 1e-5
    for _ in range(5):
        direction = rng.standard_normal(u.shape)
        fd = (objective(u + h * direction) - objective(u - h * direction)) / (2 * h)
        an = inner.inner(g, direction)
        assert abs(fd - an) <= 1e-4 * abs(an)


def test_optimize_already_optimal(coarse):
    # targets equal the uncontrolled solution: u = 0 is optimal from the start
    problem, grid, y0, z0, _, newton = coarse
    traj, _ = forward_solve(problem, grid, None, y0, z0, newton)
    targets = Targets(y_dist=traj.first.copy(), z_dist=traj.second.copy())
    weights = ObjectiveWeights(track_y=1.0, track_z=1.0, tikhonov=1e-5)
    state = optimize(problem, grid, y0, z0, targets, weights,
                     options=OptimizeOptions(newton=newton))
    assert state.iterations == 0
    assert state.stop_reason == "gradient"
    assert state.objective <= 1e-16


def small_optimize(weights, bounds, coarse, max_iterations=25):
    problem, grid, y0, z0, targets, newton = coarse
    options = OptimizeOptions(max_iterations=max_iterations,
                              tol_objective=1e-6, newton=newton)
    return optimize(problem, grid, y0, z0, targets, weights, bounds, options)


@pytest.fixture(scope="module")
def box_run(coarse):
    weights = ObjectiveWeights(track_y=1.0, track_z=1.0, tikhonov=1e-5)
    return small_optimize(weights, ControlBounds(-0.2, 0.0), coarse)


def test_box_feasibility_exact(box_run):
    assert box_run.control.min() >= -0.2
    assert box_run.control.max() <= 0.0


def test_monotone_descent(box_run):
    js = [row[1] for row in box_run.history]
    assert all(js[i + 1] < js[i] for i in range(len(js) - 1))


def test_iterates_reduce_objective(box_run, coarse):
    problem, grid, y0, z0, targets, newton = coarse
    weights = ObjectiveWeights(track_y=1.0, track_z=1.0, tikhonov=1e-5)
    zero_control = np.zeros_like(box_run.control)
    traj, _ = forward_solve(problem, grid, None, y0, z0, newton)
    j0 = evaluate_objective(problem.space, problem.mass, grid, traj,
                            zero_control, targets, weights)[2]
    assert box_run.objective < j0


@pytest.fixture(scope="module")
def sparse_run(coarse):
    weights = ObjectiveWeights(track_y=1.0, track_z=1.0, tikhonov=1e-5,
                               l1_weight=1.0 / 100.0)
    return small_optimize(weights, ControlBounds(-0.2, 0.0), coarse,
                          max_iterations=40)


def test_lambda_range_and_interior_values(sparse_run):
    mu = 1.0 / 100.0
    lam = sparse_run.lam
    assert lam.min() >= -1.0 and lam.max() <= 1.0
    p_ctrl = adjoint_control_samples(sparse_run.adjoint)
    interior = np.abs(p_ctrl) < mu * (1.0 - 1e-12)
    assert np.allclose(lam[interior], -p_ctrl[interior] / mu, atol=1e-12)


def test_sparse_zero_set(sparse_run):
    # converged control vanishes wherever the multiplier sits in the dead zone
    mu = 1.0 / 100.0
    p_ctrl = adjoint_control_samples(sparse_run.adjoint)
    dead = np.abs(p_ctrl) <= mu - 1e-8
    assert np.abs(sparse_run.control[dead]).max() == 0.0
    # and the sparse term shows up in the reported objective
    assert sparse_run.objective == pytest.approx(
        sparse_run.objective_smooth + mu * sparse_run.objective_l1, rel=1e-12)


def test_optimize_tikhonov_free_subgradient_mode(coarse):
    # with a vanishing quadratic weight the loop still runs on p + mu*lambda
    problem, grid, y0, z0, targets, newton = coarse
    weights = ObjectiveWeights(track_y=1.0, track_z=1.0, tikhonov=0.0,
                               l1_weight=1.0 / 100.0)
    options = OptimizeOptions(max_iterations=5, tol_objective=1e-9,
                              newton=newton)
    state = optimize(problem, grid, y0, z0, targets, weights,
                     ControlBounds(-0.2, 0.0), options)
    assert state.control.min() >= -0.2 and state.control.max() <= 0.0
    js = [row[1] for row in state.history]
    assert js[-1] < js[0]


def test_weights_validation():
    with pytest.raises(ValueError):
        ObjectiveWeights(track_y=-1.0)
    with pytest.raises(ValueError):
        ControlBounds(1.0, -1.0)
    with pytest.raises(ValueError):
        OptimizeOptions(beta_variant="steepest")
