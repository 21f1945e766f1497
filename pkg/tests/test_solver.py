"""Spatial operators, projection, Poisson solve, stepping and residual norms."""
import numpy as np
import pytest

from axiswirl.fields import (
    AxisymField,
    ScalarField,
    SnapshotHistory,
    apply_axis_conditions,
    divergence,
    make_grid,
)
from axiswirl.initial import lamb_oseen_field, lamb_oseen_profile
from axiswirl.solver import (
    AxisymSolver,
    PoissonError,
    ProjectionOperator,
    SolverConfig,
    advect,
    build_divergence_matrix,
    cylindrical_laplacian,
    diffuse_plain,
    diffuse_swirllike,
    kinetic_energy,
    mms_residual,
    momentum_rhs,
    pressure_poisson_solve,
    project,
    stable_dt,
    volume_weights,
)
from axiswirl.validation import lamb_oseen_convergence, lamb_oseen_run

from conftest import rigid_rotation


def interior(arr, m=2):
    return arr[m:-m, m:-m]


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_solver_config_needs_exactly_one_timestep_rule():
    with pytest.raises(ValueError):
        SolverConfig()
    with pytest.raises(ValueError):
        SolverConfig(dt=1e-3, cfl=0.4)
    SolverConfig(dt=1e-3)
    SolverConfig(cfl=0.4)


@pytest.mark.parametrize("kwargs", [
    {"cfl": 0.4, "mu": -1.0},
    {"cfl": 0.4, "projection_tol": 1e-3},
    {"cfl": 0.4, "projection_tol": 0.0},
    {"cfl": 0.4, "boundary": "periodic"},
    {"cfl": 0.4, "snapshot_every": 0},
])
def test_solver_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


# ---------------------------------------------------------------------------
# advection
# ---------------------------------------------------------------------------

def test_advect_zero_drift(grid16):
    b = AxisymField.zeros(grid16)
    f = ScalarField(grid16, np.sin(grid16.r)[:, None] * np.ones(grid16.shape))
    np.testing.assert_allclose(advect(b, f).values, 0.0, atol=1e-14)


def test_advect_linear_profile(grid16):
    # vr = 1, f = r: upwind derivative of a linear function is exact
    b = AxisymField.zeros(grid16)
    b.vr[:] = 1.0
    f = ScalarField(grid16, grid16.r[:, None] * np.ones(grid16.shape))
    got = advect(b, f, parity=-1).values
    np.testing.assert_allclose(interior(got), 1.0, atol=1e-12)


def test_advect_manufactured_profile():
    # f = sin(r) cos(z), vr = r, vz = -2z -> r cos(r) cos(z) + 2z sin(r) sin(z)
    errs = []
    for n in (64, 128):
        g = make_grid(n, n, 2.0, -1.0, 1.0)
        R, Z = np.meshgrid(g.r, g.z, indexing="ij")
        b = AxisymField(g, R.copy(), np.zeros(g.shape), -2.0 * Z)
        f = ScalarField(g, np.sin(R) * np.cos(Z))
        exact = R * np.cos(R) * np.cos(Z) + 2.0 * Z * np.sin(R) * np.sin(Z)
        got = advect(b, f, parity=1).values
        errs.append(float(np.max(np.abs(interior(got - exact)))))
    assert errs[0] < 2e-3
    assert errs[0] / errs[1] > 3.0  # the biased stencil is second order on smooth data


# ---------------------------------------------------------------------------
# diffusion operators
# ---------------------------------------------------------------------------

def test_diffuse_swirllike_rigid_rotation(grid16):
    # (d_rr + d_r/r - 1/r^2) (Omega r) = 0 exactly, node by node
    f = ScalarField(grid16, 0.7 * grid16.r[:, None] * np.ones(grid16.shape))
    got = diffuse_swirllike(f).values
    np.testing.assert_allclose(interior(got, 1), 0.0, atol=1e-11)


def test_diffuse_swirllike_zero(grid16):
    f = ScalarField(grid16, np.zeros(grid16.shape))
    np.testing.assert_allclose(diffuse_swirllike(f).values, 0.0)


def test_diffuse_swirllike_separable_profile():
    # f = r e^{-z^2}: the radial part cancels as for rigid rotation, leaving
    # r (4z^2 - 2) e^{-z^2}; nodal error is second order
    errs = []
    for n in (32, 64):
        g = make_grid(n, n, 2.0, -1.0, 1.0)
        R, Z = np.meshgrid(g.r, g.z, indexing="ij")
        f = ScalarField(g, R * np.exp(-(Z**2)))
        exact = R * (4 * Z**2 - 2) * np.exp(-(Z**2))
        got = diffuse_swirllike(f).values
        errs.append(float(np.max(np.abs(interior(got - exact, 1)))))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_diffuse_plain_constant(grid16):
    f = ScalarField(grid16, np.full(grid16.shape, 2.0))
    np.testing.assert_allclose(diffuse_plain(f).values, 0.0, atol=1e-12)


def test_diffuse_plain_quadratic(grid16):
    # (d_rr + d_r/r) r^2 = 2 + 2 = 4, including the axis row limit
    f = ScalarField(grid16, (grid16.r**2)[:, None] * np.ones(grid16.shape))
    got = diffuse_plain(f).values
    np.testing.assert_allclose(got[:-1, 1:-1], 4.0, atol=1e-10)


def test_diffuse_plain_bessel_like_profile():
    errs = []
    for n in (32, 64):
        g = make_grid(n, n, 2.0, -1.0, 1.0)
        R, Z = np.meshgrid(g.r, g.z, indexing="ij")
        f = ScalarField(g, np.exp(-(R**2)))
        exact = (4 * R**2 - 4) * np.exp(-(R**2))
        got = diffuse_plain(f).values
        errs.append(float(np.max(np.abs((got - exact)[:-1, 1:-1]))))
    assert 3.0 < errs[0] / errs[1] < 5.0


# ---------------------------------------------------------------------------
# momentum right-hand side
# ---------------------------------------------------------------------------

def test_momentum_rhs_zero_state(grid16):
    rhs = momentum_rhs(AxisymField.zeros(grid16))
    np.testing.assert_allclose(rhs.vr, 0.0)
    np.testing.assert_allclose(rhs.vtheta, 0.0)
    np.testing.assert_allclose(rhs.vz, 0.0)


def test_momentum_rhs_rigid_rotation(grid16):
    # pure centrifugal source: rhs_vr = (Omega r)^2 / r, swirl tendency zero
    omega = 0.7
    rhs = momentum_rhs(rigid_rotation(grid16, omega))
    expect = omega**2 * grid16.r[1:-1, None] * np.ones((grid16.nr - 1, grid16.nz - 1))
    np.testing.assert_allclose(rhs.vr[1:-1, 1:-1], expect, atol=1e-10)
    np.testing.assert_allclose(rhs.vtheta, 0.0, atol=1e-10)
    np.testing.assert_allclose(rhs.vz, 0.0, atol=1e-12)


def test_momentum_rhs_lamb_oseen_heat_operator():
    # with vr = vz = 0 the swirl tendency reduces to the analytic time
    # derivative of the diffusing-vortex profile; second-order convergent
    circ, nu, t = 1.0, 1.0, 0.5
    errs = []
    for n in (64, 128):
        g = make_grid(n, n, 6.0, -1.0, 1.0)
        fld = lamb_oseen_field(circ, nu, t, g)
        rhs = momentum_rhs(fld, mu=nu)
        r = g.r[1:-1]
        # d/dt of (circ/2 pi r)(1 - e^{-r^2/4 nu t})
        exact = -circ / (2 * np.pi * r) * np.exp(-(r**2) / (4 * nu * t)) * (
            r**2 / (4 * nu * t**2)
        )
        # measured away from the axis: the (1/r) d_r stencil is only
        # first-order consistent at the very first node off the axis
        keep = r >= 0.5
        err = np.max(np.abs(rhs.vtheta[1:-1, 1:-1] - exact[:, None])[keep])
        errs.append(float(err))
    assert 3.0 < errs[0] / errs[1] < 5.0


# ---------------------------------------------------------------------------
# Poisson solve and projection
# ---------------------------------------------------------------------------

def test_pressure_poisson_zero_rhs(grid32):
    rhs = ScalarField(grid32, np.zeros(grid32.shape))
    p = pressure_poisson_solve(rhs)
    np.testing.assert_allclose(p.values, 0.0)


def test_pressure_poisson_operator_roundtrip(grid32):
    z_span = grid32.z_max - grid32.z_min
    p_exact = np.cos(np.pi * (grid32.z[None, :] - grid32.z_min) / z_span) * np.ones(grid32.shape)
    rhs = cylindrical_laplacian(ScalarField(grid32, p_exact))
    p = pressure_poisson_solve(rhs, tol=1e-10)
    w = volume_weights(grid32)
    p_exact = p_exact - np.sum(w * p_exact) / np.sum(w)
    np.testing.assert_allclose(p.values, p_exact, atol=1e-8)


def test_pressure_poisson_random_rhs_residual(grid32):
    rng = np.random.default_rng(19)
    raw = rng.normal(size=grid32.shape)
    tol = 1e-10
    p = pressure_poisson_solve(ScalarField(grid32, raw), tol=tol)
    w = volume_weights(grid32).ravel()
    b = raw.ravel() - np.sum(w * raw.ravel()) / np.sum(w)
    lap = cylindrical_laplacian(p).values.ravel()
    assert np.linalg.norm(lap - b) / np.linalg.norm(b) <= tol
    # zero weighted mean normalization
    assert abs(np.sum(w * p.values.ravel())) <= 1e-8 * np.abs(p.values).max()


def test_divergence_matrix_matches_operator(grid16):
    rng = np.random.default_rng(23)
    fld = AxisymField.zeros(grid16)
    fld.vr = rng.normal(size=grid16.shape)
    fld.vz = rng.normal(size=grid16.shape)
    D = build_divergence_matrix(grid16)
    stacked = np.concatenate([fld.vr.ravel(), fld.vz.ravel()])
    np.testing.assert_allclose(
        (D @ stacked).reshape(grid16.shape), divergence(fld).values, atol=1e-12
    )


def test_project_swirl_only_unchanged(grid16):
    fld = apply_axis_conditions(rigid_rotation(grid16))
    out, p = project(fld, dt=1e-3)
    np.testing.assert_allclose(out.vr, fld.vr, atol=1e-14)
    np.testing.assert_allclose(out.vz, fld.vz, atol=1e-14)
    np.testing.assert_allclose(out.vtheta, fld.vtheta)


def test_project_removes_radial_divergence(grid16):
    # vr = r has divergence 2 everywhere; the projection must clean it to the
    # configured bound at every node, boundary rows included
    fld = AxisymField.zeros(grid16)
    fld.vr = grid16.r[:, None] * np.ones(grid16.shape)
    fld = apply_axis_conditions(fld)
    fld.vr[-1, :] = 0.0
    fld.vr[:, 0] = 0.0
    fld.vr[:, -1] = 0.0
    tol = 1e-10
    out, p = project(fld, dt=1e-2, tol=tol)
    sup = float(np.max(np.abs(divergence(out).values)))
    assert sup <= 10 * tol


def test_project_divergence_free_fixed_point(grid32, ring_field):
    fld = ring_field.copy()
    op = ProjectionOperator(grid32)
    once, _ = op.project(fld, dt=1e-3)
    twice, p2 = op.project(once, dt=1e-3)
    np.testing.assert_allclose(twice.vr, once.vr, atol=1e-10)
    np.testing.assert_allclose(twice.vz, once.vz, atol=1e-10)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def test_stable_dt_limits():
    g = make_grid(32, 32, 4.0, -4.0, 4.0)
    slow = stable_dt(g, mu=1.0, cfl=0.4, qmax=0.0)
    assert slow == pytest.approx(0.35 / (2.0 * (1 / g.dr**2 + 1 / g.dz**2)))
    fast = stable_dt(g, mu=1e-6, cfl=0.4, qmax=10.0)
    assert fast == pytest.approx(0.4 * g.dr / 10.0)


def test_step_zero_state_fixed_point(grid16):
    solver = AxisymSolver(AxisymField.zeros(grid16), SolverConfig(cfl=0.4, t_end=1.0))
    for _ in range(3):
        solver.step()
    np.testing.assert_allclose(solver.state.vr, 0.0)
    np.testing.assert_allclose(solver.state.vtheta, 0.0)
    np.testing.assert_allclose(solver.state.vz, 0.0)


def test_fixed_dt_above_stability_rejected(grid16):
    cfg = SolverConfig(dt=1.0, t_end=1.0)
    solver = AxisymSolver(AxisymField.zeros(grid16), cfg)
    with pytest.raises(ValueError, match="stability"):
        solver.step()


def test_step_lamb_oseen_convergence_small():
    conv = lamb_oseen_convergence((32, 64), t_end=0.1)
    assert 3.0 < conv["ratios"][0] < 5.0


def test_step_energy_decays():
    solver, _ = lamb_oseen_run(32, 32, 0.05, r_max=4.0, z_half=4.0)
    recs = solver.diagnostics
    solver.record_diagnostics()
    e0 = kinetic_energy(solver.history.snapshots[0].field)
    e1 = kinetic_energy(solver.state)
    assert e1 < e0
    # oracle: the analytic profile at the two times gives the same drop
    g = solver.state.grid
    w = volume_weights(g)
    drop = 0.0
    for t, sign in ((0.5, 1.0), (0.5 + solver.t, -1.0)):
        prof = lamb_oseen_profile(g.r, 1.0, 1.0, t)
        drop += sign * float(2 * np.pi * 0.5 * np.sum(w * prof[:, None] ** 2))
    assert (e0 - e1) == pytest.approx(drop, rel=5e-2)


def test_snapshot_cadence(grid16):
    hist = SnapshotHistory()
    solver = AxisymSolver(AxisymField.zeros(grid16),
                          SolverConfig(cfl=0.4, t_end=1.0, snapshot_every=3),
                          history=hist)
    for _ in range(7):
        solver.step()
    # initial push plus steps 3 and 6
    assert len(hist) == 3


# ---------------------------------------------------------------------------
# residual norms on snapshot sequences
# ---------------------------------------------------------------------------

def _analytic_history(grid, times, circ=1.0, nu=1.0):
    hist = SnapshotHistory()
    for t in times:
        fld = lamb_oseen_field(circ, nu, t, grid)
        hist.push(t, fld, ScalarField(grid, np.zeros(grid.shape), role="pressure"))
    return hist


def test_mms_residual_needs_three_snapshots(grid16):
    hist = _analytic_history(grid16, [0.5, 0.51])
    with pytest.raises(ValueError):
        mms_residual(hist)


def test_mms_residual_constant_axial_flow(grid16):
    hist = SnapshotHistory()
    for t in (0.0, 0.1, 0.2):
        fld = AxisymField.zeros(grid16)
        fld.vz[:] = 1.5
        hist.push(t, fld, ScalarField(grid16, np.zeros(grid16.shape), role="pressure"))
    res = mms_residual(hist)
    for eq in ("vr", "vtheta", "vz", "div"):
        assert res[eq]["sup"] == 0.0


def test_mms_residual_analytic_snapshots_refine():
    # weighted L2: the near-axis first-order sliver carries vanishing volume
    norms = []
    for n in (32, 64):
        g = make_grid(n, n, 6.0, -2.0, 2.0)
        dt = 1e-3 / (n / 32) ** 2
        hist = _analytic_history(g, [0.5 - dt, 0.5, 0.5 + dt])
        norms.append(mms_residual(hist)["vtheta"]["l2"])
    assert 3.0 < norms[0] / norms[1] < 5.5


def test_mms_residual_solver_snapshots_refine():
    norms = []
    for n in (32, 64):
        solver, _ = lamb_oseen_run(n, n, 0.02, r_max=4.0, z_half=4.0, snapshot_every=1)
        hist = solver.history
        window = (hist.times[-4], hist.times[-1])
        norms.append(mms_residual(hist, window=window)["vtheta"]["l2"])
    assert norms[0] / norms[1] > 3.0
