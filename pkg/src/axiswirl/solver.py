"""Time integration of the axisymmetric Navier-Stokes system with swirl.

Explicit Heun (RK2) on the pressure-free momentum tendencies, with a pressure
projection after each stage.  The projection uses the discrete-adjoint gradient
of the divergence operator, so the post-projection divergence equals the
Poisson solve residual (times dt) at every node, boundary rows included.

Axis terms (1/r, 1/r^2) are handled by parity ghosts; r is never clamped.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import (
    AxisymField,
    Grid,
    ScalarField,
    Snapshot,
    SnapshotHistory,
    apply_axis_conditions,
    divergence,
)


class PoissonError(RuntimeError):
    """Pressure solve failed to reach the requested residual."""

    def __init__(self, msg: str, achieved: float):
        super().__init__(msg)
        self.achieved = achieved


class UnstableError(RuntimeError):
    """NaN/Inf detected during time stepping."""

    def __init__(self, msg: str, t: float):
        super().__init__(msg)
        self.t = t


@dataclass
class SolverConfig:
    mu: float = 1.0
    dt: float | None = None
    cfl: float | None = None
    t_end: float = 1.0
    projection_tol: float = 1e-10
    snapshot_every: int = 1
    boundary: str = "dirichlet0"  # "dirichlet0" | "hold"
    poisson_max_iter: int = 10_000

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"viscosity must be positive, got {self.mu}")
        if (self.dt is None) == (self.cfl is None):
            raise ValueError("exactly one of dt / cfl must be given")
        if not (0 < self.projection_tol <= 1e-4):
            raise ValueError(f"projection_tol must lie in (0, 1e-4], got {self.projection_tol}")
        if self.boundary not in ("dirichlet0", "hold"):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")


# ---------------------------------------------------------------------------
# spatial operators
# ---------------------------------------------------------------------------

def _pad_r(f: np.ndarray, parity: int) -> np.ndarray:
    """Pad 2 ghost rows at the axis (parity) and 2 extrapolated rows outside r_max."""
    n = f.shape[0]
    out = np.empty((n + 4, f.shape[1]))
    out[2:-2] = f
    out[1] = parity * f[1]
    out[0] = parity * f[2]
    out[-2] = 3 * f[-1] - 3 * f[-2] + f[-3]
    out[-1] = 3 * out[-2] - 3 * f[-1] + f[-2]
    return out


def _pad_z(f: np.ndarray) -> np.ndarray:
    """Pad 2 quadratically extrapolated ghost columns on both z ends."""
    n = f.shape[1]
    out = np.empty((f.shape[0], n + 4))
    out[:, 2:-2] = f
    out[:, 1] = 3 * f[:, 0] - 3 * f[:, 1] + f[:, 2]
    out[:, 0] = 3 * out[:, 1] - 3 * f[:, 0] + f[:, 1]
    out[:, -2] = 3 * f[:, -1] - 3 * f[:, -2] + f[:, -3]
    out[:, -1] = 3 * out[:, -2] - 3 * f[:, -1] + f[:, -2]
    return out


def advect(b: AxisymField, f: ScalarField, parity: int = 1) -> ScalarField:
    """Upwind evaluation of b.grad f = vr d_r f + vz d_z f (second-order biased).

    ``parity`` gives the axis symmetry of f (+1 even, -1 odd) for the ghost rows.
    """
    g = f.grid
    dr, dz = g.dr, g.dz
    vals = f.values
    vr, vz = b.vr, b.vz

    fr = _pad_r(vals, parity)  # index i+2 == physical i
    back_r = (3 * fr[2:-2] - 4 * fr[1:-3] + fr[:-4]) / (2 * dr)
    fwd_r = (-3 * fr[2:-2] + 4 * fr[3:-1] - fr[4:]) / (2 * dr)
    d_r = np.where(vr > 0, back_r, np.where(vr < 0, fwd_r, 0.5 * (back_r + fwd_r)))

    fz = _pad_z(vals)
    back_z = (3 * fz[:, 2:-2] - 4 * fz[:, 1:-3] + fz[:, :-4]) / (2 * dz)
    fwd_z = (-3 * fz[:, 2:-2] + 4 * fz[:, 3:-1] - fz[:, 4:]) / (2 * dz)
    d_z = np.where(vz > 0, back_z, np.where(vz < 0, fwd_z, 0.5 * (back_z + fwd_z)))

    return ScalarField(g, vr * d_r + vz * d_z, role="generic")


def diffuse_swirllike(f: ScalarField) -> ScalarField:
    """[d_rr + (1/r) d_r - 1/r^2 + d_zz] f for a field odd at the axis (f(0,z)=0)."""
    g = f.grid
    dr, dz = g.dr, g.dz
    v = f.values
    out = np.zeros(g.shape)
    r = g.r[1:-1, None]
    out[1:-1, 1:-1] = (
        (v[2:, 1:-1] - 2 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / dr**2
        + (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * dr * r)
        - v[1:-1, 1:-1] / r**2
        + (v[1:-1, 2:] - 2 * v[1:-1, 1:-1] + v[1:-1, :-2]) / dz**2
    )
    return ScalarField(g, out, role="generic")


def diffuse_plain(f: ScalarField) -> ScalarField:
    """[d_rr + (1/r) d_r + d_zz] f for a field even at the axis.

    At r=0 the limit 2 d_rr f + d_zz f is used via the even ghost.
    """
    g = f.grid
    dr, dz = g.dr, g.dz
    v = f.values
    out = np.zeros(g.shape)
    r = g.r[1:-1, None]
    out[1:-1, 1:-1] = (
        (v[2:, 1:-1] - 2 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / dr**2
        + (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * dr * r)
        + (v[1:-1, 2:] - 2 * v[1:-1, 1:-1] + v[1:-1, :-2]) / dz**2
    )
    out[0, 1:-1] = 4 * (v[1, 1:-1] - v[0, 1:-1]) / dr**2 + (
        v[0, 2:] - 2 * v[0, 1:-1] + v[0, :-2]
    ) / dz**2
    return ScalarField(g, out, role="generic")


def momentum_rhs(state: AxisymField, mu: float = 1.0) -> AxisymField:
    """Pressure-free tendencies of the three momentum equations.

    vr:     -b.grad vr + vtheta^2/r          + mu (Lap - 1/r^2) vr
    vtheta: -b.grad vtheta - vr vtheta/r     + mu (Lap - 1/r^2) vtheta
    vz:     -b.grad vz                       + mu Lap vz
    The curvature source terms vanish at the axis (both factors are odd).
    """
    g = state.grid
    rinv = np.zeros(g.nr + 1)
    rinv[1:] = 1.0 / g.r[1:]
    rinv = rinv[:, None]

    rhs_vr = (
        -advect(state, ScalarField(g, state.vr), parity=-1).values
        + state.vtheta**2 * rinv
        + mu * diffuse_swirllike(ScalarField(g, state.vr)).values
    )
    rhs_vt = (
        -advect(state, ScalarField(g, state.vtheta), parity=-1).values
        - state.vr * state.vtheta * rinv
        + mu * diffuse_swirllike(ScalarField(g, state.vtheta)).values
    )
    rhs_vz = (
        -advect(state, ScalarField(g, state.vz), parity=1).values
        + mu * diffuse_plain(ScalarField(g, state.vz)).values
    )
    # boundary rows are pinned by the boundary conditions
    for arr in (rhs_vr, rhs_vt, rhs_vz):
        arr[-1, :] = 0.0
        arr[:, 0] = 0.0
        arr[:, -1] = 0.0
    rhs_vr[0, :] = 0.0
    rhs_vt[0, :] = 0.0
    return AxisymField(g, rhs_vr, rhs_vt, rhs_vz)


# ---------------------------------------------------------------------------
# divergence matrix, weights and the projection operator
# ---------------------------------------------------------------------------

def _pidx(i, j, nz):
    return i * (nz + 1) + j


def build_divergence_matrix(g: Grid) -> sp.csr_matrix:
    """Sparse matrix of the discrete divergence acting on stacked [vr, vz] nodes.

    Row for row agrees with fields.divergence (verified by test)."""
    nr, nz = g.nr, g.nz
    dr, dz = g.dr, g.dz
    npts = (nr + 1) * (nz + 1)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    for i in range(nr + 1):
        for j in range(nz + 1):
            row = _pidx(i, j, nz)
            # radial: d_r vr + vr/r
            if i == 0:
                rows.append(row); cols.append(_pidx(1, j, nz)); vals.append(2.0 / dr)
            elif i == nr:
                rows += [row, row, row]
                cols += [_pidx(nr, j, nz), _pidx(nr - 1, j, nz), _pidx(nr - 2, j, nz)]
                vals += [3 / (2 * dr) + 1.0 / (nr * dr), -4 / (2 * dr), 1 / (2 * dr)]
            else:
                rows += [row, row, row]
                cols += [_pidx(i + 1, j, nz), _pidx(i - 1, j, nz), _pidx(i, j, nz)]
                vals += [1 / (2 * dr), -1 / (2 * dr), 1.0 / (i * dr)]
            # axial: d_z vz (offset by npts in the stacked vector)
            if j == 0:
                rows += [row, row, row]
                cols += [npts + _pidx(i, 0, nz), npts + _pidx(i, 1, nz), npts + _pidx(i, 2, nz)]
                vals += [-3 / (2 * dz), 4 / (2 * dz), -1 / (2 * dz)]
            elif j == nz:
                rows += [row, row, row]
                cols += [npts + _pidx(i, nz, nz), npts + _pidx(i, nz - 1, nz), npts + _pidx(i, nz - 2, nz)]
                vals += [3 / (2 * dz), -4 / (2 * dz), 1 / (2 * dz)]
            else:
                rows += [row, row]
                cols += [npts + _pidx(i, j + 1, nz), npts + _pidx(i, j - 1, nz)]
                vals += [1 / (2 * dz), -1 / (2 * dz)]
    return sp.coo_matrix((vals, (rows, cols)), shape=(npts, 2 * npts)).tocsr()


def volume_weights(g: Grid) -> np.ndarray:
    """Cylindrical trapezoid-style volume weights per node (without the 2*pi)."""
    wr = g.r.copy()
    wr[0] = g.dr / 8.0  # quarter-cell volume next to the axis
    wr[-1] = g.r[-1] / 2.0
    wz = np.ones(g.nz + 1)
    wz[0] = wz[-1] = 0.5
    return np.outer(wr, wz) * g.dr * g.dz


def kinetic_energy(fld: AxisymField) -> float:
    """Cylindrically weighted kinetic energy: the R^3 integral of |v|^2/2."""
    w = volume_weights(fld.grid)
    return float(2 * np.pi * 0.5 * np.sum(w * (fld.vr**2 + fld.vtheta**2 + fld.vz**2)))


class ProjectionOperator:
    """Exact discrete Helmholtz projection onto divergence-free fields.

    Solves (D B W^-1 D^T) s = div(u*)/dt with CG, preconditioned by a direct
    factorization of the slightly shifted operator; the velocity update is the
    adjoint gradient B W^-1 D^T s, which reduces in the interior to the
    centered-difference pressure gradient matching the divergence stencil.

    ``tol`` bounds the sup-norm divergence of the projected field: the CG stop
    is the absolute residual tol/dt, and the residual of the solve equals the
    remaining divergence divided by dt node for node.
    """

    def __init__(self, grid: Grid, tol: float = 1e-10, max_iter: int = 10_000,
                 shift: float = 1e-3):
        self.grid = grid
        self.tol = tol
        self.max_iter = max_iter
        npts = (grid.nr + 1) * (grid.nz + 1)
        self._npts = npts
        D = build_divergence_matrix(grid)
        w = volume_weights(grid).ravel()
        free_vr = np.zeros(grid.shape, bool)
        free_vr[1:-1, 1:-1] = True
        free_vz = np.zeros(grid.shape, bool)
        free_vz[:-1, 1:-1] = True
        self._mask = np.concatenate([free_vr.ravel(), free_vz.ravel()])
        self._wu = np.concatenate([w, w])
        self._wp = w
        self._Df = D[:, self._mask].tocsr()
        self._K = (self._Df @ sp.diags(1.0 / self._wu[self._mask]) @ self._Df.T).tocsr()
        shifted = (self._K + shift * sp.identity(npts)).tocsc()
        self._lu = spla.splu(shifted, permc_spec="MMD_AT_PLUS_A")
        self._M = spla.LinearOperator(self._K.shape, self._lu.solve)
        self._s_prev: np.ndarray | None = None

    def solve(self, rhs: np.ndarray, atol: float = 0.0) -> np.ndarray:
        """CG solve of K s = rhs; stop at absolute 2-norm residual atol (or
        relative tol when atol is zero)."""
        b = rhs.ravel()
        rtol = 1e-300 if atol > 0 else self.tol
        s, info = spla.cg(
            self._K, b, x0=self._s_prev, rtol=rtol, atol=atol,
            maxiter=self.max_iter, M=self._M,
        )
        if info != 0:
            achieved = float(np.linalg.norm(b - self._K @ s) / max(np.linalg.norm(b), 1e-300))
            raise PoissonError(
                f"projection solve did not converge (info={info}, residual={achieved:.3e})",
                achieved,
            )
        self._s_prev = s
        return s

    def project(self, u_star: AxisymField, dt: float) -> tuple[AxisymField, ScalarField]:
        g = self.grid
        div = divergence(u_star).values.ravel()
        if np.max(np.abs(div)) == 0.0:
            return u_star.copy(), ScalarField(g, np.zeros(g.shape), role="pressure")
        s = self.solve(div / dt, atol=self.tol / dt)
        grad = np.zeros(2 * self._npts)
        grad[self._mask] = (self._Df.T @ s) / self._wu[self._mask]
        out = u_star.copy()
        out.vr -= dt * grad[: self._npts].reshape(g.shape)
        out.vz -= dt * grad[self._npts:].reshape(g.shape)
        p = ScalarField(g, (-s / self._wp).reshape(g.shape), role="pressure")
        return out, p


def project(u_star: AxisymField, dt: float, tol: float = 1e-10) -> tuple[AxisymField, ScalarField]:
    """One-shot projection (builds the operator; prefer ProjectionOperator for loops)."""
    return ProjectionOperator(u_star.grid, tol=tol).project(u_star, dt)


# ---------------------------------------------------------------------------
# standalone cylindrical Poisson solve (Neumann, zero weighted mean)
# ---------------------------------------------------------------------------

def cylindrical_laplacian(f: ScalarField) -> ScalarField:
    """Conservative evaluation of d_rr f + (1/r) d_r f + d_zz f with Neumann closure."""
    g = f.grid
    dr, dz = g.dr, g.dz
    v = f.values
    out = np.zeros(g.shape)

    rad = np.zeros(g.shape)
    rp = (g.r[1:-1] + 0.5 * dr)[:, None]
    rm = (g.r[1:-1] - 0.5 * dr)[:, None]
    rad[1:-1, :] = (rp * (v[2:, :] - v[1:-1, :]) - rm * (v[1:-1, :] - v[:-2, :])) / (
        g.r[1:-1, None] * dr**2
    )
    rad[0, :] = 4 * (v[1, :] - v[0, :]) / dr**2
    rad[-1, :] = 2 * (g.r[-1] - 0.5 * dr) * (v[-2, :] - v[-1, :]) / (g.r[-1] * dr**2)

    ax = np.zeros(g.shape)
    ax[:, 1:-1] = (v[:, 2:] - 2 * v[:, 1:-1] + v[:, :-2]) / dz**2
    ax[:, 0] = 2 * (v[:, 1] - v[:, 0]) / dz**2
    ax[:, -1] = 2 * (v[:, -2] - v[:, -1]) / dz**2

    out[:] = rad + ax
    return ScalarField(g, out, role="generic")


_POISSON_CACHE: dict[Grid, tuple[sp.csr_matrix, np.ndarray, spla.LinearOperator]] = {}


def _compact_poisson_system(g: Grid):
    if g in _POISSON_CACHE:
        return _POISSON_CACHE[g]
    nr, nz = g.nr, g.nz
    dr, dz = g.dr, g.dz
    n = (nr + 1) * (nz + 1)
    w = volume_weights(g)
    # weighted symmetric form: rows are w_ij * (L p)_ij
    rows, cols, vals = [], [], []

    def add(i, j, i2, j2, v):
        rows.append(_pidx(i, j, nz))
        cols.append(_pidx(i2, j2, nz))
        vals.append(v)

    wr = w[:, 0] / (0.5 * dz)  # radial weight component * dr
    wz_line = np.ones(nz + 1)
    wz_line[0] = wz_line[-1] = 0.5
    for i in range(nr + 1):
        for j in range(nz + 1):
            wij = w[i, j]
            # radial fluxes
            if i == 0:
                c = wij * 4 / dr**2
                add(0, j, 1, j, c); add(0, j, 0, j, -c)
            elif i == nr:
                c = wij * 2 * (g.r[-1] - 0.5 * dr) / (g.r[-1] * dr**2)
                add(i, j, i - 1, j, c); add(i, j, i, j, -c)
            else:
                cp = wij * (g.r[i] + 0.5 * dr) / (g.r[i] * dr**2)
                cm = wij * (g.r[i] - 0.5 * dr) / (g.r[i] * dr**2)
                add(i, j, i + 1, j, cp)
                add(i, j, i - 1, j, cm)
                add(i, j, i, j, -(cp + cm))
            # axial fluxes
            if j == 0:
                c = wij * 2 / dz**2
                add(i, j, i, 1, c); add(i, j, i, 0, -c)
            elif j == nz:
                c = wij * 2 / dz**2
                add(i, j, i, j - 1, c); add(i, j, i, j, -c)
            else:
                c = wij / dz**2
                add(i, j, i, j + 1, c)
                add(i, j, i, j - 1, c)
                add(i, j, i, j, -2 * c)
    M = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    M = -M  # positive semidefinite
    scale = float(np.abs(M.diagonal()).max())
    lu = spla.splu((M + 1e-8 * scale * sp.identity(n)).tocsc())
    pre = spla.LinearOperator(M.shape, lu.solve)
    _POISSON_CACHE[g] = (M, w.ravel(), pre)
    return _POISSON_CACHE[g]


def pressure_poisson_solve(rhs: ScalarField, tol: float = 1e-10,
                           max_iter: int = 10_000) -> ScalarField:
    """Solve d_rr p + (1/r) d_r p + d_zz p = rhs with Neumann boundaries.

    The rhs weighted mean is removed for compatibility; the result has zero
    weighted mean.  Raises PoissonError with the achieved residual on failure.
    """
    g = rhs.grid
    M, w, pre = _compact_poisson_system(g)
    b = rhs.values.ravel().copy()
    b -= np.sum(w * b) / np.sum(w)
    bw = -(w * b)  # weighted symmetric right-hand side (M is -w*L)
    if np.max(np.abs(bw)) == 0.0:
        return ScalarField(g, np.zeros(g.shape), role="pressure")
    p, info = spla.cg(M, bw, rtol=tol * 1e-2, atol=0.0, maxiter=max_iter, M=pre)
    lap = cylindrical_laplacian(ScalarField(g, p.reshape(g.shape))).values.ravel()
    achieved = float(np.linalg.norm(lap - b) / np.linalg.norm(b))
    if info != 0 or achieved > tol:
        raise PoissonError(f"Poisson solve residual {achieved:.3e} exceeds tol {tol:.1e}", achieved)
    p -= np.sum(w * p) / np.sum(w)
    return ScalarField(g, p.reshape(g.shape), role="pressure")


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

def stable_dt(g: Grid, mu: float, cfl: float, qmax: float) -> float:
    """Advective CFL combined with the explicit-diffusion limit (Heun region)."""
    h = min(g.dr, g.dz)
    dt_adv = cfl * h / max(1.0, qmax)
    # Heun's real-axis stability interval is [-2, 0]; 0.35 leaves a 1.4x margin
    dt_diff = 0.35 / (2.0 * mu * (1.0 / g.dr**2 + 1.0 / g.dz**2))
    return min(dt_adv, dt_diff)


@dataclass
class DiagnosticsRecord:
    step: int
    t: float
    q: float
    argmax_r: float
    argmax_z: float
    r_speed: float
    max_rvtheta: float
    energy: float
    max_divergence: float
    boundary_max: float


class AxisymSolver:
    """Owns the marching state; snapshots pushed to history become immutable."""

    def __init__(self, initial: AxisymField, config: SolverConfig,
                 history: SnapshotHistory | None = None, t0: float = 0.0):
        self.config = config
        self.grid = initial.grid
        self.state = apply_axis_conditions(initial)
        self.t = float(t0)
        self.step_count = 0
        self.history = history if history is not None else SnapshotHistory()
        self.projection = ProjectionOperator(
            self.grid, tol=config.projection_tol, max_iter=config.poisson_max_iter
        )
        self.pressure = ScalarField(self.grid, np.zeros(self.grid.shape), role="pressure")
        self._held = None
        if config.boundary == "hold":
            s = self.state
            self._held = {
                "vr": (s.vr[-1, :].copy(), s.vr[:, 0].copy(), s.vr[:, -1].copy()),
                "vtheta": (s.vtheta[-1, :].copy(), s.vtheta[:, 0].copy(), s.vtheta[:, -1].copy()),
                "vz": (s.vz[-1, :].copy(), s.vz[:, 0].copy(), s.vz[:, -1].copy()),
            }
        self.state = self._apply_bcs(self.state)
        # clean the initial divergence so every stored snapshot is projected
        self.state, _ = self.projection.project(self.state, 1.0)
        self.diagnostics: list[DiagnosticsRecord] = []
        self._push_snapshot()

    def _apply_bcs(self, fld: AxisymField) -> AxisymField:
        out = apply_axis_conditions(fld)
        if self._held is None:
            for arr in (out.vr, out.vtheta, out.vz):
                arr[-1, :] = 0.0
                arr[:, 0] = 0.0
                arr[:, -1] = 0.0
        else:
            for name, arr in (("vr", out.vr), ("vz", out.vz)):
                outer, lo, hi = self._held[name]
                arr[-1, :] = outer
                arr[:, 0] = lo
                arr[:, -1] = hi
            # swirl: hold the lateral profile, zero normal gradient in z so a
            # z-independent far field can keep decaying in time
            out.vtheta[-1, :] = self._held["vtheta"][0]
            out.vtheta[:, 0] = out.vtheta[:, 1]
            out.vtheta[:, -1] = out.vtheta[:, -2]
        return out

    def current_dt(self) -> float:
        cfg = self.config
        from .fields import max_speed

        q, _ = max_speed(self.state)
        if cfg.dt is not None:
            limit = stable_dt(self.grid, cfg.mu, 1.0, q)
            if cfg.dt > limit * 1.0001:
                raise ValueError(
                    f"dt={cfg.dt} violates the stability limit {limit:.3e} at t={self.t:.6g}"
                )
            return cfg.dt
        return stable_dt(self.grid, cfg.mu, cfg.cfl, q)

    def step(self) -> None:
        cfg = self.config
        dt = self.current_dt()
        u = self.state
        k1 = momentum_rhs(u, cfg.mu)
        u1 = AxisymField(self.grid, u.vr + dt * k1.vr, u.vtheta + dt * k1.vtheta,
                         u.vz + dt * k1.vz)
        u1 = self._apply_bcs(u1)
        u1, _ = self.projection.project(u1, dt)

        k2 = momentum_rhs(u1, cfg.mu)
        u2 = AxisymField(
            self.grid,
            u.vr + 0.5 * dt * (k1.vr + k2.vr),
            u.vtheta + 0.5 * dt * (k1.vtheta + k2.vtheta),
            u.vz + 0.5 * dt * (k1.vz + k2.vz),
        )
        u2 = self._apply_bcs(u2)
        u2, p = self.projection.project(u2, dt)

        if not u2.is_finite():
            raise UnstableError(f"non-finite state at t={self.t + dt:.6g}", self.t + dt)
        self.state = u2
        self.pressure = p
        self.t += dt
        self.step_count += 1
        if self.step_count % cfg.snapshot_every == 0:
            self._push_snapshot()

    def _push_snapshot(self) -> None:
        self.history.push(self.t, self.state.copy(), self.pressure.copy())

    def record_diagnostics(self) -> DiagnosticsRecord:
        from .fields import boundary_max, max_rspeed, max_speed

        q, (qr, qz) = max_speed(self.state)
        rsp, _ = max_rspeed(self.state)
        rvt = float(np.max(self.grid.r[:, None] * np.abs(self.state.vtheta)))
        rec = DiagnosticsRecord(
            step=self.step_count,
            t=self.t,
            q=q,
            argmax_r=qr,
            argmax_z=qz,
            r_speed=rsp,
            max_rvtheta=rvt,
            energy=kinetic_energy(self.state),
            max_divergence=float(np.max(np.abs(divergence(self.state).values))),
            boundary_max=boundary_max(self.state),
        )
        self.diagnostics.append(rec)
        return rec

    def run(self, t_end: float | None = None, diagnostics_every: int = 1) -> None:
        t_end = self.config.t_end if t_end is None else t_end
        self.record_diagnostics()
        while self.t < t_end - 1e-14:
            self.step()
            if diagnostics_every and self.step_count % diagnostics_every == 0:
                self.record_diagnostics()


# ---------------------------------------------------------------------------
# space-time residual evaluation on stored snapshots
# ---------------------------------------------------------------------------

def _centered(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(arr, -1, axis) - np.roll(arr, 1, axis)) / (2 * h)


def _second(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(arr, -1, axis) - 2 * arr + np.roll(arr, 1, axis)) / h**2


def mms_residual(history: SnapshotHistory, window: tuple[float, float] | None = None,
                 mu: float = 1.0, margin: int = 2) -> dict[str, dict[str, float]]:
    """Per-equation residual norms of the momentum system on stored snapshots.

    Time derivatives are centered over consecutive snapshots; spatial terms are
    centered second order; norms are taken over interior nodes at least
    ``margin`` away from every boundary.  Needs at least 3 snapshots in window.
    """
    snaps = list(history)
    if window is not None:
        snaps = [s for s in snaps if window[0] - 1e-14 <= s.t <= window[1] + 1e-14]
    if len(snaps) < 3:
        raise ValueError(f"need at least 3 snapshots for the time derivative, have {len(snaps)}")
    g = snaps[0].field.grid
    dr, dz = g.dr, g.dz
    w = volume_weights(g)
    sl = (slice(margin, -margin), slice(margin, -margin))
    r = g.r[:, None]

    sup = {k: 0.0 for k in ("vr", "vtheta", "vz", "div")}
    ssq = {k: 0.0 for k in ("vr", "vtheta", "vz", "div")}
    wsum = 0.0

    for k in range(1, len(snaps) - 1):
        tm, t0, tp = snaps[k - 1].t, snaps[k].t, snaps[k + 1].t
        hm, hp = t0 - tm, tp - t0
        fm, f0, fp = snaps[k - 1].field, snaps[k].field, snaps[k + 1].field
        p = snaps[k].pressure.values

        def dt_of(name: str) -> np.ndarray:
            am, a0, ap = getattr(fm, name), getattr(f0, name), getattr(fp, name)
            return (hm**2 * ap + (hp**2 - hm**2) * a0 - hp**2 * am) / (hm * hp * (hm + hp))

        vr, vt, vz = f0.vr, f0.vtheta, f0.vz
        adv = lambda a: vr * _centered(a, 0, dr) + vz * _centered(a, 1, dz)
        lap = lambda a: _second(a, 0, dr) + _centered(a, 0, dr) / r + _second(a, 1, dz)

        # the axis row divides by r=0; it lies outside the interior margin and
        # is discarded below
        with np.errstate(divide="ignore", invalid="ignore"):
            res = {
                "vr": dt_of("vr") + adv(vr) - vt**2 / r + _centered(p, 0, dr)
                      - mu * (lap(vr) - vr / r**2),
                "vtheta": dt_of("vtheta") + adv(vt) + vr * vt / r - mu * (lap(vt) - vt / r**2),
                "vz": dt_of("vz") + adv(vz) + _centered(p, 1, dz) - mu * lap(vz),
                "div": _centered(vr, 0, dr) + vr / r + _centered(vz, 1, dz),
            }
        wi = w[sl]
        wsum += np.sum(wi)
        for name, arr in res.items():
            a = arr[sl]
            sup[name] = max(sup[name], float(np.max(np.abs(a))))
            ssq[name] += float(np.sum(wi * a**2))

    return {
        name: {"sup": sup[name], "l2": float(np.sqrt(ssq[name] / wsum))}
        for name in sup
    }
