"""Grids, axisymmetric velocity fields, axis conditions, interpolation and maxima scans.

All fields live on a collocated node grid in the meridional (r, z) plane.
The axis r = 0 is a grid line; radial/azimuthal components are odd across it,
the axial component and pressure are even.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

SNAPSHOT_MAGIC = b"AXNS"
CUBE_MAGIC = b"CUBE"
SNAPSHOT_VERSION = 1


class OutOfDomainError(ValueError):
    """A query point lies outside the meridional grid."""


@dataclass(frozen=True)
class Grid:
    """Uniform node grid: r_i = i*dr for i=0..nr, z_j = z_min + j*dz for j=0..nz."""

    nr: int
    nz: int
    r_max: float
    z_min: float
    z_max: float

    @property
    def dr(self) -> float:
        return self.r_max / self.nr

    @property
    def dz(self) -> float:
        return (self.z_max - self.z_min) / self.nz

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nr + 1, self.nz + 1)

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.nr + 1) * self.dr

    @property
    def z(self) -> np.ndarray:
        return self.z_min + np.arange(self.nz + 1) * self.dz


def make_grid(nr: int, nz: int, r_max: float, z_min: float, z_max: float) -> Grid:
    if nr < 8 or nz < 8:
        raise ValueError(f"grid counts too small: nr={nr}, nz={nz} (minimum 8)")
    if r_max <= 0:
        raise ValueError(f"r_max must be positive, got {r_max}")
    if z_max <= z_min:
        raise ValueError(f"need z_max > z_min, got [{z_min}, {z_max}]")
    return Grid(int(nr), int(nz), float(r_max), float(z_min), float(z_max))


@dataclass
class ScalarField:
    """Scalar nodal data (pressure, stream function or generic)."""

    grid: Grid
    values: np.ndarray
    role: str = "generic"

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy(), self.role)


@dataclass
class AxisymField:
    """Cylindrical velocity components (vr, vtheta, vz) on grid nodes."""

    grid: Grid
    vr: np.ndarray
    vtheta: np.ndarray
    vz: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "AxisymField":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape), np.zeros(grid.shape))

    def copy(self) -> "AxisymField":
        return AxisymField(self.grid, self.vr.copy(), self.vtheta.copy(), self.vz.copy())

    def speed(self) -> np.ndarray:
        return np.sqrt(self.vr**2 + self.vtheta**2 + self.vz**2)

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.vr))
            and np.all(np.isfinite(self.vtheta))
            and np.all(np.isfinite(self.vz))
        )


@dataclass
class Snapshot:
    t: float
    field: AxisymField
    pressure: ScalarField


@dataclass
class SnapshotHistory:
    """Time-ordered ring buffer of snapshots; oldest evicted beyond capacity."""

    capacity: int = 0  # 0 means unbounded
    snapshots: list[Snapshot] = field(default_factory=list)

    def push(self, t: float, fld: AxisymField, pressure: ScalarField) -> None:
        if self.snapshots and t <= self.snapshots[-1].t:
            raise ValueError(f"snapshot times must increase: {t} after {self.snapshots[-1].t}")
        self.snapshots.append(Snapshot(float(t), fld, pressure))
        if self.capacity and len(self.snapshots) > self.capacity:
            del self.snapshots[0]

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self) -> Iterator[Snapshot]:
        return iter(self.snapshots)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


def apply_axis_conditions(fld: AxisymField) -> AxisymField:
    """Enforce vr(0,z)=0, vtheta(0,z)=0 and one-sided d_r vz(0,z)=0 (even extrapolation)."""
    out = fld.copy()
    out.vr[0, :] = 0.0
    out.vtheta[0, :] = 0.0
    # second-order one-sided derivative (-3f0+4f1-f2)/(2dr) = 0
    out.vz[0, :] = (4.0 * out.vz[1, :] - out.vz[2, :]) / 3.0
    return out


def divergence(fld: AxisymField) -> ScalarField:
    """Discrete div b = d_r vr + vr/r + d_z vz, centered in the interior.

    At the axis the regularized form 2 d_r vr + d_z vz is used (odd vr ghost);
    at the outer boundaries second-order one-sided differences close the stencil.
    """
    g = fld.grid
    dr, dz = g.dr, g.dz
    vr, vz = fld.vr, fld.vz
    out = np.empty(g.shape)

    # radial part: d_r vr + vr/r
    rad = np.empty(g.shape)
    rad[1:-1, :] = (vr[2:, :] - vr[:-2, :]) / (2 * dr) + vr[1:-1, :] / g.r[1:-1, None]
    rad[0, :] = 2.0 * vr[1, :] / dr  # 2*d_r vr with odd ghost, vr(0)=0
    rad[-1, :] = (3 * vr[-1, :] - 4 * vr[-2, :] + vr[-3, :]) / (2 * dr) + vr[-1, :] / g.r[-1]

    # axial part: d_z vz
    ax = np.empty(g.shape)
    ax[:, 1:-1] = (vz[:, 2:] - vz[:, :-2]) / (2 * dz)
    ax[:, 0] = (-3 * vz[:, 0] + 4 * vz[:, 1] - vz[:, 2]) / (2 * dz)
    ax[:, -1] = (3 * vz[:, -1] - 4 * vz[:, -2] + vz[:, -3]) / (2 * dz)

    out[:] = rad + ax
    return ScalarField(g, out, role="generic")


def cylindrical_frame(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormal (e_r, e_theta, e_z) at Cartesian x = (x1, x2, z); requires r > 0."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[0], x[1])
    if r == 0.0:
        raise ValueError("cylindrical frame undefined on the axis")
    e_r = np.array([x[0] / r, x[1] / r, 0.0])
    e_theta = np.array([-x[1] / r, x[0] / r, 0.0])
    e_z = np.array([0.0, 0.0, 1.0])
    return e_r, e_theta, e_z


def bilinear_sample(grid: Grid, values: np.ndarray, r, z):
    """Bilinear interpolation of nodal values at points (r, z). Vectorized.

    Raises OutOfDomainError if any point leaves the grid (tiny roundoff slack).
    """
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    dr, dz = grid.dr, grid.dz
    fi = r / dr
    fj = (z - grid.z_min) / dz
    eps = 1e-12
    if np.any(fi < -eps * grid.nr) or np.any(fi > grid.nr * (1 + eps)):
        raise OutOfDomainError("radial coordinate outside grid")
    if np.any(fj < -eps) or np.any(fj > grid.nz + eps):
        raise OutOfDomainError("axial coordinate outside grid")
    fi = np.clip(fi, 0.0, grid.nr)
    fj = np.clip(fj, 0.0, grid.nz)
    i0 = np.minimum(fi.astype(int), grid.nr - 1)
    j0 = np.minimum(fj.astype(int), grid.nz - 1)
    wi = fi - i0
    wj = fj - j0
    v00 = values[i0, j0]
    v10 = values[i0 + 1, j0]
    v01 = values[i0, j0 + 1]
    v11 = values[i0 + 1, j0 + 1]
    # incremental form: exact (bitwise) on constant data, since all the
    # correction terms vanish identically
    lo = v00 + wi * (v10 - v00)
    hi = v01 + wi * (v11 - v01)
    return lo + wj * (hi - lo)


def sample_components(fld: AxisymField, r, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Interpolated (vr, vtheta, vz) at meridional points (r, z)."""
    return (
        bilinear_sample(fld.grid, fld.vr, r, z),
        bilinear_sample(fld.grid, fld.vtheta, r, z),
        bilinear_sample(fld.grid, fld.vz, r, z),
    )


def reconstruct_cartesian(fld: AxisymField, x: np.ndarray) -> np.ndarray:
    """Cartesian 3-vector v(x) = vr e_r + vtheta e_theta + vz e_z at x = (x1, x2, z)."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[0], x[1])
    vr, vtheta, vz = sample_components(fld, r, x[2])
    if r == 0.0:
        return np.array([0.0, 0.0, float(vz)])
    e_r, e_theta, e_z = cylindrical_frame(x)
    return float(vr) * e_r + float(vtheta) * e_theta + float(vz) * e_z


def reconstruct_cartesian_many(fld: AxisymField, pts: np.ndarray) -> np.ndarray:
    """Vectorized reconstruct_cartesian for an (n, 3) array of points."""
    pts = np.asarray(pts, dtype=float)
    r = np.hypot(pts[:, 0], pts[:, 1])
    vr, vtheta, vz = sample_components(fld, r, pts[:, 2])
    out = np.empty_like(pts)
    safe = r > 0
    cr = np.where(safe, pts[:, 0] / np.where(safe, r, 1.0), 0.0)
    sr = np.where(safe, pts[:, 1] / np.where(safe, r, 1.0), 0.0)
    out[:, 0] = vr * cr - vtheta * sr
    out[:, 1] = vr * sr + vtheta * cr
    out[:, 2] = vz
    out[~safe, 0] = 0.0
    out[~safe, 1] = 0.0
    return out


def _argmax_lex(weighted: np.ndarray) -> tuple[int, int]:
    """Index of the maximum, ties broken by smallest r index then smallest z index."""
    # np.argmax on the C-ordered array already returns the first (smallest i, then j)
    # occurrence of the maximum, which is exactly the lexicographic tie-break.
    flat = int(np.argmax(weighted))
    return np.unravel_index(flat, weighted.shape)  # type: ignore[return-value]


def max_speed(fld: AxisymField) -> tuple[float, tuple[float, float]]:
    """Global maximum of |v| over nodes with its (r, z) location."""
    sp = fld.speed()
    i, j = _argmax_lex(sp)
    g = fld.grid
    return float(sp[i, j]), (float(i * g.dr), float(g.z_min + j * g.dz))


def max_rspeed(fld: AxisymField) -> tuple[float, tuple[float, float]]:
    """Global maximum of r*|v| over nodes with its (r, z) location."""
    sp = fld.speed() * fld.grid.r[:, None]
    i, j = _argmax_lex(sp)
    g = fld.grid
    return float(sp[i, j]), (float(i * g.dr), float(g.z_min + j * g.dz))


def boundary_max(fld: AxisymField) -> float:
    """Largest speed on the far-field boundary (r=r_max, z=z_min, z=z_max)."""
    sp = fld.speed()
    return float(max(sp[-1, :].max(), sp[:, 0].max(), sp[:, -1].max()))


# ---------------------------------------------------------------------------
# snapshot binary format: magic, version u32, then nr, nz, r_max, z_min,
# z_max, t as little-endian f64, then row-major vr, vtheta, vz, p arrays.
# ---------------------------------------------------------------------------

def write_snapshot(path, t: float, fld: AxisymField, pressure: ScalarField,
                   magic: bytes = SNAPSHOT_MAGIC) -> None:
    g = fld.grid
    header = magic + struct.pack(
        "<I6d", SNAPSHOT_VERSION, float(g.nr), float(g.nz),
        g.r_max, g.z_min, g.z_max, float(t),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (fld.vr, fld.vtheta, fld.vz, pressure.values):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_snapshot(path, magic: bytes = SNAPSHOT_MAGIC) -> tuple[float, AxisymField, ScalarField]:
    with open(path, "rb") as fh:
        got = fh.read(4)
        if got != magic:
            raise ValueError(f"bad snapshot magic {got!r} in {path}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        nr_f, nz_f, r_max, z_min, z_max, t = struct.unpack("<6d", fh.read(48))
        grid = make_grid(int(nr_f), int(nz_f), r_max, z_min, z_max)
        n = (grid.nr + 1) * (grid.nz + 1)
        arrs = []
        for _ in range(4):
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise ValueError(f"truncated snapshot file {path}")
            arrs.append(np.frombuffer(buf, dtype="<f8").reshape(grid.shape).copy())
    fld = AxisymField(grid, arrs[0], arrs[1], arrs[2])
    return t, fld, ScalarField(grid, arrs[3], role="pressure")
