"""Initial-data generators and the analytic pure-swirl oracle field.

The vortex-ring generator builds its meridional part from a Stokes stream
function, so the analytic field is exactly divergence free, and rescales the
result to satisfy the three initial bounds (sup |v|, weighted L2, sup r|v|)
with a prescribed constant N0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import AxisymField, Grid, apply_axis_conditions
from .solver import volume_weights


@dataclass
class DataSpec:
    kind: str = "vortex_ring_swirl"  # lamb_oseen | vortex_ring_swirl | stream_random
    n0: float = 1.0
    # lamb_oseen
    circulation: float = 1.0
    nu: float = 1.0
    t_offset: float = 0.5
    # vortex_ring_swirl
    ring_r: float = 1.5
    ring_z: float = 0.0
    core_radius: float = 0.35
    stream_amplitude: float = 1.0
    swirl_amplitude: float = 0.3
    # stream_random
    seed: int = 0
    modes: int = 4

    def __post_init__(self):
        if self.n0 <= 0:
            raise ValueError(f"n0 must be positive, got {self.n0}")
        if self.kind not in ("lamb_oseen", "vortex_ring_swirl", "stream_random"):
            raise ValueError(f"unknown data kind {self.kind!r}")


def lamb_oseen_profile(r: np.ndarray, circulation: float, nu: float, t: float) -> np.ndarray:
    """Swirl speed (circulation/(2 pi r))(1 - exp(-r^2/(4 nu t))); regular at r=0."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    small = r < 1e-8
    rr = np.where(small, 1.0, r)
    out = circulation / (2 * np.pi * rr) * (-np.expm1(-(rr**2) / (4 * nu * t)))
    out = np.where(small, circulation * r / (8 * np.pi * nu * t), out)
    return out


def lamb_oseen_field(circulation: float, nu: float, t_offset: float, grid: Grid) -> AxisymField:
    """Pure-swirl analytic solution sampled on the grid at time ``t_offset``."""
    if t_offset <= 0:
        raise ValueError(f"t_offset must be positive, got {t_offset}")
    vtheta = np.repeat(
        lamb_oseen_profile(grid.r, circulation, nu, t_offset)[:, None], grid.nz + 1, axis=1
    )
    z = np.zeros(grid.shape)
    return AxisymField(grid, z.copy(), vtheta, z.copy())


def lamb_oseen_peak(circulation: float, nu: float, t: float,
                    r_hi: float = 50.0, n: int = 200_001) -> tuple[float, float]:
    """(peak speed, peak radius) from a dense 1D scan of the analytic profile."""
    r = np.linspace(0.0, r_hi * np.sqrt(4 * nu * t), n)
    v = lamb_oseen_profile(r, circulation, nu, t)
    i = int(np.argmax(v))
    return float(v[i]), float(r[i])


def _gaussian_blob(grid: Grid, r_c: float, z_c: float, delta: float) -> np.ndarray:
    R, Z = np.meshgrid(grid.r, grid.z, indexing="ij")
    return np.exp(-((R - r_c) ** 2 + (Z - z_c) ** 2) / delta**2)


def _ring_meridional(grid: Grid, amp: float, r_c: float, z_c: float,
                     delta: float) -> tuple[np.ndarray, np.ndarray]:
    """vr = -(1/r) dPsi/dz, vz = (1/r) dPsi/dr for Psi = amp r^2 exp(-(...)/delta^2).

    Evaluated analytically, so the continuous field is exactly divergence free.
    """
    R, Z = np.meshgrid(grid.r, grid.z, indexing="ij")
    e = np.exp(-((R - r_c) ** 2 + (Z - z_c) ** 2) / delta**2)
    vr = amp * R * e * 2 * (Z - z_c) / delta**2
    vz = amp * e * (2 - 2 * R * (R - r_c) / delta**2)
    return vr, vz


def n0_norms(fld: AxisymField) -> tuple[float, float, float]:
    """(sup |v|, cylindrical-weighted L2 norm, sup r|v|) of a field."""
    sp = fld.speed()
    w = volume_weights(fld.grid)
    l2 = float(np.sqrt(2 * np.pi * np.sum(w * sp**2)))
    return float(sp.max()), l2, float((fld.grid.r[:, None] * sp).max())


def check_n0_bounds(fld: AxisymField, n0: float) -> dict:
    """Report the three initial-bound numbers and pass/fail against n0."""
    sup, l2, rsup = n0_norms(fld)
    swirl_rsup = float((fld.grid.r[:, None] * np.abs(fld.vtheta)).max())
    ok = sup <= n0 * (1 + 1e-12) and l2 <= n0 * (1 + 1e-12) and rsup <= n0 * (1 + 1e-12)
    return {
        "sup": sup,
        "l2": l2,
        "rsup": rsup,
        "rsup_swirl": swirl_rsup,
        "n0": n0,
        "pass": ok,
    }


def vortex_ring_swirl(spec: DataSpec, grid: Grid) -> AxisymField:
    """Swirling vortex-ring data rescaled so the three bounds hold with spec.n0."""
    if spec.ring_r <= 3 * spec.core_radius:
        raise ValueError(
            f"ring center r={spec.ring_r} must exceed 3x core radius {spec.core_radius}"
        )
    vr, vz = _ring_meridional(grid, spec.stream_amplitude, spec.ring_r, spec.ring_z,
                              spec.core_radius)
    R = grid.r[:, None]
    vtheta = spec.swirl_amplitude * (R / spec.ring_r) * _gaussian_blob(
        grid, spec.ring_r, spec.ring_z, spec.core_radius
    )
    fld = apply_axis_conditions(AxisymField(grid, vr, vtheta, vz))
    sup, l2, rsup = n0_norms(fld)
    worst = max(sup, l2, rsup)
    if worst > 0:
        scale = spec.n0 / worst
        fld.vr *= scale
        fld.vtheta *= scale
        fld.vz *= scale
    return fld


def stream_random(spec: DataSpec, grid: Grid) -> AxisymField:
    """Random smooth divergence-free data from a mode sum of ring stream functions."""
    rng = np.random.default_rng(spec.seed)
    vr = np.zeros(grid.shape)
    vz = np.zeros(grid.shape)
    vtheta = np.zeros(grid.shape)
    r_lo, r_hi = 0.25 * grid.r_max, 0.75 * grid.r_max
    z_span = grid.z_max - grid.z_min
    for _ in range(spec.modes):
        r_c = rng.uniform(r_lo, r_hi)
        z_c = rng.uniform(grid.z_min + 0.25 * z_span, grid.z_max - 0.25 * z_span)
        delta = rng.uniform(0.08, 0.2) * grid.r_max
        amp = rng.normal()
        dvr, dvz = _ring_meridional(grid, amp, r_c, z_c, delta)
        vr += dvr
        vz += dvz
        vtheta += rng.normal() * (grid.r[:, None] / r_c) * _gaussian_blob(grid, r_c, z_c, delta)
    fld = apply_axis_conditions(AxisymField(grid, vr, vtheta, vz))
    sup, l2, rsup = n0_norms(fld)
    worst = max(sup, l2, rsup)
    if worst > 0:
        scale = spec.n0 / worst
        fld.vr *= scale
        fld.vtheta *= scale
        fld.vz *= scale
    return fld


def generate(spec: DataSpec, grid: Grid) -> AxisymField:
    if spec.kind == "lamb_oseen":
        return lamb_oseen_field(spec.circulation, spec.nu, spec.t_offset, grid)
    if spec.kind == "vortex_ring_swirl":
        return vortex_ring_swirl(spec, grid)
    return stream_random(spec, grid)
