"""Almost-maximal point detection, parabolic-cube zooming and closeness-to-constant.

Mode A tracks the running supremum of the speed |v|; mode B tracks the running
supremum of the scale-invariant quantity r|v|.  A candidate point is kept when
its value is at least ``ratio_threshold`` of the supremum over all earlier
times.  The zoom normalizes the center speed to one and samples the rescaled
Cartesian velocity on a normalized space-time cube; the closeness report
measures a discrete parabolic C^{2,1,alpha}-style distance to the center value.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .fields import (
    AxisymField,
    SnapshotHistory,
    max_rspeed,
    max_speed,
    reconstruct_cartesian_many,
    sample_components,
)

CUBE_MAGIC = b"CUBE"
CUBE_VERSION = 1


class InsufficientSamplesError(ValueError):
    """Too few valid cube samples for the requested measurement."""


@dataclass
class MicroscopeConfig:
    epsilon: float = 0.25
    sigma0: float = 1.0
    holder_alpha: float = 0.5
    ratio_threshold: float = 0.25
    cube_resolution: int = 9
    cube_time_levels: int = 5

    def __post_init__(self):
        if self.epsilon <= 0 or self.sigma0 <= 0:
            raise ValueError("epsilon and sigma0 must be positive")
        if not (0 < self.holder_alpha < 1):
            raise ValueError(f"holder_alpha must lie in (0,1), got {self.holder_alpha}")
        if not (0 < self.ratio_threshold < 1):
            raise ValueError(f"ratio_threshold must lie in (0,1), got {self.ratio_threshold}")
        if self.cube_resolution < 5 or self.cube_resolution % 2 == 0:
            raise ValueError("cube_resolution must be odd and >= 5")
        if self.cube_time_levels < 3:
            raise ValueError("cube_time_levels must be >= 3")


@dataclass
class ZoomParameters:
    mode: str  # "A" | "B"
    t0: float
    r0: float
    z0: float
    q: float  # |v(x0, t0)|
    ratio: float  # maximality ratio against the running supremum

    @property
    def alpha(self) -> float:
        return self.r0 * self.q

    @property
    def beta(self) -> float:
        a = self.alpha
        return self.r0 / np.sqrt(a) if a > 0 else 0.0

    @property
    def x0(self) -> np.ndarray:
        # azimuth fixed to zero; axisymmetry makes the choice immaterial
        return np.array([self.r0, 0.0, self.z0])


@dataclass
class CubeSample:
    zoom: ZoomParameters
    length: float  # normalized cube half-edge L
    xs: np.ndarray  # (n,) normalized spatial ticks
    ts: np.ndarray  # (nt,) normalized times in [-L^2, 0]
    v: np.ndarray  # (nt, n, n, n, 3) rescaled velocity samples
    valid: np.ndarray  # (nt, n, n, n) bool
    phys: np.ndarray  # (n, n, n, 3) physical spatial sample points
    capped: bool
    crosses_axis: bool

    @property
    def masked_fraction(self) -> float:
        return float(1.0 - np.mean(self.valid))

    @property
    def center_value(self) -> np.ndarray:
        c = len(self.xs) // 2
        return self.v[-1, c, c, c]


@dataclass
class ClosenessReport:
    c_star: np.ndarray
    c_mean: np.ndarray
    sup_dist: float
    grad_sup: float
    hess_sup: float
    dt_sup: float
    holder_seminorm: float
    swirl_ratio: float

    @property
    def total(self) -> float:
        return self.sup_dist + self.grad_sup + self.hess_sup + self.dt_sup + self.holder_seminorm


def find_almost_maximal(history: SnapshotHistory, mode: str,
                        ratio_threshold: float = 0.25) -> list[ZoomParameters]:
    """Candidate zoom points: per-snapshot argmax whose value is almost maximal.

    The supremum runs over all snapshots up to and including the candidate time.
    """
    if len(history) == 0:
        raise ValueError("empty history")
    if mode not in ("A", "B"):
        raise ValueError(f"mode must be 'A' or 'B', got {mode!r}")
    out: list[ZoomParameters] = []
    running = 0.0
    for snap in history:
        if mode == "A":
            val, (r0, z0) = max_speed(snap.field)
            q = val
        else:
            val, (r0, z0) = max_rspeed(snap.field)
            vr, vt, vz = sample_components(snap.field, r0, z0)
            q = float(np.sqrt(vr**2 + vt**2 + vz**2))
        running = max(running, val)
        if val <= 0.0 or running <= 0.0:
            continue
        ratio = val / running
        if ratio >= ratio_threshold:
            out.append(ZoomParameters(mode=mode, t0=snap.t, r0=r0, z0=z0, q=q, ratio=ratio))
    return out


def _interp_field_at(history: SnapshotHistory, t: float) -> tuple[int, int, float]:
    """Bracketing snapshot indices and linear weight for time t (clamped above)."""
    times = history.times
    k = int(np.searchsorted(times, t))
    if k == 0:
        return 0, 0, 0.0
    if k >= len(times):
        return len(times) - 1, len(times) - 1, 0.0
    t0, t1 = times[k - 1], times[k]
    w = (t - t0) / (t1 - t0) if t1 > t0 else 0.0
    return k - 1, k, float(w)


def rescale_history(history: SnapshotHistory, zoom: ZoomParameters,
                    config: MicroscopeConfig) -> CubeSample:
    """Sample the Q-rescaled velocity on the normalized parabolic cube.

    v_tilde(x~, t~) = v(x~/Q + x0, t~/Q^2 + t0) / Q, with the cube half-edge
    L = (sigma0 epsilon)^-1 capped at 0.5 Q r0 so the cube stays off-axis.
    """
    if zoom.q <= 0:
        raise ValueError("cannot rescale a zero-speed candidate")
    if len(history) == 0:
        raise ValueError("empty history")
    L = 1.0 / (config.sigma0 * config.epsilon)
    capped = False
    axis_cap = 0.5 * zoom.q * zoom.r0
    if axis_cap > 0 and L > axis_cap:
        L = axis_cap
        capped = True
    crosses_axis = L / zoom.q >= zoom.r0

    n = config.cube_resolution
    nt = config.cube_time_levels
    xs = np.linspace(-L, L, n)
    ts = np.linspace(-L * L, 0.0, nt)
    grid = history.snapshots[0].field.grid

    phys = np.empty((n, n, n, 3))
    x0 = zoom.x0
    X1, X2, X3 = np.meshgrid(xs, xs, xs, indexing="ij")
    phys[..., 0] = X1 / zoom.q + x0[0]
    phys[..., 1] = X2 / zoom.q + x0[1]
    phys[..., 2] = X3 / zoom.q + x0[2]

    pts = phys.reshape(-1, 3)
    r = np.hypot(pts[:, 0], pts[:, 1])
    in_space = (r <= grid.r_max) & (pts[:, 2] >= grid.z_min) & (pts[:, 2] <= grid.z_max)
    safe_pts = pts.copy()
    safe_pts[~in_space] = [0.5 * grid.r_max, 0.0, 0.5 * (grid.z_min + grid.z_max)]

    t_lo = history.times[0]
    v = np.zeros((nt, n, n, n, 3))
    valid = np.zeros((nt, n, n, n), bool)
    for k, tt in enumerate(ts):
        t_phys = tt / zoom.q**2 + zoom.t0
        if t_phys < t_lo - 1e-12 or t_phys > history.times[-1] + 1e-12:
            continue
        ia, ib, wt = _interp_field_at(history, t_phys)
        va = reconstruct_cartesian_many(history.snapshots[ia].field, safe_pts)
        if ib != ia and wt > 0:
            vb = reconstruct_cartesian_many(history.snapshots[ib].field, safe_pts)
            # incremental form: bitwise exact when both snapshots agree
            vk = va + wt * (vb - va)
        else:
            vk = va
        vk[~in_space] = 0.0
        v[k] = (vk / zoom.q).reshape(n, n, n, 3)
        valid[k] = in_space.reshape(n, n, n)

    if not valid.any():
        raise InsufficientSamplesError("cube is fully masked (no history/domain coverage)")
    return CubeSample(zoom=zoom, length=L, xs=xs, ts=ts, v=v, valid=valid, phys=phys,
                      capped=capped, crosses_axis=crosses_axis)


def swirl_smallness(sample: CubeSample) -> float:
    """Maximum over valid samples of the rescaled swirl magnitude |v_tilde . e_theta|."""
    pts = sample.phys.reshape(-1, 3)
    r = np.hypot(pts[:, 0], pts[:, 1])
    safe = np.where(r > 0, r, 1.0)
    et = np.stack([-pts[:, 1] / safe, pts[:, 0] / safe, np.zeros(len(pts))], axis=1)
    nt = sample.v.shape[0]
    sw = np.abs(np.einsum("kpc,pc->kp", sample.v.reshape(nt, -1, 3), et))
    sw[~sample.valid.reshape(nt, -1)] = 0.0
    return float(sw.max())


def _pairwise_holder(points: np.ndarray, values: np.ndarray, alpha: float,
                     chunk: int = 256) -> float:
    """max over pairs of |values(a)-values(b)| / d_P(a,b)^alpha.

    ``points`` is (m, 4) with columns (x1, x2, x3, t); d_P is the parabolic
    distance max(|dx|, sqrt(|dt|)).
    """
    m = len(points)
    if m < 2:
        return 0.0
    best = 0.0
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        dx = points[lo:hi, None, :3] - points[None, :, :3]
        dt = points[lo:hi, None, 3] - points[None, :, 3]
        d = np.maximum(np.linalg.norm(dx, axis=-1), np.sqrt(np.abs(dt)))
        dv = np.linalg.norm(values[lo:hi, None, :] - values[None, :, :], axis=-1)
        mask = d > 1e-12
        if mask.any():
            best = max(best, float((dv[mask] / d[mask] ** alpha).max()))
    return best


def constant_closeness(sample: CubeSample, config: MicroscopeConfig) -> ClosenessReport:
    """Discrete parabolic closeness of the cube samples to the center constant."""
    n = len(sample.xs)
    nt = len(sample.ts)
    n_valid_axis = sample.valid.any(axis=(0, 2, 3)).sum()
    n_valid_t = sample.valid.any(axis=(1, 2, 3)).sum()
    if n_valid_axis < 5 or n_valid_t < 3:
        raise InsufficientSamplesError(
            f"need >=5 valid points per spatial axis and >=3 time levels, "
            f"have {n_valid_axis} and {n_valid_t}"
        )
    hx = sample.xs[1] - sample.xs[0]
    ht = sample.ts[1] - sample.ts[0]
    v = sample.v
    valid = sample.valid

    c_star = sample.center_value.copy()
    c_mean = v[valid].mean(axis=0)

    dist = np.linalg.norm(v - c_star, axis=-1)
    sup_dist = float(dist[valid].max())

    # first spatial derivatives (centered, interior of each spatial axis)
    inner = (slice(None), slice(1, -1), slice(1, -1), slice(1, -1))
    d1 = np.stack(
        [(np.roll(v, -1, ax) - np.roll(v, 1, ax))[inner] / (2 * hx) for ax in (1, 2, 3)],
        axis=-1,
    )  # (nt, n-2, n-2, n-2, 3comp, 3dir)
    d1_valid = np.ones(valid.shape, bool)
    for ax in (1, 2, 3):
        d1_valid &= np.roll(valid, -1, ax) & np.roll(valid, 1, ax)
    d1_valid = d1_valid[inner] & valid[inner]
    grad_sup = 0.0
    if d1_valid.any():
        grad_sup = float(np.sqrt((d1**2).sum(axis=(-2, -1)))[d1_valid].max())

    # second derivatives: 3 pure + 3 mixed per component
    second = []
    for ax in (1, 2, 3):
        second.append((np.roll(v, -1, ax) - 2 * v + np.roll(v, 1, ax))[inner] / hx**2)
    for ax_a, ax_b in ((1, 2), (1, 3), (2, 3)):
        cross = (
            np.roll(np.roll(v, -1, ax_a), -1, ax_b)
            - np.roll(np.roll(v, -1, ax_a), 1, ax_b)
            - np.roll(np.roll(v, 1, ax_a), -1, ax_b)
            + np.roll(np.roll(v, 1, ax_a), 1, ax_b)
        )[inner] / (4 * hx**2)
        second.append(cross)
    d2 = np.stack(second, axis=-1)  # (nt, n-2, n-2, n-2, 3comp, 6)
    d2_valid = valid.copy()
    for ax in (1, 2, 3):
        d2_valid &= np.roll(valid, -1, ax) & np.roll(valid, 1, ax)
    for ax_a, ax_b in ((1, 2), (1, 3), (2, 3)):
        for sa in (-1, 1):
            for sb in (-1, 1):
                d2_valid &= np.roll(np.roll(valid, sa, ax_a), sb, ax_b)
    d2_valid = d2_valid[inner]
    hess_sup = 0.0
    if d2_valid.any():
        hess_sup = float(np.sqrt((d2**2).sum(axis=(-2, -1)))[d2_valid].max())

    # first time derivative (centered over time levels)
    dt1 = (v[2:] - v[:-2]) / (2 * ht)
    dt1_valid = valid[2:] & valid[:-2] & valid[1:-1]
    dt_sup = 0.0
    if dt1_valid.any():
        dt_sup = float(np.linalg.norm(dt1, axis=-1)[dt1_valid].max())

    # parabolic Holder quotients of D2 and of the time derivative
    X1, X2, X3 = np.meshgrid(sample.xs[1:-1], sample.xs[1:-1], sample.xs[1:-1], indexing="ij")
    inner_space = np.stack([X1, X2, X3], axis=-1)  # (n-2, n-2, n-2, 3)
    holder = 0.0
    if d2_valid.any():
        space4 = np.broadcast_to(inner_space, (nt,) + inner_space.shape)[d2_valid]
        time4 = np.broadcast_to(
            sample.ts[:, None, None, None, None], (nt, n - 2, n - 2, n - 2, 1)
        )[d2_valid]
        pts4 = np.concatenate([space4, time4], axis=-1)
        vals = d2[d2_valid].reshape(len(pts4), -1)
        holder = _pairwise_holder(pts4, vals, config.holder_alpha)
    if dt1_valid.any():
        full_space = np.stack(
            np.meshgrid(sample.xs, sample.xs, sample.xs, indexing="ij"), axis=-1
        )
        space4 = np.broadcast_to(full_space, (nt - 2,) + full_space.shape)[dt1_valid]
        time4 = np.broadcast_to(
            sample.ts[1:-1, None, None, None, None], (nt - 2, n, n, n, 1)
        )[dt1_valid]
        pts4 = np.concatenate([space4, time4], axis=-1)
        vals = dt1[dt1_valid].reshape(len(pts4), -1)
        holder = max(holder, _pairwise_holder(pts4, vals, config.holder_alpha))

    return ClosenessReport(
        c_star=c_star,
        c_mean=c_mean,
        sup_dist=sup_dist,
        grad_sup=grad_sup,
        hess_sup=hess_sup,
        dt_sup=dt_sup,
        holder_seminorm=holder,
        swirl_ratio=swirl_smallness(sample),
    )


def microscope_report(history: SnapshotHistory,
                      config: MicroscopeConfig) -> list[tuple[ZoomParameters, CubeSample, ClosenessReport]]:
    """Find, zoom and measure candidates in both modes; sorted by alpha descending."""
    if len(history) < 2:
        raise ValueError("history needs at least two snapshots for a space-time cube")
    rows = []
    for mode in ("A", "B"):
        for zoom in find_almost_maximal(history, mode, config.ratio_threshold):
            try:
                sample = rescale_history(history, zoom, config)
                report = constant_closeness(sample, config)
            except (InsufficientSamplesError, ValueError):
                continue
            rows.append((zoom, sample, report))
    rows.sort(key=lambda row: -row[0].alpha)
    return rows


def write_cube(path, sample: CubeSample) -> None:
    """Binary dump of a cube sample (CUBE magic variant of the snapshot format)."""
    z = sample.zoom
    n = len(sample.xs)
    nt = len(sample.ts)
    header = CUBE_MAGIC + struct.pack(
        "<I8d", CUBE_VERSION, float(n), float(nt), sample.length,
        z.t0, z.q, z.r0, z.z0, 1.0 if sample.capped else 0.0,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(sample.xs, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(sample.ts, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(sample.v, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(sample.valid, dtype="<f8").tobytes())
