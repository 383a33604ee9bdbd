"""Finite-volume IMEX solver for the parabolic-elliptic Keller-Segel system.

Two geometries share one stepping loop:

radial2d
    u(r, t) on a sinh-graded radial mesh, r = c sinh(k d).  The Poisson
    gradient comes from exact partial masses of the cell averages.
axisym3d
    u(rbar, zbar, t) on a uniform box around a ring of radius R/mu, with
    physical radius r = R/mu + rbar.  The potential solves the cylindrical
    Poisson problem with Dirichlet data from the ring kernel.

Diffusion is implicit, drift explicit with a van Leer limited upwind flux.
Both are in flux form, so mass is conserved to solver precision.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from . import profiles as P
from .errors import (InterpolationOutOfDomain, LinearSolveFailure, TimestepUnderflow)
from .grids import AxisymField, CutoffConfig, RadialField, RadialGrid, chi, dchi, write_axisym
from .poisson import ring_kernel_potential

log = logging.getLogger(__name__)

GEOMETRIES = ("radial2d", "axisym3d")
STEPPERS = ("imex_euler", "imex_bdf2")


@dataclass
class SimConfig:
    geometry: str = "radial2d"
    extent: float = 1000.0  # outer wall radius (radial2d) or box half-width (axisym3d)
    n: int = 512  # radial cells, or cells per direction
    core: float = 1.0  # radial2d: sinh grading scale, cells are ~uniform for r < core
    ring_offset: float = 1e4  # axisym3d: R/mu
    stepper: str = "imex_euler"
    cfl: float = 0.4
    amp_cap: float = 1.05
    dt_max: float = 0.05
    dt_min: float = 1e-14
    t_end: float = 1.0
    max_sup: float = math.inf
    lambda_stop: float = 10.0  # stop once lambda_fit < lambda_stop * h_min
    max_steps: int = 1_000_000
    snapshot_factor: float = 1.25  # new snapshot when sup changes by this factor

    def validate(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}")
        if self.stepper not in STEPPERS:
            raise ValueError(f"stepper must be one of {STEPPERS}")
        if min(self.extent, self.core, self.ring_offset, self.cfl, self.dt_max, self.t_end) <= 0:
            raise ValueError("extents, scales, cfl, dt_max and t_end must be positive")
        if self.n < 8:
            raise ValueError("need at least 8 cells")
        if self.amp_cap <= 1:
            raise ValueError("amplification cap must exceed 1")
        if self.geometry == "axisym3d" and self.extent >= self.ring_offset:
            raise ValueError("box must not reach the symmetry axis")
        return self

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


# meshes ----------------------------------------------------------------------

class RadialMesh:
    def __init__(self, extent: float, n: int, core: float = 1.0):
        d = np.arcsinh(extent / core) / n
        self.faces = core * np.sinh(d * np.arange(n + 1))
        self.centers = core * np.sinh(d * (np.arange(n) + 0.5))
        self.volumes = 0.5 * np.diff(self.faces**2)
        self.gaps = np.diff(self.centers)  # center spacing at interior faces
        self.hmin = float(self.faces[1])
        self.n = n

    def mass(self, u) -> float:
        return float(2 * np.pi * np.dot(self.volumes, u))

    def cell_average(self, mass_fn) -> np.ndarray:
        """Exact cell averages from a partial-mass function m(r) = int_0^r u s ds."""
        return np.diff(mass_fn(self.faces)) / self.volumes


class BoxMesh:
    def __init__(self, half_width: float, n: int, offset: float):
        self.h = 2 * half_width / n
        self.rbar = -half_width + self.h * (np.arange(n) + 0.5)
        self.zbar = self.rbar.copy()
        self.offset = offset
        self.r = offset + self.rbar
        self.r_faces = offset - half_width + self.h * np.arange(n + 1)
        self.volumes = np.repeat((self.r * self.h**2)[:, None], n, axis=1)
        self.hmin = self.h
        self.n = n

    def mass(self, u) -> float:
        return float(2 * np.pi * np.sum(self.volumes * u))


def make_mesh(cfg: SimConfig):
    if cfg.geometry == "radial2d":
        return RadialMesh(cfg.extent, cfg.n, cfg.core)
    return BoxMesh(cfg.extent, cfg.n, cfg.ring_offset)


# limited upwind flux -----------------------------------------------------------

def _vanleer(dm, dp):
    prod = dm * dp
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(prod > 0, 2 * prod / (dm + dp), 0.0)
    return s


def _upwind_faces(u, x, xf, vel, left_mirror: bool):
    """Face values of u at interior faces xf (between x[k], x[k+1]) by upwinding on vel.

    u has the transport direction along axis 0.
    """
    xl = -x[0] if left_mirror else 2 * x[0] - x[1]
    xe = np.concatenate([[xl], x, [2 * x[-1] - x[-2]]])
    ue = np.concatenate([u[:1], u, u[-1:]], axis=0)
    shape = (-1,) + (1,) * (u.ndim - 1)
    dx = np.diff(xe).reshape(shape)
    grad = np.diff(ue, axis=0) / dx
    slope = _vanleer(grad[:-1], grad[1:])
    xc = x.reshape(shape)
    xf = xf.reshape(shape)
    right_of_left = u[:-1] + slope[:-1] * (xf - xc[:-1])
    left_of_right = u[1:] - slope[1:] * (xc[1:] - xf)
    return np.where(vel > 0, right_of_left, left_of_right)


# state -------------------------------------------------------------------------

@dataclass
class SimState:
    t: float
    u: np.ndarray
    step: int = 0
    prev: tuple | None = None  # (dt, explicit tendency) of the last step for bdf2


@dataclass
class StepInfo:
    dt: float
    retries: int
    min_u: float
    boundary_flux: float


class Simulator:
    """Owns the mesh and cached factorizations for one configuration."""

    def __init__(self, config: SimConfig):
        self.cfg = config.validate()
        self.mesh = make_mesh(config)
        self._diff_cache: dict = {}
        if config.geometry == "axisym3d":
            self._poisson_lu = self._build_poisson()
            self._ghosts = self._ghost_points()

    # radial2d operators -------------------------------------------------------
    def _radial_velocity(self, u):
        m = self.mesh
        mass = np.cumsum(m.volumes * u)[:-1]
        return -mass / m.faces[1:-1]  # dPsi/dr at interior faces

    def _radial_tendency(self, u):
        m = self.mesh
        c = self._radial_velocity(u)
        uf = _upwind_faces(u, m.centers, m.faces[1:-1], c, left_mirror=True)
        flux = m.faces[1:-1] * c * uf  # outward advective flux times r
        div = np.zeros_like(u)
        div[:-1] += flux
        div[1:] -= flux
        return -div / m.volumes, c, m.gaps

    def _radial_diffusion_solve(self, rhs, coef):
        """Solve (coef I - dt*D) x = rhs; coef-scaled bands cached per (dt, coef)."""
        key = coef
        ab = self._diff_cache.get(key)
        if ab is None:
            m = self.mesh
            dt_over = coef[1]
            w = m.faces[1:-1] / m.gaps * dt_over  # dt * r_f / dx
            lower = w / m.volumes[1:]
            upper = w / m.volumes[:-1]
            diag = np.full(m.n, coef[0])
            diag[:-1] += upper
            diag[1:] += lower
            ab = np.zeros((3, m.n))
            ab[0, 1:] = -upper
            ab[1] = diag
            ab[2, :-1] = -lower
            self._diff_cache = {key: ab}
        try:
            return solve_banded((1, 1), ab, rhs)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise LinearSolveFailure(str(exc)) from exc

    # axisym3d operators -------------------------------------------------------
    def _lap_matrix(self, dirichlet: bool):
        """Cell-centered 5-point operator; returns (A, diag_boundary_weights) in flux form."""
        m = self.mesh
        n, h = m.n, m.h
        rf = m.r_faces
        idx = np.arange(n * n).reshape(n, n)
        rows, cols, vals = [], [], []
        diag = np.zeros((n, n))
        inv_vol = 1.0 / (m.r[:, None] * h**2)
        for i in range(n - 1):
            w = rf[i + 1]
            a, b = idx[i], idx[i + 1]
            rows += [a, b]
            cols += [b, a]
            vals += [w * inv_vol[i, 0] * np.ones(n), w * inv_vol[i + 1, 0] * np.ones(n)]
            diag[i] -= w * inv_vol[i, 0]
            diag[i + 1] -= w * inv_vol[i + 1, 0]
        # z direction
        wz = 1.0 / h**2
        for j in range(n - 1):
            a, b = idx[:, j], idx[:, j + 1]
            rows += [a, b]
            cols += [b, a]
            vals += [np.full(n, wz), np.full(n, wz)]
            diag[:, j] -= wz
            diag[:, j + 1] -= wz
        bw = None
        if dirichlet:
            bw = {"r-": rf[0] * inv_vol[0, 0], "r+": rf[-1] * inv_vol[-1, 0], "z": wz}
            diag[0, :] -= bw["r-"]
            diag[-1, :] -= bw["r+"]
            diag[:, 0] -= wz
            diag[:, -1] -= wz
        rows.append(idx.ravel())
        cols.append(idx.ravel())
        vals.append(diag.ravel())
        A = sparse.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(n * n, n * n))
        return A, bw

    def _build_poisson(self):
        A, self._bw = self._lap_matrix(dirichlet=True)
        try:
            return splu(A)
        except RuntimeError as exc:
            raise LinearSolveFailure(str(exc)) from exc

    def _ghost_points(self):
        m = self.mesh
        lo, hi = m.rbar[0] - m.h, m.rbar[-1] + m.h
        return {"r-": (np.full(m.n, lo), m.zbar), "r+": (np.full(m.n, hi), m.zbar),
                "z-": (m.rbar, np.full(m.n, lo)), "z+": (m.rbar, np.full(m.n, hi))}

    def ghost_potential(self, u):
        m = self.mesh
        R, Z = np.meshgrid(m.r, m.zbar, indexing="ij")
        w = u.ravel() * m.h**2
        keep = w != 0
        rs, zs, w = R.ravel()[keep], Z.ravel()[keep], w[keep]
        out = {}
        for key, (gr, gz) in self._ghosts.items():
            tr = m.offset + gr
            vals = np.empty(tr.size)
            for lo in range(0, tr.size, 32):
                sl = slice(lo, lo + 32)
                K = ring_kernel_potential(tr[sl, None], gz[sl, None], rs[None, :], zs[None, :])
                vals[sl] = K @ w
            out[key] = vals
        return out

    def potential_3d(self, u):
        m = self.mesh
        g = self.ghost_potential(u)
        rhs = -u.copy()
        rhs[0, :] -= self._bw["r-"] * g["r-"]
        rhs[-1, :] -= self._bw["r+"] * g["r+"]
        rhs[:, 0] -= self._bw["z"] * g["z-"]
        rhs[:, -1] -= self._bw["z"] * g["z+"]
        phi = self._poisson_lu.solve(rhs.ravel()).reshape(m.n, m.n)
        if not np.all(np.isfinite(phi)):
            raise LinearSolveFailure("non-finite potential")
        return phi

    def _axisym_tendency(self, u):
        m = self.mesh
        phi = self.potential_3d(u)
        cr = np.diff(phi, axis=0) / m.h  # interior r-faces, shape (n-1, n)
        cz = np.diff(phi, axis=1) / m.h  # interior z-faces, shape (n, n-1)
        ur = _upwind_faces(u, m.rbar, 0.5 * (m.rbar[1:] + m.rbar[:-1]), cr, left_mirror=False)
        uz = _upwind_faces(u.T, m.zbar, 0.5 * (m.zbar[1:] + m.zbar[:-1]), cz.T, left_mirror=False).T
        fr = (m.r_faces[1:-1, None] * m.h) * cr * ur
        fz = (m.r[:, None] * m.h) * cz * uz
        div = np.zeros_like(u)
        div[:-1] += fr
        div[1:] -= fr
        div[:, :-1] += fz
        div[:, 1:] -= fz
        vel = np.concatenate([np.abs(cr).ravel(), np.abs(cz).ravel()])
        return -div / m.volumes, vel, np.full(vel.shape, m.h)

    def _axisym_diffusion_solve(self, rhs, coef):
        lu = self._diff_cache.get(coef)
        if lu is None:
            if not hasattr(self, "_neumann_lap"):
                self._neumann_lap, _ = self._lap_matrix(dirichlet=False)
            n2 = self.mesh.n**2
            M = coef[0] * sparse.identity(n2, format="csc") - coef[1] * self._neumann_lap
            try:
                lu = splu(M.tocsc())
            except RuntimeError as exc:
                raise LinearSolveFailure(str(exc)) from exc
            self._diff_cache = {coef: lu}
        return lu.solve(rhs.ravel()).reshape(rhs.shape)

    # shared -----------------------------------------------------------------------
    def tendency(self, u):
        """Explicit drift tendency, |velocity| at faces and face spacings."""
        if self.cfg.geometry == "radial2d":
            return self._radial_tendency(u)
        return self._axisym_tendency(u)

    def _implicit(self, rhs, coef):
        if self.cfg.geometry == "radial2d":
            return self._radial_diffusion_solve(rhs, coef)
        return self._axisym_diffusion_solve(rhs, coef)

    def cfl_dt(self, vel, gaps) -> float:
        v = np.abs(vel)
        pos = v > 0
        if not pos.any():
            return self.cfg.dt_max
        return float(min(self.cfg.dt_max, self.cfg.cfl * np.min(gaps[pos] / v[pos])))

    def step(self, state: SimState, dt: float | None = None) -> tuple[SimState, StepInfo]:
        cfg = self.cfg
        u = state.u
        adv, vel, gaps = self.tendency(u)
        dt = self.cfl_dt(vel, gaps) if dt is None else dt
        sup0 = float(np.max(u)) if u.size else 0.0
        retries = 0
        while True:
            if dt < cfg.dt_min:
                raise TimestepUnderflow(f"dt = {dt:.3e} below {cfg.dt_min:.1e} at t = {state.t:.6g}")
            bdf2 = cfg.stepper == "imex_bdf2" and state.prev is not None and state.prev[0] == dt
            if bdf2:
                u_old, adv_old = state.prev[1], state.prev[2]
                rhs = 4 * u - u_old + 2 * dt * (2 * adv - adv_old)
                new = self._implicit(rhs, (3.0, 2 * dt))
            else:
                new = self._implicit(u + dt * adv, (1.0, dt))
            sup1 = float(np.max(new)) if new.size else 0.0
            if sup0 <= 0 or sup1 <= cfg.amp_cap * sup0:
                break
            dt *= 0.5
            retries += 1
        min_u = float(np.min(new))
        if sup1 > 0 and min_u < -1e-10 * sup1:
            log.warning("undershoot %.3e at t=%.6g", min_u, state.t + dt)
        nxt = SimState(state.t + dt, new, state.step + 1, (dt, u, adv))
        return nxt, StepInfo(dt, retries, min_u, 0.0)

    # diagnostics ----------------------------------------------------------------
    def field(self, u):
        m = self.mesh
        if self.cfg.geometry == "radial2d":
            return RadialField(RadialGrid(m.centers, "gamma", "sinh fv centers"), u)
        return AxisymField(m.rbar, m.zbar, u)

    def mass(self, u) -> float:
        return self.mesh.mass(u)

    def run(self, initial, log_every: int = 0) -> "SimRun":
        cfg = self.cfg
        u0 = np.asarray(initial, dtype=float)
        expect = (self.mesh.n,) if cfg.geometry == "radial2d" else (self.mesh.n, self.mesh.n)
        if u0.shape != expect:
            raise ValueError(f"initial data must have shape {expect}")
        state = SimState(0.0, u0.copy())
        run = SimRun(cfg, offset=0.0 if cfg.geometry == "radial2d" else cfg.ring_offset)
        run.record(state.t, self.field(state.u), self.mass(state.u))
        last_sup = float(np.max(u0))
        hist_t, hist_sup = [0.0], [last_sup]
        reason = "max_steps"
        try:
            while state.step < cfg.max_steps:
                if state.t >= cfg.t_end * (1 - 1e-12):
                    reason = "t_end"
                    break
                adv, vel, gaps = self.tendency(state.u)
                dt = min(self.cfl_dt(vel, gaps), cfg.t_end - state.t)
                state, info = self.step(state, dt)
                if info.retries:
                    run.events.append((state.t, f"dt halved {info.retries}x to {info.dt:.3e}"))
                sup = float(np.max(state.u))
                hist_t.append(state.t)
                hist_sup.append(sup)
                lam = math.sqrt(8 / sup) if sup > 0 else math.inf
                stop = None
                if sup >= cfg.max_sup:
                    stop = "max_sup"
                elif lam < cfg.lambda_stop * self.mesh.hmin:
                    stop = "lambda_resolution"
                if stop or sup > 0 and abs(math.log(sup / last_sup)) >= math.log(cfg.snapshot_factor):
                    run.record(state.t, self.field(state.u), self.mass(state.u))
                    last_sup = sup
                if stop:
                    reason = stop
                    break
                if log_every and state.step % log_every == 0:
                    log.info("step %d t=%.6g sup=%.4g", state.step, state.t, sup)
        except (TimestepUnderflow, LinearSolveFailure) as exc:
            run.events.append((state.t, f"error: {exc}"))
            run.stop_reason = f"error: {type(exc).__name__}"
            run.sup_history = np.array([hist_t, hist_sup])
            raise type(exc)(f"run stopped at t={state.t:.6g}, step {state.step}: {exc}") from exc
        if run.snapshots[-1][0] != state.t:
            run.record(state.t, self.field(state.u), self.mass(state.u))
        run.stop_reason = reason
        run.steps = state.step
        run.sup_history = np.array([hist_t, hist_sup])
        return run


@dataclass
class SimRun:
    config: SimConfig
    offset: float = 0.0
    snapshots: list = field(default_factory=list)
    ledger: list = field(default_factory=list)  # rows t, mass, sup_u, lambda_fit, ring_radius
    events: list = field(default_factory=list)
    stop_reason: str = ""
    steps: int = 0
    sup_history: np.ndarray | None = None

    def record(self, t, fld, mass):
        if self.snapshots and t <= self.snapshots[-1][0]:
            raise ValueError("snapshot times must increase")
        if not math.isfinite(mass):
            raise ValueError("non-finite mass")
        self.snapshots.append((t, fld))
        lam, loc = fit_scale(fld, self.offset)
        self.ledger.append((t, mass, float(np.max(fld.values)), lam, loc[0]))

    def write(self, outdir) -> list:
        out = Path(outdir)
        (out / "snapshots").mkdir(parents=True, exist_ok=True)
        files = []
        for k, (t, fld) in enumerate(self.snapshots):
            p = out / "snapshots" / f"snap_{k:04d}.ksax"
            if isinstance(fld, RadialField):
                write_axisym(p, AxisymField(fld.nodes, np.zeros(1), fld.values[:, None]))
            else:
                write_axisym(p, fld)
            files.append(p)
        p = out / "ledger.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "mass", "sup_u", "lambda_fit", "ring_radius"])
            for row in self.ledger:
                w.writerow([repr(float(v)) for v in row])
        files.append(p)
        p = out / "run.json"
        p.write_text(json.dumps({
            "config_hash": self.config.digest(), "stop_reason": self.stop_reason,
            "snapshot_index": [[k, float(t)] for k, (t, _) in enumerate(self.snapshots)],
            "ledgers": ["ledger.csv"], "steps": self.steps,
            "events": [[float(t), e] for t, e in self.events]}, indent=2) + "\n")
        files.append(p)
        return files


def step(state: SimState, config: SimConfig, dt: float | None = None) -> SimState:
    return Simulator(config).step(state, dt)[0]


def run(config: SimConfig, initial) -> SimRun:
    return Simulator(config).run(initial)


# fitting and distances -------------------------------------------------------------

def _parabola_peak(y0, y1, y2):
    """Vertex value and offset (in grid units) of the parabola through three samples."""
    den = y0 - 2 * y1 + y2
    if den >= 0:
        return y1, 0.0
    s = 0.5 * (y0 - y2) / den
    return y1 - 0.25 * (y0 - y2) * s, s


def _peak(fld, offset=0.0):
    if isinstance(fld, RadialField):
        r, v = fld.nodes, fld.values
        k = int(np.argmax(v))
        if k == 0:
            # even in r: quadratic in s = r^2 through the first three nodes
            s = r[:3] ** 2
            c = np.polyfit(s, v[:3], 2)
            return float(max(c[-1], v[0])), (0.0, 0.0)
        if k == r.size - 1:
            return float(v[k]), (float(r[k]), 0.0)
        val, ds = _parabola_peak(*v[k - 1:k + 2])
        return float(val), (float(r[k] + ds * (r[k + 1] - r[k - 1]) / 2), 0.0)
    v = fld.values
    i, j = np.unravel_index(int(np.argmax(v)), v.shape)
    val, dr, dz = float(v[i, j]), 0.0, 0.0
    if 0 < i < v.shape[0] - 1:
        vr, dr = _parabola_peak(*v[i - 1:i + 2, j])
        val = max(val, vr)
    if 0 < j < v.shape[1] - 1:
        vz, dz = _parabola_peak(*v[i, j - 1:j + 2])
        val = max(val, val + vz - v[i, j])
    return val, (float(offset + fld.r_nodes[i] + dr * fld.hr), float(fld.z_nodes[j] + dz * fld.hz))


def fit_scale(snapshot, offset: float = 0.0):
    """lambda_fit = sqrt(8 / peak) and the peak location (ring radius, z) for axisym data."""
    fld = snapshot[1] if isinstance(snapshot, tuple) else snapshot
    peak, loc = _peak(fld, offset)
    if not peak > 0:
        raise ValueError("snapshot has no positive peak")
    return math.sqrt(8 / peak), loc


@dataclass
class ProfileDistance:
    sup_local: float
    e_norm: float


def profile_distance(snapshot, lam: float, center=(0.0, 0.0), radius: float = 10.0) -> ProfileDistance:
    """Distance of lam^2 u(lam * . + center) to U: sup on {gamma <= radius} and the E-norm."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    fld = snapshot[1] if isinstance(snapshot, tuple) else snapshot
    if isinstance(fld, RadialField):
        r = fld.nodes
        if r[-1] < radius * lam:
            raise InterpolationOutOfDomain("rescaled ball leaves the grid")
        g = r / lam
        d = lam**2 * fld.values - P.U(g)
        sup = float(np.max(np.abs(d[g <= radius])))
        return ProfileDistance(sup, _e_norm_radial(g, d))
    R, Z = fld.mesh()
    gx = (R - center[0]) / lam
    gy = (Z - center[1]) / lam
    if (fld.r_nodes[0] > center[0] - radius * lam or fld.r_nodes[-1] < center[0] + radius * lam
            or fld.z_nodes[0] > center[1] - radius * lam or fld.z_nodes[-1] < center[1] + radius * lam):
        raise InterpolationOutOfDomain("rescaled ball leaves the grid")
    g = np.hypot(gx, gy)
    d = lam**2 * fld.values - P.U(g)
    sup = float(np.max(np.abs(d[g <= radius])))
    return ProfileDistance(sup, _e_norm_planar(gx[:, 0], gy[0], d))


def _e_norm_radial(g, d, nq=64):
    """H1(B(2)) + sup_{g >= 1} |d| (1+g^2)^(3/4) for a radial difference on nodes g."""
    sel = g <= 3.0
    x = np.concatenate([-g[sel][::-1], g[sel]])
    y = np.concatenate([d[sel][::-1], d[sel]])
    cs = CubicSpline(x, y)
    q, w = np.polynomial.legendre.leggauss(nq)
    s = 1.0 + q  # [0, 2]
    h1 = 2 * np.pi * np.sum(w * s * (cs(s) ** 2 + cs(s, 1) ** 2))
    far = g >= 1.0
    linf = float(np.max(np.abs(d[far]) * (1 + g[far] ** 2) ** 0.75))
    return float(np.sqrt(h1) + linf)


def _e_norm_planar(x, y, d, nq=64):
    sp = RectBivariateSpline(x, y, d, kx=5, ky=5)
    q, w = np.polynomial.legendre.leggauss(nq)
    rho = 1.0 + q
    th = 2 * np.pi * np.arange(2 * nq) / (2 * nq)
    X = rho[:, None] * np.cos(th)[None, :]
    Y = rho[:, None] * np.sin(th)[None, :]
    f = sp.ev(X, Y)
    fx, fy = sp.ev(X, Y, dx=1), sp.ev(X, Y, dy=1)
    h1 = np.sum((w * rho)[:, None] * (f**2 + fx**2 + fy**2)) * (2 * np.pi / th.size)
    gg = np.hypot(x[:, None], y[None, :])
    far = gg >= 1.0
    linf = float(np.max(np.abs(d[far]) * (1 + gg[far] ** 2) ** 0.75))
    return float(np.sqrt(h1) + linf)


# bootstrap norms of a perturbation in the parabolic plane ----------------------------

def _polar_rule(edges, nq, nth):
    q, w = np.polynomial.legendre.leggauss(nq)
    rs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            rs.append((a + b) / 2 + (b - a) / 2 * q)
            ws.append((b - a) / 2 * w)
    rho = np.concatenate(rs)
    wr = np.concatenate(ws) * rho
    th = 2 * np.pi * (np.arange(nth) + 0.5) / nth
    return rho, wr, th, 2 * np.pi / nth


def evaluate_bootstrap_norms(eps: AxisymField, nu: float, cutoffs: CutoffConfig | None = None,
                             beta: float = 0.5, nq: int = 48, nth: int = 128):
    """(||eps||_in, ||grad eps*||_{L2(U_nu)}, ||eps||_{H2(zs/2..4zs)}, ||eps (1+zeta)^1.5||_{Linf(zeta>=zs)}).

    eps is sampled on a uniform box centered at zeta = 0; it is taken to vanish
    outside the inscribed disc.  Integrals use a quintic tensor spline and a
    polar Gauss rule split at the cutoff knots.
    """
    cut = cutoffs or CutoffConfig(nu)
    if not np.all(np.isfinite(eps.values)):
        raise ValueError("eps must be finite")
    x, y = eps.r_nodes, eps.z_nodes
    rmax = min(-x[0], x[-1], -y[0], y[-1])
    if not np.any(eps.values):
        return 0.0, 0.0, 0.0, 0.0
    sp = RectBivariateSpline(x, y, eps.values, kx=5, ky=5)
    zs, ls = cut.zeta_star_big, cut.log_scale

    def grid(edges):
        edges = sorted({min(e, rmax) for e in edges})
        rho, wr, th, wt = _polar_rule(edges, nq, nth)
        X = rho[:, None] * np.cos(th)[None, :]
        Y = rho[:, None] * np.sin(th)[None, :]
        return rho[:, None], wr[:, None] * wt, X, Y

    # inner norm
    rho, w, X, Y = grid([0.0, nu, 1.0, ls, 2 * ls])
    f = sp.ev(X, Y)
    wt = nu**2 * chi(rho / ls) ** 2 * np.exp(-beta * rho**2 / 2) / P.U_nu(rho, nu)
    n_in = math.sqrt(float(np.sum(w * wt * f**2)))
    # gradient of the far-cut field
    rho, w, X, Y = grid([0.0, nu, 1.0, zs, 2 * zs])
    f, fx, fy = sp.ev(X, Y), sp.ev(X, Y, dx=1), sp.ev(X, Y, dy=1)
    c = chi(rho / zs)
    dc = dchi(rho / zs) / zs
    gx = c * fx + dc * np.cos(np.arctan2(Y, X)) * f
    gy = c * fy + dc * np.sin(np.arctan2(Y, X)) * f
    n_grad = math.sqrt(float(np.sum(w * nu**2 * (gx**2 + gy**2) / P.U_nu(rho, nu))))
    # H2 on the middle annulus
    rho, w, X, Y = grid([zs / 2, zs, 2 * zs, 4 * zs])
    terms = [sp.ev(X, Y, dx=a, dy=b) for a, b in ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))]
    h2 = terms[0] ** 2 + terms[1] ** 2 + terms[2] ** 2 + terms[3] ** 2 + 2 * terms[4] ** 2 + terms[5] ** 2
    n_h2 = math.sqrt(float(np.sum(w * h2)))
    # weighted sup: nodes beyond zeta* plus the circle zeta = zeta*
    Xn, Yn = eps.mesh()
    zn = np.hypot(Xn, Yn)
    sel = (zn >= zs) & (zn <= rmax)
    cands = [np.abs(eps.values[sel]) * (1 + zn[sel]) ** 1.5] if sel.any() else []
    if zs <= rmax:
        th = 2 * np.pi * np.arange(4 * nth) / (4 * nth)
        cands.append(np.abs(sp.ev(zs * np.cos(th), zs * np.sin(th))) * (1 + zs) ** 1.5)
    n_inf = float(max(np.max(cc) for cc in cands)) if cands else 0.0
    return n_in, n_grad, n_h2, n_inf
