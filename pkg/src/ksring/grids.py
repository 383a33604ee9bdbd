"""Radial and axisymmetric grids, field containers, cutoffs and weights.

Radial grids are geometric (uniform in log of the radius).  All cumulative
integrals are done in t = log(r), where a cubic spline of the integrand
times r is exact for power laws up to roundoff and fourth-order otherwise.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import InterpolationOutOfDomain

VARIABLES = ("gamma", "zeta")
G_MIN = 64


@dataclass(frozen=True)
class RadialGrid:
    nodes: np.ndarray
    variable: str = "gamma"
    grading: str = "custom"

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 4:
            raise ValueError("radial grid needs at least 4 nodes")
        if x[0] <= 0 or np.any(np.diff(x) <= 0):
            raise ValueError("radial nodes must be positive and strictly increasing")
        if self.variable not in VARIABLES:
            raise ValueError(f"variable must be one of {VARIABLES}")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @classmethod
    def geometric(cls, r_min: float = 1e-6, r_max: float = 1e3, ppd: int = G_MIN,
                  variable: str = "gamma") -> "RadialGrid":
        if ppd < G_MIN:
            raise ValueError(f"at least {G_MIN} points per decade required")
        decades = np.log10(r_max / r_min)
        n = int(np.ceil(decades * ppd)) + 1
        nodes = r_min * 10.0 ** (np.arange(n) / ppd)
        return cls(nodes, variable, f"geometric ppd={ppd} [{r_min:g}, {nodes[-1]:g}]")

    @property
    def t(self) -> np.ndarray:
        return np.log(self.nodes)

    @property
    def h(self) -> float:
        """Log-spacing (uniform for geometric grids)."""
        return float(np.max(np.diff(self.t)))

    def __len__(self):
        return self.nodes.size


@dataclass
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise ValueError("values must match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("RadialField values must be finite")
        self.values = v

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def __call__(self, x) -> np.ndarray:
        """Monotone cubic (PCHIP) interpolation in log of the radius."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.nodes[0], self.nodes[-1]
        if np.any(x < lo * (1 - 1e-12)) or np.any(x > hi * (1 + 1e-12)):
            raise InterpolationOutOfDomain(f"evaluation outside [{lo:g}, {hi:g}]")
        return PchipInterpolator(self.grid.t, self.values)(np.log(np.clip(x, lo, hi)))

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, values)


@dataclass
class AxisymField:
    """Samples u(rbar, zbar) on a uniform tensor grid; values[i, j] = u(r_i, z_j)."""
    r_nodes: np.ndarray
    z_nodes: np.ndarray
    values: np.ndarray
    even_z: bool = False

    def __post_init__(self):
        self.r_nodes = np.asarray(self.r_nodes, dtype=float)
        self.z_nodes = np.asarray(self.z_nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.r_nodes.size, self.z_nodes.size):
            raise ValueError("values must have shape (len(r_nodes), len(z_nodes))")
        for g in (self.r_nodes, self.z_nodes):
            if np.any(np.diff(g) <= 0):
                raise ValueError("grid nodes must be strictly increasing")
        if self.even_z:
            if not np.allclose(self.z_nodes, -self.z_nodes[::-1], rtol=0, atol=1e-12):
                raise ValueError("even_z requires a z grid symmetric about 0")
            if not np.array_equal(self.values, self.values[:, ::-1]):
                raise ValueError("values are not even in z")

    @classmethod
    def uniform(cls, half_width: float, n: int, func=None, even_z: bool = True,
                r_center: float = 0.0) -> "AxisymField":
        r = r_center + np.linspace(-half_width, half_width, n)
        z = np.linspace(-half_width, half_width, n)
        z = 0.5 * (z - z[::-1])  # exact mirror symmetry
        vals = np.zeros((n, n)) if func is None else func(r[:, None], z[None, :])
        vals = np.broadcast_to(vals, (n, n)).copy()
        if even_z:
            vals = 0.5 * (vals + vals[:, ::-1])
        return cls(r, z, vals, even_z)

    @property
    def hr(self) -> float:
        return float(self.r_nodes[1] - self.r_nodes[0])

    @property
    def hz(self) -> float:
        return float(self.z_nodes[1] - self.z_nodes[0])

    def mesh(self):
        return np.meshgrid(self.r_nodes, self.z_nodes, indexing="ij")

    def with_values(self, values, even_z=None) -> "AxisymField":
        return AxisymField(self.r_nodes, self.z_nodes, values,
                           self.even_z if even_z is None else even_z)


def chi(x):
    """Cutoff: 1 on [0,1], 0 on [2,inf), degree-7 smoothstep in between."""
    s = np.clip(np.asarray(x, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 - s**4 * (35 - 84 * s + 70 * s**2 - 20 * s**3)


def dchi(x):
    x = np.asarray(x, dtype=float)
    s = np.clip(x - 1.0, 0.0, 1.0)
    d = -140 * s**3 * (1 - s) ** 3
    return np.where((x > 1) & (x < 2), d, 0.0)


def d2chi(x):
    x = np.asarray(x, dtype=float)
    s = np.clip(x - 1.0, 0.0, 1.0)
    d = -420 * s**2 * (1 - s) ** 2 * (1 - 2 * s)
    return np.where((x > 1) & (x < 2), d, 0.0)


@dataclass
class CutoffConfig:
    nu: float
    zeta_star_small: float = 0.05
    zeta_star_big: float = 20.0
    zeta_m: float = 0.05

    def __post_init__(self):
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")
        if not 0 < self.zeta_star_small < 1 < self.zeta_star_big:
            raise ValueError("need 0 < zeta_star_small < 1 < zeta_star_big")
        if self.zeta_m <= 0:
            raise ValueError("zeta_m must be positive")

    @property
    def log_scale(self) -> float:
        return abs(np.log(self.nu))

    def chi_star_small(self, zeta):
        return chi(np.asarray(zeta) / self.zeta_star_small)

    def chi_star_big(self, zeta):
        return chi(np.asarray(zeta) / self.zeta_star_big)

    def chi_m(self, zeta):
        return chi(np.asarray(zeta) / self.zeta_m)

    def chi_nu(self, zeta):
        return chi(np.asarray(zeta) / self.log_scale)

    def chibar_nu(self, gamma):
        return chi(np.asarray(gamma) * self.nu / self.log_scale)


@dataclass(frozen=True)
class WeightSpec:
    nu: float
    beta: float = 0.5

    def rho_zeta(self, zeta):
        return np.exp(-self.beta * np.asarray(zeta) ** 2 / 2)

    def rho_gamma(self, gamma):
        return np.exp(-self.beta * self.nu**2 * np.asarray(gamma) ** 2 / 2)


# quadrature on geometric grids ---------------------------------------------

def _head(x, f):
    """Integral of f over (0, x[0]) assuming a local power law."""
    if f[0] == 0.0:
        return 0.0
    if f[1] == 0.0 or np.sign(f[1]) != np.sign(f[0]):
        return f[0] * x[0]
    k = np.log(f[1] / f[0]) / np.log(x[1] / x[0])
    if k <= -1:
        raise ValueError("integrand not integrable at the origin")
    return f[0] * x[0] / (k + 1)


def cumint(x, f):
    """Cumulative integral int_0^x f(s) ds at every node."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    t = np.log(x)
    out = CubicSpline(t, f * x).antiderivative()(t)
    return out - out[0] + _head(x, f)


def tail(x_end, f_end, decay):
    """Integral of f over (x_end, inf) for f ~ f_end (s/x_end)^(-decay)."""
    if decay <= 1:
        return np.inf if f_end != 0 else 0.0
    return f_end * x_end / (decay - 1)


def revint(x, f, decay):
    """int_x^inf f(s) ds with a power-law tail beyond the last node."""
    c = cumint(x, f)
    return c[-1] - c + tail(x[-1], f[-1], decay)


def cumint_uniform(x, f):
    """Cumulative integral on an arbitrary increasing grid, starting at x[0]."""
    cs = CubicSpline(x, f).antiderivative()
    return cs(x) - cs(x[0])


# serialization ---------------------------------------------------------------

def write_radial(path, f: RadialField):
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# variable={f.grid.variable} n={len(f.grid)}\n")
        for x, v in zip(f.nodes, f.values):
            fh.write(f"{float(x)!r},{float(v)!r}\n")


def read_radial(path) -> RadialField:
    lines = Path(path).read_text().splitlines()
    head = dict(kv.split("=") for kv in lines[0].lstrip("# ").split())
    data = np.array([[float(a) for a in ln.split(",")] for ln in lines[1:] if ln])
    if data.shape[0] != int(head["n"]):
        raise ValueError("row count does not match header")
    return RadialField(RadialGrid(data[:, 0], head["variable"], "from file"), data[:, 1])


_MAGIC = b"KSAX"


def write_axisym(path, f: AxisymField):
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        for g in (f.r_nodes, f.z_nodes):
            fh.write(struct.pack("<Q", g.size))
            fh.write(g.astype("<f8").tobytes())
        fh.write(f.values.astype("<f8").tobytes(order="C"))


def read_axisym(path, even_z: bool = False) -> AxisymField:
    buf = Path(path).read_bytes()
    if buf[:4] != _MAGIC:
        raise ValueError("not a KSAX file")
    pos = 4
    grids = []
    for _ in range(2):
        (n,) = struct.unpack_from("<Q", buf, pos)
        pos += 8
        grids.append(np.frombuffer(buf, "<f8", n, pos).copy())
        pos += 8 * n
    nr, nz = grids[0].size, grids[1].size
    vals = np.frombuffer(buf, "<f8", nr * nz, pos).reshape(nr, nz).copy()
    return AxisymField(grids[0], grids[1], vals, even_z)
