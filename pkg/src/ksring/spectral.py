"""Linearized operators, building blocks and matched approximate eigenfunctions.

Conventions: Lambda f = 2f + x f', M f = f/U_nu - Psi_f, and
L0 f = Lap f - grad f . grad Psi_U - grad U . grad Psi_f + 2 U f.
Radial L0 has the flux form  m_{L0 f} = x f' + f m_U + U m_f  (m = partial mass),
which turns L0 V = S into a second-order ODE for m_V solved by variation of
constants (see invert_L0_radial).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import profiles as P
from .errors import AsymptoticMismatch, CutoffOverlap, InterpolationOutOfDomain, PoissonUndefined, TailDivergence
from .grids import (AxisymField, CutoffConfig, RadialField, RadialGrid, chi, cumint, d2chi, dchi,
                    write_radial)
from .poisson import mode_poisson, planar_potential, radial_potential

EULER = float(np.euler_gamma)


# finite differences on (possibly nonuniform) grids ---------------------------

def d1(x, f):
    """Second-order first derivative; one-sided at the ends."""
    return np.gradient(f, x, edge_order=2)


def d2(x, f):
    """Second-order second derivative (three-point, nonuniform); one-sided ends."""
    out = np.empty_like(f)
    h0 = x[1:-1] - x[:-2]
    h1 = x[2:] - x[1:-1]
    out[1:-1] = 2 * (h0 * f[2:] - (h0 + h1) * f[1:-1] + h1 * f[:-2]) / (h0 * h1 * (h0 + h1))
    out[0] = out[1] + (out[2] - out[1]) * (x[0] - x[1]) / (x[2] - x[1])
    out[-1] = out[-2] + (out[-2] - out[-3]) * (x[-1] - x[-2]) / (x[-2] - x[-3])
    return out


def lam(x, f):
    """Scaling generator Lambda f = 2f + x f'."""
    return 2 * f + x * d1(x, f)


# M and L -------------------------------------------------------------------

def _scale_weight(x, nu):
    return P.U_nu(x, nu)


def apply_M(f, nu: float = 1.0, decay: float = 4.0, mode: int = 0):
    """f/U_nu - Psi_f for radial fields (angular mode `mode`) or planar AxisymFields."""
    if isinstance(f, AxisymField):
        R, Z = f.mesh()
        rho = np.hypot(R, Z)
        psi = planar_potential(f).values
        return f.with_values(f.values / P.U_nu(rho, nu) - psi, even_z=False)
    try:
        if mode == 0:
            psi = radial_potential(f, decay).values
        else:
            psi = mode_poisson(f, mode, decay)[0].values
    except TailDivergence as exc:
        raise PoissonUndefined(str(exc)) from exc
    return f.with_values(f.values / _scale_weight(f.nodes, nu) - psi)


def apply_L(f: RadialField, nu: float = 1.0, beta: float = 0.5, variant: str = "L0_soliton",
            mode: int = 0, decay: float = 4.0) -> RadialField:
    """Centered second-order discretization of L0 (or L0 - beta Lambda) on a radial grid."""
    x = f.nodes
    v = f.values
    try:
        if mode == 0:
            dpsi = -cumint(x, x * v) / x
        else:
            dpsi = mode_poisson(f, mode, decay)[1].values
    except TailDivergence as exc:
        raise PoissonUndefined(str(exc)) from exc
    fx = d1(x, v)
    lap = d2(x, v) + fx / x - mode**2 * v / x**2
    out = lap - fx * (-P.mass_U_nu(x, nu) / x) - P.dU_nu(x, nu) * dpsi + 2 * P.U_nu(x, nu) * v
    if variant == "L_zeta_parabolic":
        out = out - beta * (2 * v + x * fx)
    elif variant != "L0_soliton":
        raise ValueError(f"unknown variant {variant!r}")
    return f.with_values(out)


def hermite_residual(f_vals, x, eig, beta: float = 0.5):
    """(H - eig) f with H = d^2 + (5/x) d - beta Lambda, by centered differences."""
    fx = d1(x, f_vals)
    return d2(x, f_vals) + 5 * fx / x - beta * (2 * f_vals + x * fx) - eig * f_vals


# inversion of L0 -----------------------------------------------------------

@dataclass(frozen=True)
class FarClass:
    """Declared far-field class V ~ C x^power (log x)^log_power."""
    power: float = 0.0
    log_power: float = 0.0


@dataclass
class Inversion:
    V: np.ndarray
    LV: np.ndarray      # Lambda V
    mV: np.ndarray      # partial mass of V
    dV: np.ndarray      # V'
    flux_residual: float


def _invert_mass(g, mS):
    """Regular solution of L0 V = S given m_S; V(0) = 0."""
    m1 = g**2 / (1 + g**2) ** 2
    G = cumint(g, g * mS)
    wp = (1 + g**2) ** 2 * G / g**3
    w = cumint(g, wp)
    LUg, L2Ug = P.LU(g), P.L2U(g)
    V = G / g**2 + LUg * w / 8
    LV = mS + w * L2Ug / 8 + g * LUg * wp / 8
    mV = m1 * w
    dV = (LV - 2 * V) / g
    # flux identity m_{L0 V} = g V' + V m_U + U m_V checked against m_S
    terms = (g * dV, V * P.mass_U(g), P.U(g) * mV)
    flux = terms[0] + terms[1] + terms[2]
    scale = np.abs(mS) + sum(np.abs(t) for t in terms)
    sel = (g > 1e-4) & (g < 1e4) & (scale > 0)
    res = float(np.max(np.abs(flux - mS)[sel] / scale[sel]))
    return Inversion(V, LV, mV, dV, res)


def _check_far(g, V, far: FarClass, name="V"):
    k = np.argmin(np.abs(g - g[-1] / 10))
    obs = V[-1] / V[k]
    ratio = g[-1] / g[k]
    exp = ratio**far.power * (np.log(g[-1]) / np.log(g[k])) ** far.log_power
    if not np.isfinite(obs) or abs(obs / exp - 1) > 0.2:
        raise AsymptoticMismatch(f"{name}: outer-decade ratio {obs:.4g} vs declared {exp:.4g}")


def invert_L0_radial(S: RadialField, far: FarClass = FarClass(), tol_inv: float = 1e-6,
                     mS=None) -> RadialField:
    """Solve L0 V = S with V(0) = 0 (regular branch, no Lambda U component at the origin).

    mS optionally supplies the partial mass of S exactly; otherwise it is integrated.
    """
    g = S.nodes
    if mS is None:
        mS = cumint(g, g * S.values)
    inv = _invert_mass(g, mS)
    if inv.flux_residual > tol_inv:
        raise AsymptoticMismatch(f"flux residual {inv.flux_residual:.2e} exceeds {tol_inv:g}")
    _check_far(g, inv.V, far)
    return S.with_values(inv.V)


# building blocks -----------------------------------------------------------

BLOCK_NAMES = ("V2", "V2t", "V4s", "V4st", "V4", "V4t")
BLOCK_FAR = {"V2": FarClass(-2), "V2t": FarClass(-2), "V4s": FarClass(0), "V4st": FarClass(0),
             "V4": FarClass(0, 1), "V4t": FarClass(0, 1)}


@dataclass
class BuildingBlockSet:
    grid: RadialGrid
    values: dict
    lam_values: dict
    masses: dict
    derivs: dict
    flux_residuals: dict = field(default_factory=dict)

    def field(self, name) -> RadialField:
        return RadialField(self.grid, self.values[name])

    def __getattr__(self, name):
        if name in BLOCK_NAMES:
            return self.field(name)
        raise AttributeError(name)

    def _spline(self, kind, name):
        key = (kind, name)
        cache = self.__dict__.setdefault("_splines", {})
        if key not in cache:
            src = {"v": self.values, "l": self.lam_values, "m": self.masses, "d": self.derivs}[kind]
            cache[key] = CubicSpline(self.grid.t, src[name])
        return cache[key]

    def eval(self, name, g, kind="v"):
        g = np.asarray(g, dtype=float)
        lo, hi = self.grid.nodes[0], self.grid.nodes[-1]
        if np.any(g > hi * (1 + 1e-12)):
            raise InterpolationOutOfDomain(f"gamma beyond block grid ({hi:g})")
        gg = np.clip(g, lo, hi)
        out = self._spline(kind, name)(np.log(gg))
        # below the first node use the small-gamma power law
        small = g < lo
        if np.any(small):
            p = 4.0 if name in ("V4s", "V4st", "V4", "V4t") else 2.0
            if kind == "m":
                p += 2
            if kind == "d":
                p -= 1
            v0 = self._spline(kind, name)(np.log(lo))
            out = np.where(small, v0 * (np.maximum(g, 0) / lo) ** p, out)
        return out


def build_blocks(grid: RadialGrid | None = None) -> BuildingBlockSet:
    if grid is None:
        return _default_blocks()
    g = grid.nodes
    vals, lams, masses, ders, res = {}, {}, {}, {}, {}

    def put(name, mS):
        inv = _invert_mass(g, mS)
        _check_far(g, inv.V, BLOCK_FAR[name], name)
        vals[name], lams[name], masses[name], ders[name] = inv.V, inv.LV, inv.mV, inv.dV
        res[name] = inv.flux_residual

    put("V2", g**2 * P.U(g))            # S = Lambda U,   m_S = g^2 U
    put("V2t", g**2 * P.LU(g))          # S = Lambda^2 U, m_S = g^2 Lambda U
    put("V4s", g**2 * vals["V2"])       # S = Lambda V2
    put("V4st", g**2 * vals["V2t"])     # S = Lambda V2t
    put("V4", masses["V2"])             # S = V2
    put("V4t", masses["V2t"])           # S = V2t
    return BuildingBlockSet(grid, vals, lams, masses, ders, res)


@lru_cache(maxsize=1)
def _default_blocks() -> BuildingBlockSet:
    return build_blocks(RadialGrid.geometric(1e-6, 1e11, 200))


# inner eigenfunction -------------------------------------------------------

def alpha_tilde(nu: float) -> float:
    return 1.0 / (2.0 * np.log(nu))


def eigenvalue(i: int, nu: float, beta: float = 0.5) -> float:
    return 2 * beta * (1 - i + alpha_tilde(nu))


def inner_coefficients(i: int, nu: float, beta: float = 0.5) -> dict:
    k = 1 - i + alpha_tilde(nu)
    b = beta
    return {"V2": 2 * b * k, "V2t": b, "V4s": 2 * b * b * k, "V4st": b * b,
            "V4": 4 * b * b * k * k, "V4t": 2 * b * b * k}


def _inner_parts(i, nu, g, blocks, beta, kind):
    c = inner_coefficients(i, nu, beta)
    out = 0.0
    for name in BLOCK_NAMES:
        w = nu**2 if name in ("V2", "V2t") else nu**4
        out = out + w * c[name] * blocks.eval(name, g, kind)
    return out


def inner_eigenfunction(i: int, nu: float, blocks: BuildingBlockSet | None = None,
                        beta: float = 0.5) -> RadialField:
    blocks = blocks or build_blocks()
    g = blocks.grid.nodes
    c = inner_coefficients(i, nu, beta)
    v = P.LU(g)
    for name in BLOCK_NAMES:
        w = nu**2 if name in ("V2", "V2t") else nu**4
        v = v + w * c[name] * blocks.values[name]
    return RadialField(blocks.grid, v)


def inner_residual_gamma(i, nu, g, blocks=None, beta=0.5):
    """Exact R^gamma = L0 phi_in - beta nu^2 Lambda phi_in - lambda nu^2 phi_in."""
    blocks = blocks or build_blocks()
    k = 1 - i + alpha_tilde(nu)
    ev = lambda n, kind="v": blocks.eval(n, g, kind)
    lam_part = ev("V4st", "l") + 2 * k * ev("V4s", "l") + 2 * k * ev("V4t", "l") + 4 * k * k * ev("V4", "l")
    val_part = ev("V4st") + 2 * k * ev("V4s") + 2 * k * ev("V4t") + 4 * k * k * ev("V4")
    return -beta**3 * nu**6 * lam_part - 2 * beta**3 * nu**6 * k * val_part


class InnerScaled:
    """A(z) = -(1/16 nu^4) phi_in(z/nu) with its derivative, partial mass and residual."""

    def __init__(self, i, nu, blocks=None, beta=0.5):
        self.i, self.nu, self.beta = i, nu, beta
        self.blocks = blocks or build_blocks()
        self.lam = eigenvalue(i, nu, beta)

    def value(self, z):
        nu = self.nu
        g = np.asarray(z) / nu
        return -(P.LU(g) + _inner_parts(self.i, nu, g, self.blocks, self.beta, "v")) / (16 * nu**4)

    def deriv(self, z):
        nu = self.nu
        g = np.asarray(z) / nu
        return -(P.dLU(g) + _inner_parts(self.i, nu, g, self.blocks, self.beta, "d")) / (16 * nu**5)

    def mass(self, z):
        nu = self.nu
        g = np.asarray(z) / nu
        return -(g**2 * P.U(g) + _inner_parts(self.i, nu, g, self.blocks, self.beta, "m")) / (16 * nu**2)

    def residual(self, z):
        nu = self.nu
        g = np.asarray(z) / nu
        return -inner_residual_gamma(self.i, nu, g, self.blocks, self.beta) / (16 * nu**6)


# outer eigenfunction -------------------------------------------------------

def _exp_e1_series(x):
    """e^x E1(x) for 0 < x < 4 by the convergent series."""
    ein = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, 80):
        term = term * (-x) / k
        ein = ein - term / k
    return np.exp(x) * (ein - EULER - np.log(x))


def _exp_e1_cf(x):
    """e^x E1(x) for x >= 4 by the modified Lentz continued fraction."""
    tiny = 1e-300
    b = x + 1.0
    c = np.full_like(x, 1 / tiny)
    d = 1.0 / b
    h = d.copy()
    for k in range(1, 200):
        a = -float(k * k)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1) < 1e-16):
            break
    return h


def exp_e1(x):
    """e^x E1(x) = 2 e^{x} int_r^inf e^{-beta s^2/2}/s ds with x = beta r^2/2."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise ValueError("exp_e1 needs x > 0")
    out = np.empty_like(x)
    lo = x < 4
    out[lo] = _exp_e1_series(x[lo])
    out[~lo] = _exp_e1_cf(x[~lo])
    return out


def _h_funcs(x):
    """h0, h1 with t_i = beta h_i / (8 x^2); series for x < 4 avoid cancellation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h0 = np.empty_like(x)
    h1 = np.empty_like(x)
    lo = x < 4
    xs = x[lo]
    if xs.size:
        ein = np.zeros_like(xs)
        term = np.ones_like(xs)
        s0 = np.zeros_like(xs)
        s1 = np.zeros_like(xs)
        fact = np.ones_like(xs)
        for k in range(1, 80):
            term = term * (-xs) / k
            ein = ein - term / k
            fact = fact * xs / k          # x^k / k!
            if k >= 2:
                s0 = s0 + (k - 1) * fact
                s1 = s1 + fact
        L = EULER + np.log(xs)
        ex = np.exp(xs)
        h0[lo] = (xs - 1) * ex * ein - L * s0
        h1[lo] = -ex * ein + L * s1
    xb = x[~lo]
    if xb.size:
        e = _exp_e1_cf(xb)
        L = EULER + np.log(xb)
        h0[~lo] = (xb - 1) * e - L
        h1[~lo] = -e - (1 + xb) * L
    return h0, h1


def omega(i: int, z, beta: float = 0.5):
    z = np.asarray(z, dtype=float)
    return 1 / z**4 + (beta / (2 * z**2) if i == 1 else 0.0)


def outer_correction(i: int, z, beta: float = 0.5):
    """(2 beta alpha)^-1 phi_tilde_i: decaying solution of (H - 2beta(1-i)) t = Omega_i
    with the homogeneous Omega_i component removed."""
    z = np.asarray(z, dtype=float)
    x = beta * z**2 / 2
    h0, h1 = _h_funcs(x)
    h = h0 if i == 0 else h1
    return (beta * h / (8 * x**2)).reshape(z.shape)


def outer_eigenfunction(i: int, z, alpha: float, beta: float = 0.5):
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("outer eigenfunction needs zeta > 0")
    return omega(i, z, beta) + 2 * beta * alpha * outer_correction(i, z, beta)


def outer_small_zeta_constant(i: int, beta: float = 0.5) -> float:
    """Limit of t_i + 1/(4 z^2) + sign_i (beta/8) log z as z -> 0."""
    c = 2 * EULER + 2 * np.log(beta / 2)
    return beta / 32 * (1 - c) if i == 0 else beta / 32 * (-3 + c)


# matching and gluing -------------------------------------------------------

@dataclass
class MatchReport:
    zeta_m: float
    sup_gap: float
    predicted_scale: float
    nu: float
    i: int


def match_report(i: int, nu: float, zeta_m: float, beta: float = 0.5, blocks=None,
                 n: int = 400) -> MatchReport:
    z = np.linspace(zeta_m / 4, 4 * zeta_m, n)
    A = InnerScaled(i, nu, blocks, beta).value(z)
    B = outer_eigenfunction(i, z, alpha_tilde(nu), beta)
    return MatchReport(zeta_m, float(np.max(np.abs(A - B))), 1 / abs(np.log(nu)), nu, i)


@dataclass
class EigenPair:
    i: int
    nu: float
    beta: float
    eigenvalue: float
    phi: RadialField
    residual: RadialField
    partial_mass_residual: float
    residual_constant: float
    match: MatchReport
    cutoffs: CutoffConfig

    def to_dict(self) -> dict:
        return {"i": self.i, "nu": self.nu, "beta": self.beta, "eigenvalue": self.eigenvalue,
                "sup_gap": self.match.sup_gap, "partial_mass_residual": self.partial_mass_residual}


def _zeta_grid(nu, cut: CutoffConfig, ppd=200):
    L = cut.log_scale
    lo = nu * 1e-4
    g = RadialGrid.geometric(lo, 3 * L, max(ppd, 64), "zeta")
    # make sure the cutoff edges are resolved exactly at nodes
    extra = np.array([cut.zeta_m, 2 * cut.zeta_m, L, 2 * L, 1.0])
    nodes = np.unique(np.concatenate([g.nodes, extra[(extra > lo) & (extra < 3 * L)]]))
    keep = np.concatenate([[True], np.diff(np.log(nodes)) > 1e-6])
    return RadialGrid(nodes[keep], "zeta", g.grading + " + cutoff nodes")


def glue_eigenfunction(i: int, nu: float, cutoffs: CutoffConfig | None = None, beta: float = 0.5,
                       blocks=None, ppd: int = 200, match_zeta_m: float | None = None) -> EigenPair:
    """phi = -(1/16 nu^4) phi_in(z/nu) chi_m + (1 - chi_m) chi_nu phi_ex with residual.

    Writing phi = chi_nu A + E with E = (1-chi_m) chi_nu (B - A), the residual is
    chi_nu R_in (exact) + [L, chi_nu] A (closed form) + (L - lambda) E (discrete).
    """
    cut = cutoffs or CutoffConfig(nu=nu)
    if cut.nu != nu:
        raise ValueError("cutoff nu differs from nu")
    L = cut.log_scale
    if 2 * cut.zeta_m > L:
        raise CutoffOverlap(f"2 zeta_m = {2 * cut.zeta_m:g} exceeds |log nu| = {L:g}")
    blocks = blocks or build_blocks()
    inn = InnerScaled(i, nu, blocks, beta)
    lam_ = inn.lam
    at = alpha_tilde(nu)
    grid = _zeta_grid(nu, cut, ppd)
    z = grid.nodes

    A = inn.value(z)
    dA = inn.deriv(z)
    mA = inn.mass(z)
    Rin = inn.residual(z)
    cm = chi(z / cut.zeta_m)
    cn = chi(z / L)
    dcn = dchi(z / L) / L
    d2cn = d2chi(z / L) / L**2

    E = np.zeros_like(z)
    act = (z >= cut.zeta_m) & (z < 2 * L)
    B = np.zeros_like(z)
    B[act] = outer_eigenfunction(i, z[act], at, beta)
    E[act] = ((1 - cm) * cn * (B - A))[act]
    phi = cn * A + E

    # commutator [L - lambda, chi_nu] A
    m_shift = -cumint(z, dcn * mA)  # m_{chi A} - chi m_A
    dpsiU = -P.mass_U_nu(z, nu) / z
    comm = (2 * dcn * dA + A * (d2cn + dcn / z) - dcn * A * dpsiU - beta * z * dcn * A
            + P.dU_nu(z, nu) * m_shift / z)
    LE = apply_L(RadialField(grid, E), nu, beta, "L_zeta_parabolic").values - lam_ * E
    R = cn * Rin + comm + LE

    # partial-mass residual via the flux identity m_R = z phi' + phi m_U + U m_phi - beta z^2 phi - lambda m_phi
    mE = cumint(z, z * E)
    m_phi = cn * mA + m_shift + mE
    dphi = dcn * A + cn * dA + d1(z, E)
    mR = z * dphi + phi * P.mass_U_nu(z, nu) + P.U_nu(z, nu) * m_phi - beta * z**2 * phi - lam_ * m_phi
    pm = float(CubicSpline(np.log(z), mR)(0.0))

    zm_match = cut.zeta_m if match_zeta_m is None else match_zeta_m
    rep = match_report(i, nu, zm_match, beta, blocks)
    return EigenPair(i, nu, beta, lam_, RadialField(grid, phi), RadialField(grid, R), pm,
                     abs(pm) * L, rep, cut)


def export_eigenpair(pair: EigenPair, outdir) -> list:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"eigen_i{pair.i}_nu{pair.nu:.0e}"
    files = [out / f"{stem}.json", out / f"{stem}_phi.txt", out / f"{stem}_residual.txt"]
    files[0].write_text(json.dumps(pair.to_dict(), indent=2, sort_keys=True) + "\n")
    write_radial(files[1], pair.phi)
    write_radial(files[2], pair.residual)
    return files


# adapted inner product, definiteness, inner norm -----------------------------

def _radial_weights(x):
    """Trapezoid weights in t = log x for int f x dx = int f x^2 dt."""
    t = np.log(x)
    w = np.zeros_like(x)
    dt = np.diff(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w * x**2


def _log_max_apply(x, w, b):
    """(K b)_i = sum_j w_j b_j log max(x_i, x_j); K symmetric by construction."""
    wb = w * b
    lower = np.cumsum(wb)                          # sum_{j <= i}
    upper = np.cumsum((wb * np.log(x))[::-1])[::-1]  # sum_{j >= i}
    upper = np.concatenate([upper[1:], [0.0]])      # sum_{j > i}
    return np.log(x) * lower + upper


def quadratic_form_M(f, g, nu: float = 1.0) -> float:
    """int f M g over R^2 with a discretization that is symmetric in (f, g)."""
    if isinstance(f, AxisymField):
        R, Z = f.mesh()
        rho = np.hypot(R, Z)
        cell = f.hr * f.hz
        psi_g = planar_potential(g).values
        return float(np.sum(f.values * g.values / P.U_nu(rho, nu)) * cell - np.sum(f.values * psi_g) * cell)
    x = f.nodes
    w = _radial_weights(x)
    local = np.sum(w * f.values * g.values / P.U_nu(x, nu))
    psi_g = -_log_max_apply(x, w, g.values)
    return float(2 * np.pi * (local - np.sum(w * f.values * psi_g)))


def adapted_inner_product(f, g, nu: float, cutoffs: CutoffConfig | None = None,
                          beta: float = 0.5) -> float:
    """<f, g>_{nu,*} = int sqrt(rho) chi_nu f M(sqrt(rho) chi_nu g)."""
    cut = cutoffs or CutoffConfig(nu=nu)
    if isinstance(f, AxisymField):
        R, Z = f.mesh()
        zz = np.hypot(R, Z)
    else:
        zz = f.nodes
    wgt = np.exp(-beta * zz**2 / 4) * cut.chi_nu(zz)
    return quadratic_form_M(f.with_values(wgt * f.values), g.with_values(wgt * g.values), nu)


@dataclass
class DefinitenessReport:
    n: int
    seed: int
    min_ratio: float
    ratios: np.ndarray = field(repr=False)
    passed: bool = True


def random_zero_mean_field(rng, half_width=8.0, n=257, bumps=4):
    base = AxisymField.uniform(half_width, n, even_z=False)
    R, Z = base.mesh()
    f = np.zeros_like(R)
    for _ in range(bumps):
        c = rng.uniform(-2, 2, 2)
        s = rng.uniform(0.3, 1.0)
        f += rng.normal() * np.exp(-((R - c[0]) ** 2 + (Z - c[1]) ** 2) / (2 * s * s))
    bump = np.exp(-(R**2 + Z**2))
    f -= bump * f.sum() / bump.sum()
    return base.with_values(f)


def definiteness_probe(n: int = 200, seed: int = 0, nu: float = 1.0, tol: float = 1e-8,
                       half_width: float = 8.0, npts: int = 257) -> DefinitenessReport:
    rng = np.random.default_rng(seed)
    ratios = np.empty(n)
    for k in range(n):
        f = random_zero_mean_field(rng, half_width, npts)
        q = quadratic_form_M(f, f, nu)
        ratios[k] = q / (np.sum(f.values**2) * f.hr * f.hz)
    return DefinitenessReport(n, seed, float(ratios.min()), ratios, bool(ratios.min() >= -tol))


def _tensor_weights(f: AxisymField):
    wr = np.full(f.r_nodes.size, f.hr)
    wr[[0, -1]] *= 0.5
    wz = np.full(f.z_nodes.size, f.hz)
    wz[[0, -1]] *= 0.5
    return wr[:, None] * wz[None, :]


def bootstrap_norm_in(eps, nu: float, cutoffs: CutoffConfig | None = None, beta: float = 0.5) -> float:
    """(int nu^2 eps^2 chi_nu^2 exp(-beta z^2/2) / U_nu)^(1/2)."""
    cut = cutoffs or CutoffConfig(nu=nu)
    if isinstance(eps, AxisymField):
        R, Z = eps.mesh()
        zz = np.hypot(R, Z)
        dens = nu**2 * eps.values**2 * cut.chi_nu(zz) ** 2 * np.exp(-beta * zz**2 / 2) / P.U_nu(zz, nu)
        return float(np.sqrt(np.sum(dens * _tensor_weights(eps))))
    x = eps.nodes
    dens = nu**2 * eps.values**2 * cut.chi_nu(x) ** 2 * np.exp(-beta * x**2 / 2) / P.U_nu(x, nu)
    return float(np.sqrt(2 * np.pi * np.sum(_radial_weights(x) * dens)))
