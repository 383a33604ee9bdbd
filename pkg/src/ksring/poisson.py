"""Poisson solvers: radial quadrature, 2D Fourier modes, planar FFT, axisymmetric 3D.

Sign convention throughout: -Laplace(Psi) = S.  The 2D potential is the
log-kernel convolution Psi = -(1/2pi) log|x| * S, so Psi_U = -2 log(1+g^2).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve
from scipy.special import ellipe, ellipkm1

from .errors import DecayHypothesisViolated, ModeDivergence, SingularEvaluation, TailDivergence
from .grids import AxisymField, RadialField, cumint, revint


# radial --------------------------------------------------------------------

def partial_mass(f: RadialField) -> np.ndarray:
    """m(g) = int_0^g s f(s) ds."""
    g = f.nodes
    return cumint(g, g * f.values)


def total_mass(f: RadialField, decay: float = 4.0) -> float:
    """2 pi int_0^inf f g dg with a tail correction for |f| ~ g^-decay."""
    if decay <= 2:
        raise TailDivergence(f"decay exponent {decay} <= 2: mass integral diverges")
    g = f.nodes
    m = cumint(g, g * f.values)
    tail = f.values[-1] * g[-1] ** 2 / (decay - 2)
    return float(2 * np.pi * (m[-1] + tail))


def radial_poisson_gradient(S: RadialField) -> RadialField:
    """dPsi/dg = -(1/g) int_0^g s S(s) ds."""
    return S.with_values(-partial_mass(S) / S.nodes)


def radial_potential(S: RadialField, decay: float = 4.0) -> RadialField:
    """Psi(g) = -log(g) m(g) - int_g^inf s log(s) S(s) ds."""
    if decay <= 2:
        raise TailDivergence(f"decay exponent {decay} <= 2: potential undefined")
    g = S.nodes
    m = cumint(g, g * S.values)
    G = g[-1]
    c = S.values[-1] * G**2
    tail = c * (np.log(G) / (decay - 2) + 1 / (decay - 2) ** 2)
    outer = revint(g, g * np.log(g) * S.values, np.inf) + tail
    return S.with_values(-np.log(g) * m - outer)


# Fourier modes -------------------------------------------------------------

def mode_poisson(u: RadialField, j: int, decay: float = 4.0):
    """Potential and its g-derivative for one angular mode u_j(g) cos(j theta)."""
    if j < 1:
        raise ValueError("mode index must be >= 1 (use radial_potential for j = 0)")
    if decay <= 2 - j:
        raise ModeDivergence(f"outer integral diverges for decay {decay} and j = {j}")
    g = u.nodes
    inner = cumint(g, u.values * g ** (1 + j))
    p = decay - (1 - j)  # decay of the outer integrand
    outer = revint(g, u.values * g ** (1 - j), p)
    psi = (g**j * outer + g ** (-j) * inner) / (2 * j)
    dpsi = 0.5 * (g ** (j - 1) * outer - g ** (-j - 1) * inner)
    return u.with_values(psi), u.with_values(dpsi)


def fourier_mode_poisson(coeffs: dict, decay: float = 4.0) -> dict:
    """coeffs maps (sign, j) -> RadialField; returns (sign, j) -> (Psi, dPsi)."""
    out = {}
    for key, u in coeffs.items():
        sign, j = key
        if sign not in ("+", "-"):
            raise ValueError("mode sign must be '+' (cos) or '-' (sin)")
        out[key] = mode_poisson(u, int(j), decay)
    return out


# planar 2D -----------------------------------------------------------------

def _log_antiderivative(x, y):
    """F with d2F/dxdy = log(x^2+y^2)."""
    r2 = x**2 + y**2
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(r2 > 0, x * y * (np.log(np.where(r2 > 0, r2, 1.0)) - 3), 0.0)
        t2 = np.where(x != 0, x**2 * np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
        t3 = np.where(y != 0, y**2 * np.arctan(x / np.where(y != 0, y, 1.0)), 0.0)
    return t1 + t2 + t3


def cell_log_kernel(nx: int, ny: int, hx: float, hy: float) -> np.ndarray:
    """Cell-averaged -(1/2pi) log|x| on offsets -(n-1)..(n-1) times the cell area."""
    ox = hx * np.arange(-(nx - 1), nx)[:, None]
    oy = hy * np.arange(-(ny - 1), ny)[None, :]
    F = _log_antiderivative
    a, b = hx / 2, hy / 2
    integral = F(ox + a, oy + b) - F(ox + a, oy - b) - F(ox - a, oy + b) + F(ox - a, oy - b)
    return -integral / (4 * np.pi)


def planar_potential(u: AxisymField) -> AxisymField:
    """Free-space 2D log potential of u (piecewise constant on cells) via FFT convolution."""
    nx, ny = u.values.shape
    K = cell_log_kernel(nx, ny, u.hr, u.hz)
    psi = fftconvolve(u.values, K, mode="same")
    return u.with_values(psi, even_z=False)


# axisymmetric 3D kernels ---------------------------------------------------

def ring_kernel_potential(r, z, rs, zs):
    """Potential at (r,z) of a unit-density ring at (rs,zs), per unit drs dzs."""
    a2 = (r + rs) ** 2 + (z - zs) ** 2
    p = ((r - rs) ** 2 + (z - zs) ** 2) / a2  # 1 - m without cancellation
    return rs * ellipkm1(np.maximum(p, 1e-300)) / (np.pi * np.sqrt(a2))


def _h_coeffs(n=90):
    # (1 - m/2) E - (1 - m) K = (pi/2) sum h_j m^j, exact rational coefficients
    k = [Fraction(1)]
    for j in range(1, n):
        k.append(k[-1] * Fraction(2 * j - 1, 2 * j) ** 2)
    e = [kj / (1 - 2 * j) for j, kj in enumerate(k)]
    h = [e[0] - k[0]] + [e[j] - e[j - 1] / 2 - k[j] + k[j - 1] for j in range(1, n)]
    return np.array([float(x) for x in h])


_H = _h_coeffs()


def ring_kernel_gradient(r, z, rs, zs):
    """(d/dr, d/dz) of ring_kernel_potential: -(rs/2pi) int_0^pi (r - rs cos, z - zs)/D^1.5."""
    r, z, rs, zs = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, z, rs, zs)))
    dz = z - zs
    a2 = (r + rs) ** 2 + dz**2
    b2 = (r - rs) ** 2 + dz**2  # formed directly: 1 - m loses digits near the ring
    a = np.sqrt(a2)
    m = 4 * r * rs / a2
    m1 = b2 / a2
    E = ellipe(m)
    kz = -(rs / (2 * np.pi)) * dz * 2 * E / (b2 * a)
    # m < 1/2: r I0 - rs I1 with B I1 = 2 h(m) / (a (1 - m)) and h = O(m^2) from its series
    B = 2 * r * rs
    ms = np.minimum(m, 0.5)
    h = 0.5 * np.pi * np.polynomial.polynomial.polyval(ms, _H)
    with np.errstate(divide="ignore", invalid="ignore"):
        I1 = np.where(B > 0, 2 * h / (a * m1) / np.where(B > 0, B, 1.0), 0.0)
        near = r * 2 * E / (b2 * a) - rs * I1
        # m >= 1/2: closed form (K + (r^2 - rs^2 - dz^2) E / b2) / (r a)
        far = (ellipkm1(m1) + ((r - rs) * (r + rs) - dz**2) * E / b2) / (r * a)
    kr = -(rs / (2 * np.pi)) * np.where(m < 0.5, near, far)
    if kr.ndim == 0:
        return float(kr), float(kz)
    return kr, kz


def planar_kernel_gradient(r, z, rs, zs):
    dr, dz = r - rs, z - zs
    d2 = dr**2 + dz**2
    return -dr / (2 * np.pi * d2), -dz / (2 * np.pi * d2)


def _self_cell_moments(hr, hz):
    """int over the centered cell of (x^2, y^2)/(x^2+y^2)."""
    cx = integrate.dblquad(lambda y, x: x * x / (x * x + y * y) if x or y else 0.5,
                           -hr / 2, hr / 2, -hz / 2, hz / 2, epsabs=1e-13)[0]
    return cx, hr * hz - cx


def _direct_gradient(u: AxisymField, targets, kernel, offset, desingularize):
    r_src, z_src = u.mesh()
    rs = (offset + r_src).ravel()
    zs = z_src.ravel()
    w = u.values.ravel() * u.hr * u.hz
    keep = w != 0
    rs, zs, w = rs[keep], zs[keep], w[keep]
    tr = offset + np.asarray(targets[0], dtype=float).ravel()
    tz = np.asarray(targets[1], dtype=float).ravel()
    gr = np.zeros(tr.size)
    gz = np.zeros(tr.size)
    tol = 1e-9 * min(u.hr, u.hz)
    hit_any = False
    for lo in range(0, tr.size, 128):
        sl = slice(lo, lo + 128)
        R, Z = tr[sl, None], tz[sl, None]
        hit = (np.abs(R - rs[None, :]) < tol) & (np.abs(Z - zs[None, :]) < tol)
        if hit.any():
            hit_any = True
            if not desingularize:
                raise SingularEvaluation("target coincides with a source node")
        with np.errstate(divide="ignore", invalid="ignore"):
            kr, kz = kernel(R, Z, rs[None, :], zs[None, :])
        kr = np.where(hit, 0.0, kr)
        kz = np.where(hit, 0.0, kz)
        gr[sl] = kr @ w
        gz[sl] = kz @ w
    if hit_any:
        # local correction from the linear part of u on the punctured cell
        cx, cy = _self_cell_moments(u.hr, u.hz)
        dur, duz = np.gradient(u.values, u.hr, u.hz, edge_order=2)
        ti = np.rint((tr - offset - u.r_nodes[0]) / u.hr).astype(int)
        tj = np.rint((tz - u.z_nodes[0]) / u.hz).astype(int)
        on = ((ti >= 0) & (ti < u.r_nodes.size) & (tj >= 0) & (tj < u.z_nodes.size))
        on &= np.abs(tr - offset - u.r_nodes[np.clip(ti, 0, u.r_nodes.size - 1)]) < tol
        on &= np.abs(tz - u.z_nodes[np.clip(tj, 0, u.z_nodes.size - 1)]) < tol
        gr[on] += cx * dur[ti[on], tj[on]] / (2 * np.pi)
        gz[on] += cy * duz[ti[on], tj[on]] / (2 * np.pi)
    return gr, gz


def axisym_poisson_3d_gradient(u: AxisymField, ring_offset: float, targets=None,
                               desingularize: bool = True):
    """Gradient of the 3D Newtonian potential of the axisymmetric density u.

    u lives on (rbar, zbar) with physical radius r = ring_offset + rbar.  With
    targets=None the gradient is returned on the grid as two AxisymFields.
    """
    if ring_offset + u.r_nodes[0] <= 0:
        raise ValueError("grid crosses the symmetry axis")
    on_grid = targets is None
    if on_grid:
        R, Z = u.mesh()
        targets = (R, Z)
    gr, gz = _direct_gradient(u, targets, ring_kernel_gradient, ring_offset, desingularize)
    if on_grid:
        shape = u.values.shape
        return (u.with_values(gr.reshape(shape), even_z=False),
                u.with_values(gz.reshape(shape), even_z=False))
    return gr, gz


def planar_gradient(u: AxisymField, targets=None, desingularize: bool = True):
    """Gradient of the 2D log potential of u by the same direct quadrature."""
    on_grid = targets is None
    if on_grid:
        R, Z = u.mesh()
        targets = (R, Z)
    gr, gz = _direct_gradient(u, targets, planar_kernel_gradient, 0.0, desingularize)
    if on_grid:
        shape = u.values.shape
        return (u.with_values(gr.reshape(shape), even_z=False),
                u.with_values(gz.reshape(shape), even_z=False))
    return gr, gz


def axisym_potential_3d(u: AxisymField, ring_offset: float, targets) -> np.ndarray:
    """3D potential at off-grid targets (used for Dirichlet data of the PDE solver)."""
    r_src, z_src = u.mesh()
    rs = (ring_offset + r_src).ravel()
    zs = z_src.ravel()
    w = u.values.ravel() * u.hr * u.hz
    keep = w != 0
    rs, zs, w = rs[keep], zs[keep], w[keep]
    tr = ring_offset + np.asarray(targets[0], dtype=float).ravel()
    tz = np.asarray(targets[1], dtype=float).ravel()
    out = np.zeros(tr.size)
    for lo in range(0, tr.size, 128):
        sl = slice(lo, lo + 128)
        out[sl] = ring_kernel_potential(tr[sl, None], tz[sl, None], rs[None, :], zs[None, :]) @ w
    return out


@dataclass
class Poisson23Report:
    ring_offset: float
    probe_radius: float
    near_sup_diff: float
    far_sup: float
    mu: float
    kappa: float
    predicted_scale: float
    L_inf: float
    L_2: float
    L_2_prime: float


def decay_constants(u: AxisymField, zeta_star: float):
    """Estimates of the (L_inf, L_2, L_2') constants of the decay hypothesis."""
    R, Z = u.mesh()
    rho = np.hypot(R, Z)
    inside = rho < zeta_star
    w = u.hr * u.hz
    L_inf = float(np.max(np.abs(u.values[~inside]) * (1 + rho[~inside] ** 2) ** 0.75, initial=0.0))
    L_2 = float(np.sqrt(np.sum(u.values[inside] ** 2) * w))
    gr, gzz = np.gradient(u.values, u.hr, u.hz, edge_order=2)
    L_2p = float(np.sqrt(np.sum((gr**2 + gzz**2)[inside]) * w))
    return L_inf, L_2, L_2p


def poisson_2d_3d_difference(u: AxisymField, ring_offset: float, probe_radius: float,
                             s: float = 0.9, kappa: float = 0.5, zeta_star: float = 2.0,
                             n_far: int = 64) -> Poisson23Report:
    """Near-field |grad Psi_2D - grad Phi_3D| and far-field |grad Phi_3D| sup-norms.

    mu is taken as 1/ring_offset (unit ring radius).  kappa is not certified;
    the report carries mu^kappa only as a reference scale.
    """
    if not 6 / 7 < s < 1:
        raise ValueError("s must lie in (6/7, 1)")
    consts = decay_constants(u, zeta_star)
    if not all(np.isfinite(consts)):
        raise DecayHypothesisViolated("decay constants are not finite")
    R, Z = u.mesh()
    ball = np.hypot(R, Z) <= probe_radius
    tg = (R[ball], Z[ball])
    g2r, g2z = planar_gradient(u, tg)
    g3r, g3z = axisym_poisson_3d_gradient(u, ring_offset, tg)
    near = float(np.max(np.hypot(g2r - g3r, g2z - g3z), initial=0.0))
    th = np.linspace(0, 2 * np.pi, n_far, endpoint=False)
    rad = probe_radius * np.array([1.0, 2.0, 4.0])
    fr = (rad[:, None] * np.cos(th)[None, :]).ravel()
    fz = (rad[:, None] * np.sin(th)[None, :]).ravel()
    ok = ring_offset + fr > 0
    f3r, f3z = axisym_poisson_3d_gradient(u, ring_offset, (fr[ok], fz[ok]))
    far = float(np.max(np.hypot(f3r, f3z), initial=0.0))
    mu = 1.0 / ring_offset
    return Poisson23Report(ring_offset, probe_radius, near, far, mu, kappa, mu**kappa, *consts)
