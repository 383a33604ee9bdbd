"""Modulation equations, the reduced blowup law and the shooting argument for the unstable mode."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NoSignChange


@dataclass
class ModulationState:
    tau: float
    nu: float
    a: float
    drift: float = 0.0

    def __post_init__(self):
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")

    @property
    def atilde(self) -> float:
        return self.a - 8 * self.nu**2

    @property
    def log2nu(self) -> float:
        return float(np.log(self.nu) ** 2)


@dataclass
class Trajectory:
    tau: np.ndarray
    nu: np.ndarray
    a: np.ndarray
    drift: np.ndarray
    norms: dict = field(default_factory=dict)  # optional traces keyed by name

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        if np.any(np.diff(self.tau) <= 0):
            raise ValueError("tau must be strictly increasing")
        n = self.tau.size
        self.nu = np.broadcast_to(np.asarray(self.nu, dtype=float), (n,)).copy()
        self.a = np.broadcast_to(np.asarray(self.a, dtype=float), (n,)).copy()
        self.drift = np.broadcast_to(np.asarray(self.drift, dtype=float), (n,)).copy()

    @property
    def atilde(self):
        return self.a - 8 * self.nu**2

    @property
    def log2nu(self):
        return np.log(self.nu) ** 2

    def states(self):
        return [ModulationState(*row) for row in zip(self.tau, self.nu, self.a, self.drift)]

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau", "nu", "a", "drift", "log2nu", "atilde"])
            for row in zip(self.tau, self.nu, self.a, self.drift, self.log2nu, self.atilde):
                w.writerow([repr(float(v)) for v in row])


def modulation_residuals(s: ModulationState, a_tau: float, nu_tau: float, beta: float = 0.5):
    """(mod0, mod1) of the decomposition of the generated error."""
    l = np.log(s.nu)
    mod0 = a_tau - 2 * s.a * beta * (1 + 1 / (2 * l)) - 16 * s.nu**2 * (nu_tau / s.nu - beta)
    mod1 = -a_tau + s.a * beta / l
    return float(mod0), float(mod1)


def reduced_nu(tau, M0: float, beta: float = 0.5):
    return np.exp(-np.sqrt(beta * np.asarray(tau, dtype=float) + M0))


def reduced_forcing(nu, beta: float = 0.5):
    """mod0 on the reduced branch a = 8 nu^2, nu_tau/nu = beta/(2 log nu)."""
    return -8 * beta * nu**2 / np.log(nu), 0.0


def _rhs(beta, forcing):
    def f(tau, y):
        l, at = y
        nu = np.exp(l)
        f0, f1 = forcing(tau, nu)
        n2 = nu**2
        a = 8 * n2 + at
        dl = -beta * at / (8 * n2) - (f0 + f1) / (16 * n2)
        dat = a * beta / l + f0 + 2 * beta * at
        return [dl, dat]
    return f


def integrate_modulation(nu0: float, atilde0: float, tau_end: float, beta: float = 0.5,
                         forcing: Callable | None = None, n_out: int = 401,
                         rtol: float = 1e-12) -> Trajectory:
    """Solve mod0 = f0, mod1 = f1 for (a_tau, nu_tau) and integrate in (log nu, atilde).

    forcing(tau, nu) -> (f0, f1); default is zero.
    """
    forcing = forcing or (lambda tau, nu: (0.0, 0.0))
    taus = np.linspace(0.0, tau_end, n_out)
    # atilde lives on the nu^2 scale, so its absolute tolerance must too
    atol = [1e-300, rtol * 8 * nu0**2 * 1e-6]
    sol = solve_ivp(_rhs(beta, forcing), (0.0, tau_end), [np.log(nu0), atilde0], method="DOP853",
                    t_eval=taus, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    nu = np.exp(sol.y[0])
    return Trajectory(sol.t, nu, 8 * nu**2 + sol.y[1], 0.0)


def integrate_reduced_law(M0: float, beta: float = 0.5, tau_end: float = 200.0, n_out: int = 401):
    """Closed-form reduced solution and the numerically integrated full system.

    The numerical system is forced with the reduced-branch mod0 residual so that
    atilde = 0 is an exact invariant; see reduced_forcing.
    """
    if M0 <= 0:
        raise ValueError("M0 must be positive")
    taus = np.linspace(0.0, tau_end, n_out)
    nu = reduced_nu(taus, M0, beta)
    exact = Trajectory(taus, nu, 8 * nu**2, 0.0)
    numeric = integrate_modulation(float(nu[0]), 0.0, tau_end, beta,
                                   lambda tau, n: reduced_forcing(n, beta), n_out)
    return exact, numeric


def blowup_scale(t, T: float, M0: float, beta: float = 0.5):
    """lambda(t) = sqrt(T-t) exp(-sqrt(beta tau + M0)) with tau = log(T/(T-t))."""
    t = np.asarray(t, dtype=float)
    if np.any(t >= T) or np.any(t < 0):
        raise ValueError("need 0 <= t < T")
    return blowup_scale_gap(T - t, T, M0, beta)


def blowup_scale_gap(gap, T: float, M0: float, beta: float = 0.5):
    """Same law parametrized by T - t, which keeps full precision as t -> T."""
    gap = np.asarray(gap, dtype=float)
    if np.any(gap <= 0) or np.any(gap > T):
        raise ValueError("need 0 < T - t <= T")
    tau = np.log(T) - np.log(gap)
    return np.sqrt(gap) * np.exp(-np.sqrt(beta * tau + M0))


def blowup_exponent_ratio(T_minus_t, T: float, M0: float, beta: float = 0.5):
    """log(lambda / sqrt(T-t)) / sqrt(|log(T-t)|/2); tends to -1 as T-t -> 0 for beta = 1/2."""
    lam = blowup_scale_gap(T_minus_t, T, M0, beta)
    return np.log(lam / np.sqrt(T_minus_t)) / np.sqrt(np.abs(np.log(T_minus_t)) / 2)


def lambda_series(M0: float, T: float = 1.0, beta: float = 0.5, n: int = 200, decades=(1, 14)):
    """Rows (T-t, lambda, sqrt(T-t) exp(-sqrt(|log(T-t)|/2)))."""
    dt = np.logspace(-decades[0], -decades[1], n) * T
    lam = blowup_scale_gap(dt, T, M0, beta)
    ref = np.sqrt(dt) * np.exp(-np.sqrt(np.abs(np.log(dt)) / 2))
    return np.column_stack([dt, lam, ref])


# shooting ------------------------------------------------------------------

@dataclass
class ShootReport:
    a0: float
    iterations: int
    bracket_history: list
    exit_signs: tuple
    horizon: float
    trapped_until: float  # first exit of the bisected trajectory; float resolution caps it
    evidence: dict = field(repr=False, default_factory=dict)

    def to_json(self, path=None) -> str:
        d = {"a0": self.a0, "iterations": self.iterations,
             "bracket_history": [[float(a), float(b)] for a, b in self.bracket_history],
             "exit_signs": list(self.exit_signs)}
        s = json.dumps(d, indent=2) + "\n"
        if path is not None:
            Path(path).write_text(s)
        return s


def default_band(K2: float, M0: float, beta: float = 0.5):
    def band(tau):
        nu = reduced_nu(tau, M0, beta)
        return K2 * nu**2 / np.abs(np.log(nu))
    return band


def _cumulative_weighted(f, taus, beta, nodes=10):
    """I(tau_k) = int_0^tau_k e^{-2 beta s} f(s) ds by Gauss-Legendre per interval."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = taus[:-1], taus[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    s = mid[:, None] + half[:, None] * x[None, :]
    vals = np.exp(-2 * beta * s) * f(s)
    pieces = (vals * w[None, :]).sum(axis=1) * half
    return np.concatenate([[0.0], np.cumsum(pieces)])


def _exit_sign(a0, taus, I, band_vals, beta, slack=1e-6):
    at = np.exp(2 * beta * taus) * (a0 + I)
    out = np.abs(at) > band_vals * (1 + slack)
    if not out.any():
        return 0, at
    k = int(np.argmax(out))
    return int(np.sign(at[k])), at


def shoot_trapped_a(forcing: Callable, beta: float = 0.5, band: Callable | None = None,
                    horizon: float | None = None, M0: float = 100.0, K2: float = 1.0,
                    n_tau: int = 4001, max_iter: int = 60, rel_tol: float = 1e-15) -> ShootReport:
    """Bisect on atilde(0) in [-band(0), band(0)] for atilde_tau = 2 beta atilde + f.

    The ODE is integrated exactly through its integrating factor:
    atilde(tau) = e^{2 beta tau} (a0 + int_0^tau e^{-2 beta s} f(s) ds).
    """
    band = band or default_band(K2, M0, beta)
    b0 = float(band(0.0))
    if horizon is None:
        lo, hi = 0.0, 1.0
        while band(hi) >= 1e-3 * b0:
            hi *= 2
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if band(mid) >= 1e-3 * b0 else (lo, mid)
        horizon = hi
    taus = np.linspace(0.0, horizon, n_tau)
    I = _cumulative_weighted(forcing, taus, beta)
    bv = band(taus)
    s_lo, tr_lo = _exit_sign(-b0, taus, I, bv, beta)
    s_hi, tr_hi = _exit_sign(b0, taus, I, bv, beta)
    if s_lo == s_hi:
        raise NoSignChange(f"both band endpoints exit with sign {s_lo}")
    lo, hi = -b0, b0
    history = [(lo, hi)]
    it = 0
    while it < max_iter and hi - lo > rel_tol * b0:
        mid = 0.5 * (lo + hi)
        s, _ = _exit_sign(mid, taus, I, bv, beta)
        if s == s_hi:
            hi = mid
        elif s == s_lo:
            lo = mid
        else:
            lo = hi = mid
        it += 1
        history.append((lo, hi))
    a0 = 0.5 * (lo + hi)
    s, tr = _exit_sign(a0, taus, I, bv, beta)
    out = np.abs(tr) > bv * (1 + 1e-6)
    until = float(taus[int(np.argmax(out))]) if s else float(horizon)
    return ShootReport(a0, it, history, (s_lo, s_hi), float(horizon), until,
                       {"tau": taus, "lower": tr_lo, "upper": tr_hi, "trapped": tr, "band": bv})


# bootstrap regime ------------------------------------------------------------

@dataclass
class BootstrapParams:
    M0: float
    K: tuple = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    beta: float = 0.5
    zeta_star_big: float = 20.0

    def __post_init__(self):
        if len(self.K) != 7 or min(self.K) <= 0:
            raise ValueError("need seven positive constants K1..K7")


NORM_KEYS = ("eps_in", "grad_eps_star", "h2_middle", "linf_far")


def bootstrap_check(traj: Trajectory, p: BootstrapParams) -> dict:
    """First violation tau for each inequality family, or 'PASS'."""
    if traj.tau.size == 0:
        raise ValueError("empty trajectory")
    K1, K2, K3, K4, K5, K6, K7 = p.K
    s = np.sqrt(p.beta * traj.tau + p.M0)
    ref = np.exp(-s)
    nu = traj.nu
    ln = np.abs(np.log(nu))
    checks = {
        "nu_band": (nu >= ref / K1) & (nu <= K1 * ref),
        "a_band": np.abs(traj.a - 8 * nu**2) <= K2 * nu**2 / ln,
        "drift": np.abs(traj.drift) <= K3 * nu / ln,
    }
    bounds = {"eps_in": K4 * nu**2 / ln, "grad_eps_star": K5 * nu**2 / ln,
              "h2_middle": K6 * nu**2 / ln, "linf_far": K7 * np.exp(-2 * s) / s}
    for key in NORM_KEYS:
        if key in traj.norms:
            checks[key] = np.abs(np.asarray(traj.norms[key])) <= bounds[key]
    report = {}
    for key, ok in checks.items():
        report[key] = "PASS" if ok.all() else float(traj.tau[int(np.argmin(ok))])
    return report
