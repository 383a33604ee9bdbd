import json
import math

import numpy as np
import pytest
import sympy as sy
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ksring import profiles as P
from ksring import simulator as SM
from ksring.errors import InterpolationOutOfDomain, TimestepUnderflow
from ksring.grids import AxisymField, CutoffConfig, RadialField, RadialGrid, chi, dchi, read_axisym

U_MASS = lambda r: 4 * r**2 / (1 + r**2)  # partial mass of U


def radial(**kw):
    return SM.Simulator(SM.SimConfig(**kw))


def gaussian_mass(M, s=1.0):
    # partial mass of (M / 2 pi s^2) exp(-r^2 / 2 s^2)
    return lambda r: M / (2 * np.pi) * (1 - np.exp(-r**2 / (2 * s * s)))


# config ------------------------------------------------------------------------

@pytest.mark.parametrize("bad", [{"geometry": "3d"}, {"stepper": "rk4"}, {"n": 4}, {"amp_cap": 1.0},
                                 {"extent": -1.0}, {"geometry": "axisym3d", "extent": 1e4}])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SM.SimConfig(**bad).validate()


def test_config_digest_stable():
    assert SM.SimConfig().digest() == SM.SimConfig().digest() != SM.SimConfig(n=256).digest()


# single steps --------------------------------------------------------------------

@pytest.mark.parametrize("geometry", ["radial2d", "axisym3d"])
def test_zero_stays_zero(geometry):
    s = radial(geometry=geometry, n=32, extent=4.0)
    st_ = SM.SimState(0.0, np.zeros((32,) if geometry == "radial2d" else (32, 32)))
    for _ in range(5):
        st_, _ = s.step(st_, 0.01)
    assert np.all(st_.u == 0)


def test_stationarity_second_order():
    res = []
    for n in (128, 256, 512, 1024):
        s = radial(n=n)
        u = s.mesh.cell_average(U_MASS)
        nxt, _ = s.step(SM.SimState(0.0, u), 1e-4)
        res.append(np.max(np.abs(nxt.u - u)) / 1e-4)
    assert res == pytest.approx([0.23831, 0.066027, 0.017595, 0.0045538], rel=1e-3)
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders > 1.8)


@pytest.mark.parametrize("stepper", ["imex_euler", "imex_bdf2"])
def test_mass_conservation_1000_steps(stepper):
    s = radial(n=512, stepper=stepper)
    u = s.mesh.cell_average(gaussian_mass(8 * np.pi))
    m0 = s.mass(u)
    st_ = SM.SimState(0.0, u)
    worst = 0.0
    for _ in range(1000):
        st_, info = s.step(st_, 1e-3)
        worst = min(worst, info.min_u / np.max(st_.u))
    assert abs(s.mass(st_.u) / m0 - 1) <= 1e-9
    assert worst >= -1e-10


def test_axisym_mass_conservation():
    s = radial(geometry="axisym3d", extent=6.0, n=48, ring_offset=1e3)
    X, Z = np.meshgrid(s.mesh.rbar, s.mesh.zbar, indexing="ij")
    u = 8 * np.exp(-(X**2 + Z**2))
    st_ = SM.SimState(0.0, u)
    for _ in range(20):
        st_, _ = s.step(st_)
    assert abs(s.mass(st_.u) / s.mass(u) - 1) < 1e-12


def test_bdf2_is_second_order_in_time():
    # smooth subcritical data, fixed mesh; error against a fine-dt reference
    s = radial(n=256, extent=50.0, stepper="imex_bdf2")
    u0 = s.mesh.cell_average(gaussian_mass(4 * np.pi))

    def evolve(dt, T=0.2):
        st_ = SM.SimState(0.0, u0.copy())
        for _ in range(int(round(T / dt))):
            st_, _ = s.step(st_, dt)
        return st_.u

    ref = evolve(1e-4)
    e = [np.max(np.abs(evolve(dt) - ref)) for dt in (4e-3, 2e-3, 1e-3)]
    assert np.log2(e[0] / e[1]) > 1.7 and np.log2(e[1] / e[2]) > 1.7


def test_amplification_cap_halves_dt():
    s = radial(n=256, amp_cap=1.001)
    u = 1.3 * s.mesh.cell_average(U_MASS)
    _, info = s.step(SM.SimState(0.0, u), 0.05)
    assert info.retries > 0 and info.dt == 0.05 / 2**info.retries


def test_timestep_underflow():
    s = radial(n=256, amp_cap=1.0001, dt_min=1e-3)
    u = 1.3 * s.mesh.cell_average(U_MASS)
    with pytest.raises(TimestepUnderflow):
        s.step(SM.SimState(0.0, u), 0.05)


def test_module_level_step_and_shape_check():
    cfg = SM.SimConfig(n=16, extent=10.0)
    out = SM.step(SM.SimState(0.0, np.ones(16)), cfg, 1e-3)
    assert out.t == 1e-3 and out.step == 1
    with pytest.raises(ValueError):
        SM.Simulator(cfg).run(np.ones(8))


# runs ---------------------------------------------------------------------------

def test_scaling_symmetry():
    lam = 2.0
    s = radial(extent=200.0, n=1024, core=0.5)
    r = s.mesh.centers
    u0 = s.mesh.cell_average(gaussian_mass(4 * np.pi))
    ul = s.mesh.cell_average(lambda x: gaussian_mass(4 * np.pi)(lam * x))

    def evolve(u, T, dt):
        st_ = SM.SimState(0.0, u.copy())
        for _ in range(int(round(T / dt))):
            st_, _ = s.step(st_, dt)
        return st_.u

    a = evolve(u0, 0.4, 1e-3)
    b = evolve(ul, 0.4 / lam**2, 1e-3 / lam**2)
    sel = r < 5
    assert np.max(np.abs(b - lam**2 * np.interp(lam * r, r, a))[sel]) < 0.01 * np.max(b)


def test_subcritical_sup_decreases():
    s = radial(n=512, t_end=20.0)
    run = s.run(s.mesh.cell_average(gaussian_mass(4 * np.pi)))
    h = run.sup_history[1]
    assert run.stop_reason == "t_end" and np.all(np.diff(h) <= 0) and h[-1] < 0.07 * h[0]


@pytest.fixture(scope="module")
def supercritical():
    s = radial(n=512, t_end=50.0)
    return s.run(1.3 * s.mesh.cell_average(U_MASS))


def test_supercritical_growth(supercritical):
    run = supercritical
    L = np.array(run.ledger)
    assert run.stop_reason == "lambda_resolution"
    assert L[-1, 2] / L[0, 2] == pytest.approx(34.955, rel=1e-3)
    assert np.all(np.diff(L[:, 3]) < 0)
    assert np.all(np.diff(L[:, 0]) > 0) and np.all(np.isfinite(L[:, 1]))


def test_supercritical_profile_converges(supercritical):
    d = [SM.profile_distance(f, SM.fit_scale(f)[0]).sup_local for _, f in supercritical.snapshots]
    assert d[-1] < 0.15 and d[-1] < d[0] / 5


def test_fit_is_argmin(supercritical):
    for _, f in supercritical.snapshots:
        lam, _ = SM.fit_scale(f)
        d = SM.profile_distance(f, lam).sup_local
        assert d < SM.profile_distance(f, 0.8 * lam).sup_local
        assert d < SM.profile_distance(f, 1.25 * lam).sup_local


def test_run_write(tmp_path, supercritical):
    files = supercritical.write(tmp_path)
    assert (tmp_path / "ledger.csv").read_text().splitlines()[0] == "t,mass,sup_u,lambda_fit,ring_radius"
    meta = json.loads((tmp_path / "run.json").read_text())
    assert meta["stop_reason"] == "lambda_resolution"
    assert len(meta["snapshot_index"]) == len(supercritical.snapshots)
    snap = read_axisym(files[0])
    assert snap.values.shape == (512, 1)


def test_snapshot_times_must_increase():
    run = SM.SimRun(SM.SimConfig())
    f = RadialField(RadialGrid(np.array([0.1, 0.2, 0.3, 0.4])), np.ones(4))
    run.record(1.0, f, 1.0)
    with pytest.raises(ValueError):
        run.record(1.0, f, 1.0)


# fit and distance ------------------------------------------------------------------

@pytest.mark.parametrize("nu", [1.0, 0.3, 1e-2])
def test_fit_scale_profile(nu):
    gr = RadialGrid.geometric(1e-4, 1e3, 128)
    lam, loc = SM.fit_scale(RadialField(gr, P.U(gr.nodes / nu) / nu**2))
    assert lam == pytest.approx(nu, rel=1e-12) and loc == (0.0, 0.0)


def test_fit_scale_zero():
    gr = RadialGrid.geometric(1e-4, 1e3, 64)
    with pytest.raises(ValueError):
        SM.fit_scale(RadialField(gr, np.zeros(len(gr))))


def test_fit_scale_ring_location():
    f = AxisymField(np.linspace(-3, 3, 121), np.linspace(-3, 3, 121), np.zeros((121, 121)))
    R, Z = f.mesh()
    f = f.with_values(P.U(np.hypot(R - 0.33, Z + 0.21) / 0.5) / 0.25)
    lam, loc = SM.fit_scale(f, 1e4)
    assert lam == pytest.approx(0.5, rel=2e-2)
    assert loc[0] == pytest.approx(1e4 + 0.33, abs=5e-3) and loc[1] == pytest.approx(-0.21, abs=5e-3)


def test_profile_distance_exact_profile():
    gr = RadialGrid.geometric(1e-4, 1e3, 128)
    nu = 0.05
    d = SM.profile_distance(RadialField(gr, P.U(gr.nodes / nu) / nu**2), nu)
    assert d.sup_local < 1e-12 and d.e_norm < 1e-10


def test_profile_distance_lambda_U_oracle():
    gr = RadialGrid.geometric(1e-4, 1e3, 128)
    x = gr.nodes
    d = SM.profile_distance(RadialField(gr, P.U(x) + 0.1 * P.LU(x)), 1.0)
    h1 = 2 * np.pi * integrate.quad(lambda r: r * ((0.1 * P.LU(r)) ** 2 + (0.1 * P.dLU(r)) ** 2), 0, 2,
                                    epsrel=1e-13)[0]
    rr = np.logspace(0, 3, 200001)
    oracle = np.sqrt(h1) + np.max(np.abs(0.1 * P.LU(rr)) * (1 + rr**2) ** 0.75)
    assert d.e_norm == pytest.approx(oracle, rel=1e-3)
    assert d.sup_local == pytest.approx(1.6, rel=1e-6)


def test_profile_distance_planar_matches_radial():
    f = AxisymField(np.linspace(-12, 12, 241), np.linspace(-12, 12, 241), np.zeros((241, 241)))
    R, Z = f.mesh()
    rho = np.hypot(R, Z)
    d = SM.profile_distance(f.with_values(P.U(rho) + 0.1 * P.LU(rho)), 1.0)
    gr = RadialGrid.geometric(1e-4, 1e3, 128)
    dr = SM.profile_distance(RadialField(gr, P.U(gr.nodes) + 0.1 * P.LU(gr.nodes)), 1.0)
    assert d.e_norm == pytest.approx(dr.e_norm, rel=1e-3)


def test_profile_distance_out_of_domain():
    gr = RadialGrid.geometric(1e-4, 5.0, 64)
    with pytest.raises(InterpolationOutOfDomain):
        SM.profile_distance(RadialField(gr, P.U(gr.nodes)), 1.0)
    with pytest.raises(ValueError):
        SM.profile_distance(RadialField(gr, P.U(gr.nodes)), 0.0)


# bootstrap norms -------------------------------------------------------------------

def _norm_oracle(nu, zs, rmax):
    z, n = sy.symbols("z nu", positive=True)
    Ue = 8 * n**2 / (n**2 + z**2) ** 2
    fs = [sy.lambdify((z, n), sy.diff(Ue, z, k)) for k in range(3)]
    f0, f1, f2 = (lambda r, k=k: fs[k](r, nu) for k in range(3))
    cut = CutoffConfig(nu, zeta_star_big=zs)
    ls = cut.log_scale
    q = lambda fn, a, b: integrate.quad(fn, a, b, limit=500, epsabs=0, epsrel=1e-12,
                                        points=[p for p in (nu, 1.0, ls, zs) if a < p < b])[0]
    n_in = q(lambda r: r * nu**2 * chi(r / ls) ** 2 * np.exp(-r * r / 4) * f0(r) ** 2 / P.U_nu(r, nu),
             0, min(2 * ls, rmax))
    g = lambda r: chi(r / zs) * f1(r) + dchi(r / zs) / zs * f0(r)
    n_grad = q(lambda r: r * nu**2 * g(r) ** 2 / P.U_nu(r, nu), 0, min(2 * zs, rmax))
    n_h2 = q(lambda r: r * (f0(r) ** 2 + f1(r) ** 2 + f2(r) ** 2 + (f1(r) / r) ** 2), zs / 2, min(4 * zs, rmax))
    n_inf = f0(zs) * (1 + zs) ** 1.5
    return [math.sqrt(2 * np.pi * n_in), math.sqrt(2 * np.pi * n_grad), math.sqrt(2 * np.pi * n_h2), n_inf]


def _box(half, n):
    return AxisymField(np.linspace(-half, half, n), np.linspace(-half, half, n), np.zeros((n, n)))


def test_bootstrap_norms_oracle():
    nu, zs = 0.5, 2.0
    b = _box(10.0, 401)
    R, Z = b.mesh()
    eps = b.with_values(P.U_nu(np.hypot(R, Z), nu))
    got = SM.evaluate_bootstrap_norms(eps, nu, CutoffConfig(nu, zeta_star_big=zs))
    assert np.all(np.array(got) > 0)
    assert got == pytest.approx(_norm_oracle(nu, zs, 10.0), rel=1e-5)


def test_bootstrap_norms_zero():
    assert SM.evaluate_bootstrap_norms(_box(5.0, 33), 0.1) == (0.0, 0.0, 0.0, 0.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.integers(0, 2**32 - 1))
def test_bootstrap_norms_homogeneous(c, seed):
    rng = np.random.default_rng(seed)
    b = _box(30.0, 61)
    R, Z = b.mesh()
    f = b.with_values(np.exp(-((R - rng.uniform(-2, 2)) ** 2 + Z**2) / 4) * rng.uniform(0.5, 2))
    a = SM.evaluate_bootstrap_norms(f, 0.2)
    s = SM.evaluate_bootstrap_norms(f.with_values(c * f.values), 0.2)
    assert np.allclose(s, abs(c) * np.array(a), rtol=1e-9, atol=0)


def test_bootstrap_norms_reject_nonfinite():
    b = _box(5.0, 33)
    with pytest.raises(ValueError):
        SM.evaluate_bootstrap_norms(b.with_values(np.full(b.values.shape, np.nan)), 0.1)
