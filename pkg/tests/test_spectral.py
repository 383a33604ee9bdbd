import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ksring import profiles as P
from ksring import spectral as SP
from ksring.errors import AsymptoticMismatch, CutoffOverlap, PoissonUndefined
from ksring.grids import AxisymField, CutoffConfig, RadialField, RadialGrid

BETA = 0.5


# M and L identities ------------------------------------------------------------

def _grid(ppd):
    return RadialGrid.geometric(1e-3, 1e3, ppd)


def test_M_of_lambda_U_is_minus_two():
    gr = _grid(256)
    x = gr.nodes
    M = SP.apply_M(RadialField(gr, P.LU(x))).values
    assert np.max(np.abs(M[x <= 50] + 2)) < 1e-6


def test_M_of_gradient_U_vanishes():
    gr = _grid(256)
    x = gr.nodes
    M = SP.apply_M(RadialField(gr, P.dU(x)), mode=1).values
    assert np.max(np.abs(M[x <= 50])) < 1e-6


def test_M_and_L_of_zero():
    gr = _grid(64)
    z = RadialField(gr, np.zeros(len(gr)))
    assert np.all(SP.apply_M(z).values == 0)
    assert np.all(SP.apply_L(z).values == 0)
    assert np.all(SP.apply_L(z, variant="L_zeta_parabolic").values == 0)


def test_apply_L_rejects_unknown_variant():
    gr = _grid(64)
    with pytest.raises(ValueError):
        SP.apply_L(RadialField(gr, P.LU(gr.nodes)), variant="nope")


def test_apply_M_tail_divergence_is_poisson_undefined():
    gr = _grid(64)
    with pytest.raises(PoissonUndefined):
        SP.apply_M(RadialField(gr, 1 / gr.nodes), decay=1.0)


@pytest.mark.parametrize("which", ["LU", "dU"])
def test_L0_kernel_residual_second_order(which):
    res = []
    for ppd in (64, 128, 256):
        gr = _grid(ppd)
        x = gr.nodes
        f, mode = (P.LU(x), 0) if which == "LU" else (P.dU(x), 1)
        r = SP.apply_L(RadialField(gr, f), mode=mode).values
        sel = (x > 1e-2) & (x < 50)
        res.append(np.max(np.abs(r[sel])))
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders >= 1.8), orders


# building blocks ---------------------------------------------------------------

def test_block_far_field(blocks):
    g = np.array([100.0, 1e3])
    assert abs(100**2 * blocks.eval("V2", 100.0) / 4 - 1) < 0.0065
    assert abs(100**2 * blocks.eval("V2t", 100.0) / -8 - 1) < 0.0065
    assert abs(blocks.eval("V4", 1e3) - np.log(1e3) + 1.25) < 2e-4
    assert abs(blocks.eval("V4t", 1e3) + 2 * np.log(1e3) - 3.5) < 4e-4
    assert np.allclose(blocks.eval("V4s", g), [0.99065530, 0.99974949], atol=1e-6)
    assert np.allclose(blocks.eval("V4st", g), [-1.98051543, -1.99949099], atol=1e-6)


def test_block_small_gamma_powers(blocks):
    g = np.array([1e-3, 2e-3])
    for name, p in (("V2", 2), ("V2t", 2), ("V4", 4), ("V4s", 4)):
        v = blocks.eval(name, g)
        assert abs(np.log(v[1] / v[0]) / np.log(2) - p) < 1e-2


def test_block_flux_identity(blocks):
    assert max(blocks.flux_residuals.values()) < 1e-12


def test_invert_matches_apply_L():
    # apply_L of the inverted block reproduces the source, weighted sup at O(h^2)
    res = []
    for ppd in (100, 200, 400):
        b = SP.build_blocks(RadialGrid.geometric(1e-6, 1e11, ppd))
        x = b.grid.nodes
        r = SP.apply_L(b.V2).values - P.LU(x)
        sel = (x > 1e-2) & (x < 1e2)
        res.append(np.max(np.abs(r[sel]) * (1 + x[sel] ** 2) ** 2))
    assert res[1] < 1e-2
    assert np.all(np.log2(np.array(res[:-1]) / np.array(res[1:])) > 1.8), res


def test_invert_L0_radial_lambda_U():
    gr = RadialGrid.geometric(1e-6, 1e6, 128)
    V = SP.invert_L0_radial(RadialField(gr, P.LU(gr.nodes)), SP.FarClass(-2), mS=gr.nodes**2 * P.U(gr.nodes))
    k = np.argmin(np.abs(gr.nodes - 100))
    assert abs(gr.nodes[k] ** 2 * V.values[k] / 4 - 1) < 0.05


def test_invert_L0_radial_wrong_far_class():
    gr = RadialGrid.geometric(1e-6, 1e6, 128)
    with pytest.raises(AsymptoticMismatch):
        SP.invert_L0_radial(RadialField(gr, P.LU(gr.nodes)), SP.FarClass(0, 1),
                            mS=gr.nodes**2 * P.U(gr.nodes))


# inner eigenfunction -------------------------------------------------------------

@pytest.mark.parametrize("i", [0, 1])
def test_inner_value_at_origin(i, blocks):
    for nu in (1e-1, 1e-2):
        assert abs(SP.inner_eigenfunction(i, nu, blocks).values[0] - 16) < 1e-9


def test_inner_tends_to_lambda_U(blocks):
    g = blocks.grid.nodes
    sel = g < 10
    d = [np.max(np.abs(SP.inner_eigenfunction(0, nu, blocks).values - P.LU(g))[sel]) for nu in (1e-2, 1e-3)]
    assert d[1] < d[0] / 50


@pytest.mark.parametrize("i, ratio", [(0, 62.51), (1, 52.01)])
def test_inner_residual_nu6(i, ratio, blocks):
    r = [SP.inner_residual_gamma(i, nu, np.array([1.0]), blocks)[0] for nu in (1e-2, 5e-3)]
    q = r[0] / r[1]
    assert 32 <= q <= 128
    assert q == pytest.approx(ratio, rel=1e-3)


def test_eigenvalues_gap():
    nu = 1e-3
    assert SP.eigenvalue(0, nu) - SP.eigenvalue(1, nu) == pytest.approx(2 * BETA, abs=1e-15)
    assert SP.eigenvalue(0, nu) == pytest.approx(1 + 1 / (2 * np.log(nu)))


# outer eigenfunction -------------------------------------------------------------

def test_omega_values():
    assert SP.omega(0, 1.0) == 1.0
    assert SP.omega(1, 1.0) == 1.25


@pytest.mark.parametrize("i", [0, 1])
def test_hermite_residual_second_order(i):
    res = []
    for n in (800, 1600, 3200):
        z = np.linspace(0.5, 5, n)
        r = SP.hermite_residual(SP.omega(i, z), z, 2 * BETA * (1 - i))
        res.append(np.max(np.abs(r[2:-2])))
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders > 1.8), orders


def test_outer_small_zeta_limit():
    E = np.euler_gamma
    target = BETA / 32 * (1 - 2 * E - 2 * np.log(BETA / 2))
    z = 1e-3
    t = SP.outer_correction(0, np.array([z]))[0]
    # the log z term is part of the homogeneous expansion, not of the constant
    assert abs(t + 1 / (4 * z * z) + BETA / 8 * np.log(z) - target) < 1e-3
    assert SP.outer_small_zeta_constant(0) == pytest.approx(target, rel=1e-14)


@pytest.mark.parametrize("i", [0, 1])
def test_outer_correction_solves_inhomogeneous_hermite(i):
    res = []
    for n in (2001, 4001, 8001):
        z = np.linspace(0.5, 6, n)
        r = SP.hermite_residual(SP.outer_correction(i, z), z, 2 * BETA * (1 - i)) - SP.omega(i, z)
        res.append(np.max(np.abs(r[2:-2])))
    assert res[-1] < 1e-4
    assert np.all(np.log2(np.array(res[:-1]) / np.array(res[1:])) > 1.9), res


def test_exp_e1_branches_agree():
    from scipy.special import exp1
    x = np.array([0.1, 1.0, 3.99, 4.0, 10.0, 50.0])
    assert np.allclose(SP.exp_e1(x), np.exp(x) * exp1(x), rtol=1e-13)
    with pytest.raises(ValueError):
        SP.exp_e1([0.0])


def test_outer_rejects_nonpositive_zeta():
    with pytest.raises(ValueError):
        SP.outer_eigenfunction(0, [0.0, 1.0], 0.1)


# gluing ------------------------------------------------------------------------

@pytest.mark.parametrize("i, expected", [(0, 1.9208), (1, 2.1526)])
def test_match_gap_ratio(i, expected, blocks):
    g = [SP.match_report(i, nu, 3.0, blocks=blocks).sup_gap for nu in (1e-2, 1e-4)]
    assert 1.4 <= g[0] / g[1] <= 2.8
    assert g[0] / g[1] == pytest.approx(expected, abs=1e-3)


@pytest.mark.parametrize("i", [0, 1])
def test_glued_partial_mass_and_support(i, blocks):
    nu = 1e-3
    p = SP.glue_eigenfunction(i, nu, CutoffConfig(nu=nu, zeta_m=0.2), blocks=blocks)
    assert abs(p.partial_mass_residual) <= 5 / abs(np.log(nu))
    z = p.phi.nodes
    assert np.all(p.phi.values[z >= 2 * abs(np.log(nu))] == 0)
    assert p.eigenvalue == SP.eigenvalue(i, nu)


def test_cutoff_overlap():
    with pytest.raises(CutoffOverlap):
        SP.glue_eigenfunction(0, 0.5, CutoffConfig(nu=0.5, zeta_m=0.5))


def test_export_eigenpair(tmp_path, blocks):
    p = SP.glue_eigenfunction(0, 1e-2, CutoffConfig(nu=1e-2, zeta_m=0.2), blocks=blocks)
    files = SP.export_eigenpair(p, tmp_path)
    assert [f.name for f in files] == ["eigen_i0_nu1e-02.json", "eigen_i0_nu1e-02_phi.txt",
                                       "eigen_i0_nu1e-02_residual.txt"]
    assert files[1].read_text().startswith("# variable=zeta n=")


# inner product, definiteness, inner norm ------------------------------------------

def test_adapted_inner_product_symmetric(rng):
    for _ in range(3):
        f = SP.random_zero_mean_field(rng, 6.0, 129)
        g = SP.random_zero_mean_field(rng, 6.0, 129)
        a, b = SP.adapted_inner_product(f, g, 0.1), SP.adapted_inner_product(g, f, 0.1)
        scale = abs(SP.adapted_inner_product(f, f, 0.1)) + abs(SP.adapted_inner_product(g, g, 0.1))
        assert abs(a - b) <= 1e-10 * scale


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(1e-3, 0.5))
def test_adapted_inner_product_symmetric_radial(s1, s2, nu):
    gr = RadialGrid.geometric(1e-4, 1e2, 64, "zeta")
    x = gr.nodes
    f = RadialField(gr, np.exp(-x**2 / s1) * (1 - x))
    g = RadialField(gr, np.exp(-x / s2))
    a, b = SP.adapted_inner_product(f, g, nu), SP.adapted_inner_product(g, f, nu)
    assert abs(a - b) <= 1e-10 * (abs(SP.adapted_inner_product(f, f, nu)) + abs(SP.adapted_inner_product(g, g, nu)))


def test_adapted_inner_product_zero():
    z = AxisymField.uniform(4.0, 33, even_z=False)
    assert SP.adapted_inner_product(z, z, 0.1) == 0


def test_definiteness_small_probe():
    rep = SP.definiteness_probe(10, seed=3)
    assert rep.passed and rep.min_ratio > 0


def _norm_in_oracle(nu):
    cut = CutoffConfig(nu=nu)
    L = abs(np.log(nu))
    f = lambda z: z * nu**2 * P.U_nu(z, nu) * cut.chi_nu(z) ** 2 * np.exp(-BETA * z * z / 2)
    return np.sqrt(2 * np.pi * integrate.quad(f, 0, 2 * L, points=[nu, L], limit=400, epsrel=1e-12)[0])


def test_bootstrap_norm_in_profile_axisym():
    nu = 0.1
    u = AxisymField.uniform(6.0, 801, even_z=False)
    R, Z = u.mesh()
    e = u.with_values(P.U_nu(np.hypot(R, Z), nu))
    assert SP.bootstrap_norm_in(e, nu) == pytest.approx(_norm_in_oracle(nu), rel=1e-6)


def test_bootstrap_norm_in_profile_radial():
    nu = 0.1
    gr = RadialGrid.geometric(1e-4, 1e2, 128, "zeta")
    e = RadialField(gr, P.U_nu(gr.nodes, nu))
    assert SP.bootstrap_norm_in(e, nu) == pytest.approx(_norm_in_oracle(nu), rel=1e-6)


def test_bootstrap_norm_in_zero_and_homogeneous(rng):
    u = AxisymField.uniform(6.0, 65, even_z=False)
    assert SP.bootstrap_norm_in(u, 0.1) == 0
    f = u.with_values(rng.normal(size=u.values.shape))
    assert SP.bootstrap_norm_in(f.with_values(2 * f.values), 0.1) == 2 * SP.bootstrap_norm_in(f, 0.1)
