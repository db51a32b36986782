import numpy as np
import pytest

from cprojective import cproj as cp
from cprojective import examples as ex
from cprojective import fieldexpr as fx
from cprojective import geometry as geo
from cprojective import tractor as tr

from conftest import random_one_form, random_polynomial

CHART = fx.Chart(2)


def flat_scale():
    flat = ex.flat_space(2)
    conn = geo.flat_connection(flat.chart, flat.J)
    return tr.scale_from_connection(conn, flat.J, flat.g), flat


def constant_scalar(chart, value, weight):
    return geo.scalar_from_expr(chart, fx.const(value), weight)


def constant_tensor(chart, arr, variance, weight):
    return geo.tensor_constant(chart, arr, variance, weight)


def random_sections(scale, chart, rng):
    J = scale.J

    def poly():
        return random_polynomial(chart, rng, 2, 0.6)

    tau = geo.scalar_from_expr(chart, poly(), 2.0)
    phi = geo.tensor_from_exprs(chart, np.array([poly() for _ in range(4)],
                                                dtype=object), (-1,), 2.0)
    raw = geo.tensor_from_exprs(chart, np.array(
        [[poly() for _ in range(4)] for _ in range(4)], dtype=object),
        (-1, -1), 2.0)
    sym = (raw + raw.transposed((1, 0))).scaled(0.5)
    psi = geo.hermitean_part(sym, J)
    h = tr.HSection(scale, tau, phi, psi)

    raw_u = geo.tensor_from_exprs(chart, np.array(
        [[poly() for _ in range(4)] for _ in range(4)], dtype=object),
        (+1, +1), -2.0)
    sym_u = (raw_u + raw_u.transposed((1, 0))).scaled(0.5)
    half = geo.field_einsum("ai,ij->aj", J.field, sym_u, (+1, +1), -2.0)
    herm_u = (sym_u + geo.field_einsum("aj,bj->ab", half, J.field,
                                       (+1, +1), -2.0)).scaled(0.5)
    mu = geo.tensor_from_exprs(chart, np.array([poly() for _ in range(4)],
                                               dtype=object), (+1,), -2.0)
    nu = geo.scalar_from_expr(chart, poly(), -2.0)
    s = tr.HStarSection(scale, herm_u, mu, nu)
    return h, s


# ------------------------------------------------------------- scale changes

def test_h_change_scale_trivial(ball_scale, ball_points):
    chart = ball_scale.conn.chart
    h = tr.HSection(ball_scale, constant_scalar(chart, 1.0, 2.0),
                    constant_tensor(chart, np.zeros(4), (-1,), 2.0),
                    constant_tensor(chart, np.zeros((4, 4)), (-1, -1), 2.0))
    zero = cp.one_form_from_exprs(chart, [fx.const(0.0)] * 4)
    h2 = tr.h_change_scale(h, zero)
    for x in ball_points[:3]:
        assert np.abs(h2.phi.value(x)).max() == 0.0
        assert np.abs(h2.psi.value(x)).max() == 0.0


def test_h_change_scale_unit_section():
    scale, flat = flat_scale()
    chart = flat.chart
    h = tr.HSection(scale, constant_scalar(chart, 1.0, 2.0),
                    constant_tensor(chart, np.zeros(4), (-1,), 2.0),
                    constant_tensor(chart, np.zeros((4, 4)), (-1, -1), 2.0))
    ups = cp.one_form_from_exprs(chart, [fx.const(1.0), fx.const(0.0),
                                         fx.const(0.0), fx.const(0.0)])
    h2 = tr.h_change_scale(h, ups)
    x = [0.0, 0, 0, 0]
    assert np.array_equal(h2.phi.value(x), [1.0, 0, 0, 0])
    expected = np.zeros((4, 4))
    expected[0, 0] = 1.0    # dx1 (x) dx1
    expected[1, 1] = 1.0    # dy1 (x) dy1 from the J-conjugated square
    assert np.abs(h2.psi.value(x) - expected).max() < 1e-15


def test_hstar_change_scale_delta_section():
    scale, flat = flat_scale()
    chart = flat.chart
    s = tr.HStarSection(scale, constant_tensor(chart, np.eye(4), (+1, +1), -2.0),
                        constant_tensor(chart, np.zeros(4), (+1,), -2.0),
                        constant_scalar(chart, 0.0, -2.0))
    ups = cp.one_form_from_exprs(chart, [fx.const(1.0), fx.const(0.0),
                                         fx.const(0.0), fx.const(0.0)])
    s2 = tr.hstar_change_scale(s, ups)
    x = [0.0, 0, 0, 0]
    assert np.array_equal(s2.mu.value(x), [-2.0, 0, 0, 0])
    assert float(s2.nu.value(x)) == 1.0


def test_change_scale_round_trip(ball_scale, ball_points):
    rng = np.random.default_rng(61)
    chart = ball_scale.conn.chart
    h, s = random_sections(ball_scale, chart, rng)
    ups = random_one_form(chart, rng)
    h2 = tr.h_change_scale(tr.h_change_scale(h, ups), ups.scaled(-1.0))
    s2 = tr.hstar_change_scale(tr.hstar_change_scale(s, ups), ups.scaled(-1.0))
    for x in ball_points[:4]:
        assert np.abs(h2.psi.value(x) - h.psi.value(x)).max() < 1e-14
        assert np.abs(h2.phi.value(x) - h.phi.value(x)).max() < 1e-14
        assert np.abs(s2.mu.value(x) - s.mu.value(x)).max() < 1e-14
        assert abs(float(s2.nu.value(x)) - float(s.nu.value(x))) < 1e-14


def test_change_scale_group_law(ball_scale, ball_points):
    rng = np.random.default_rng(62)
    chart = ball_scale.conn.chart
    h, s = random_sections(ball_scale, chart, rng)
    u1, u2 = random_one_form(chart, rng), random_one_form(chart, rng)
    u12 = u1 + u2
    hA = tr.h_change_scale(tr.h_change_scale(h, u1), u2)
    hB = tr.h_change_scale(h, u12)
    sA = tr.hstar_change_scale(tr.hstar_change_scale(s, u1), u2)
    sB = tr.hstar_change_scale(s, u12)
    for x in ball_points[:4]:
        assert np.abs(hA.psi.value(x) - hB.psi.value(x)).max() < 1e-13
        assert np.abs(sA.nu.value(x) - sB.nu.value(x)).max() < 1e-13


def test_hermitean_slot_invariants_preserved(ball_scale, ball_points):
    rng = np.random.default_rng(63)
    chart = ball_scale.conn.chart
    h, s = random_sections(ball_scale, chart, rng)
    ups = random_one_form(chart, rng)
    h2, s2 = tr.h_change_scale(h, ups), tr.hstar_change_scale(s, ups)
    Jm = ball_scale.J.field.value(ball_points[0])
    for x in ball_points[:4]:
        psi = h2.psi.value(x)
        assert np.abs(psi - psi.T).max() < 1e-13
        assert np.abs(Jm.T @ psi @ Jm - psi).max() < 1e-13
        sig = s2.sigma.value(x)
        assert np.abs(sig - sig.T).max() < 1e-13
        assert np.abs(Jm @ sig @ Jm.T - sig).max() < 1e-13


# ------------------------------------------------------------------- pairing

def test_pairing_reference_value():
    scale, flat = flat_scale()
    chart = flat.chart
    h = tr.HSection(scale, constant_scalar(chart, 2.0, 2.0),
                    constant_tensor(chart, np.zeros(4), (-1,), 2.0),
                    constant_tensor(chart, np.eye(4), (-1, -1), 2.0))
    s = tr.HStarSection(scale, constant_tensor(chart, np.eye(4), (+1, +1), -2.0),
                        constant_tensor(chart, np.zeros(4), (+1,), -2.0),
                        constant_scalar(chart, 3.0, -2.0))
    # 2*3 + 0 + (1/2) * trace(I4) = 8, pinning the 1/2 pairing factor
    assert float(tr.pairing(h, s).value([0.1, 0, 0, 0])) == 8.0


def test_pairing_bilinear(ball_scale, ball_points):
    rng = np.random.default_rng(64)
    h, s = random_sections(ball_scale, ball_scale.conn.chart, rng)
    h_scaled = tr.HSection(ball_scale, h.tau.scaled(2.5), h.phi.scaled(2.5),
                           h.psi.scaled(2.5))
    p1, p2 = tr.pairing(h, s), tr.pairing(h_scaled, s)
    for x in ball_points[:4]:
        assert float(p2.value(x)) == pytest.approx(2.5 * float(p1.value(x)),
                                                   rel=1e-14)


def test_pairing_scale_mismatch_rejected(ball_scale):
    rng = np.random.default_rng(65)
    chart = ball_scale.conn.chart
    h, s = random_sections(ball_scale, chart, rng)
    other = tr.change_scale(ball_scale, random_one_form(chart, rng))
    s_other = tr.HStarSection(other, s.sigma, s.mu, s.nu)
    with pytest.raises(tr.TractorError):
        tr.pairing(h, s_other)


def test_pairing_invariant_under_simultaneous_change(ball_scale, ball_points):
    rng = np.random.default_rng(66)
    chart = ball_scale.conn.chart
    for _ in range(50):
        h, s = random_sections(ball_scale, chart, rng)
        ups = random_one_form(chart, rng)
        new_scale = tr.change_scale(ball_scale, ups)
        h2 = tr.h_change_scale(h, ups, new_scale)
        s2 = tr.hstar_change_scale(s, ups, new_scale)
        x = ball_points[int(rng.integers(len(ball_points)))]
        assert abs(float(tr.pairing(h, s).value(x))
                   - float(tr.pairing(h2, s2).value(x))) < 1e-12


# -------------------------------------------------------- slotted connections

def test_flat_connection_on_constant_sections():
    scale, flat = flat_scale()
    chart = flat.chart
    h = tr.HSection(scale, constant_scalar(chart, 1.0, 2.0),
                    constant_tensor(chart, np.zeros(4), (-1,), 2.0),
                    constant_tensor(chart, np.zeros((4, 4)), (-1, -1), 2.0))
    D = tr.tractor_connection_H(h)
    x = [0.3, 0.2, 0.1, 0.0]
    assert np.abs(D.tau.value(x)).max() == 0.0
    assert np.abs(D.phi.value(x)).max() == 0.0
    assert np.abs(D.psi.value(x)).max() == 0.0
    s = tr.HStarSection(scale, constant_tensor(chart, np.eye(4), (+1, +1), -2.0),
                        constant_tensor(chart, np.zeros(4), (+1,), -2.0),
                        constant_scalar(chart, 0.0, -2.0))
    Ds = tr.tractor_connection_Hstar(s)
    assert np.abs(Ds.sigma.value(x)).max() == 0.0
    assert np.abs(Ds.mu.value(x)).max() == 0.0
    assert np.abs(Ds.nu.value(x)).max() == 0.0


def test_middle_slot_insertion_trace():
    """The trace of the mu-insertion in the top slot equals m * mu."""
    scale, flat = flat_scale()
    chart = flat.chart
    rng = np.random.default_rng(67)
    mu_arr = rng.uniform(-1, 1, 4)
    s = tr.HStarSection(scale,
                        constant_tensor(chart, np.zeros((4, 4)), (+1, +1), -2.0),
                        constant_tensor(chart, mu_arr, (+1,), -2.0),
                        constant_scalar(chart, 0.0, -2.0))
    Ds = tr.tractor_connection_Hstar(s)
    top = Ds.sigma.value([0.0, 0, 0, 0])
    trace = np.einsum("aba->b", top)
    assert np.abs(trace - 2 * mu_arr).max() < 1e-14     # m = 2


def test_duality_leibniz(ball_scale, ball_points):
    rng = np.random.default_rng(68)
    chart = ball_scale.conn.chart
    worst = 0.0
    for _ in range(12):
        h, s = random_sections(ball_scale, chart, rng)
        lhs = geo.coordinate_derivative(tr.pairing(h, s))
        rhs = tr.pairing_of_derivative_h(tr.tractor_connection_H(h), s) \
            + tr.pairing_of_derivative_hstar(h, tr.tractor_connection_Hstar(s))
        for x in ball_points[:4]:
            worst = max(worst, float(np.abs(lhs.value(x) - rhs.value(x)).max()))
    assert worst < 1e-9


def test_h_connection_scale_equivariance(ball_scale, ball_points):
    """Differentiate then change scale versus change scale then differentiate:
    tested through the scale-invariant pairing with a transformed section."""
    rng = np.random.default_rng(69)
    chart = ball_scale.conn.chart
    h, s = random_sections(ball_scale, chart, rng)
    ups = random_one_form(chart, rng)
    new_scale = tr.change_scale(ball_scale, ups)
    h2 = tr.h_change_scale(h, ups, new_scale)
    s2 = tr.hstar_change_scale(s, ups, new_scale)
    lhs1 = geo.coordinate_derivative(tr.pairing(h, s))
    lhs2 = geo.coordinate_derivative(tr.pairing(h2, s2))
    rhs1 = tr.pairing_of_derivative_h(tr.tractor_connection_H(h), s)
    rhs2 = tr.pairing_of_derivative_h(tr.tractor_connection_H(h2), s2)
    add1 = tr.pairing_of_derivative_hstar(h, tr.tractor_connection_Hstar(s))
    add2 = tr.pairing_of_derivative_hstar(h2, tr.tractor_connection_Hstar(s2))
    for x in ball_points[:5]:
        # both scales satisfy Leibniz against the same invariant scalar
        assert np.abs(lhs1.value(x) - lhs2.value(x)).max() < 1e-11
        assert np.abs((rhs1.value(x) + add1.value(x))
                      - (rhs2.value(x) + add2.value(x))).max() < 1e-9


def test_h_connection_scale_invariant_slotwise(ball_scale, ball_points):
    """Computing the slotted derivative in one scale and transforming slotwise
    (direction index inert) equals computing in the changed scale: the slot
    formulas assemble a genuine connection on the bundle."""
    rng = np.random.default_rng(70)
    chart = ball_scale.conn.chart
    h, _ = random_sections(ball_scale, chart, rng)
    ups = random_one_form(chart, rng)
    new_scale = tr.change_scale(ball_scale, ups)
    h2 = tr.h_change_scale(h, ups, new_scale)
    D1 = tr.tractor_connection_H(h)
    D2 = tr.tractor_connection_H(h2)
    for x in ball_points[:4]:
        Jm = ball_scale.J.field.value(x)
        U = ups.value(x)
        t1, p1, s1 = D1.tau.value(x), D1.phi.value(x), D1.psi.value(x)
        assert np.abs(D2.tau.value(x) - t1).max() < 1e-12
        assert np.abs(D2.phi.value(x) - (p1 + np.einsum("b,a->ab", U, t1))
                      ).max() < 1e-11
        X = (np.einsum("c,ad->acd", U, p1) + np.einsum("d,ac->acd", U, p1)
             + np.einsum("c,d,a->acd", U, U, t1))
        JXJ = np.einsum("ic,jd,aij->acd", Jm, Jm, X)
        assert np.abs(D2.psi.value(x) - (s1 + X + JXJ)).max() < 1e-10


def test_hstar_connection_scale_invariant_slotwise(ball_scale, ball_points):
    rng = np.random.default_rng(77)
    chart = ball_scale.conn.chart
    _, s = random_sections(ball_scale, chart, rng)
    ups = random_one_form(chart, rng)
    new_scale = tr.change_scale(ball_scale, ups)
    s2 = tr.hstar_change_scale(s, ups, new_scale)
    D1 = tr.tractor_connection_Hstar(s)
    D2 = tr.tractor_connection_Hstar(s2)
    for x in ball_points[:4]:
        U = ups.value(x)
        sg1, mu1, nu1 = D1.sigma.value(x), D1.mu.value(x), D1.nu.value(x)
        assert np.abs(D2.sigma.value(x) - sg1).max() < 1e-11
        mu_hat = mu1 - 2 * np.einsum("i,aic->ac", U, sg1)
        assert np.abs(D2.mu.value(x) - mu_hat).max() < 1e-10
        nu_hat = nu1 - np.einsum("i,ai->a", U, mu1) \
            + np.einsum("i,j,aij->a", U, U, sg1)
        assert np.abs(D2.nu.value(x) - nu_hat).max() < 1e-10


# ------------------------------------------------------------------ tfp, L

def test_tfp_kills_pure_trace(ball_scale):
    chart = ball_scale.conn.chart
    rng = np.random.default_rng(71)
    mu_arr = rng.uniform(-1, 1, 4)
    Jm = ball_scale.J.field.value([0, 0, 0, 0])
    eye = np.eye(4)
    pure = 0.5 * (np.einsum("ba,c->abc", eye, mu_arr)
                  + np.einsum("ca,b->abc", eye, mu_arr)) \
        + 0.5 * (np.einsum("ba,c->abc", Jm, Jm @ mu_arr)
                 + np.einsum("ca,b->abc", Jm, Jm @ mu_arr))
    field = geo.tensor_constant(chart, pure, (-1, +1, +1), -2.0)
    out = tr.tfp(field, ball_scale.J).value([0.1, 0, 0, 0])
    assert np.abs(out).max() < 1e-12


def test_tfp_idempotent_and_tracefree(ball_scale, ball_points):
    chart = ball_scale.conn.chart
    rng = np.random.default_rng(72)
    comps = np.array([[[random_polynomial(chart, rng, 1) for _ in range(4)]
                       for _ in range(4)] for _ in range(4)], dtype=object)
    raw = geo.tensor_from_exprs(chart, comps, (-1, +1, +1), -2.0)
    sym = (raw + raw.transposed((0, 2, 1))).scaled(0.5)
    out = tr.tfp(sym, ball_scale.J)
    out2 = tr.tfp(out, ball_scale.J)
    for x in ball_points[:4]:
        v = out.value(x)
        assert np.abs(np.einsum("aba->b", v)).max() < 1e-12
        assert np.abs(out2.value(x) - v).max() < 1e-12


def test_metricity_solution_and_invariance(ball, ball_conn, ball_sigma,
                                           ball_points):
    res = tr.metricity_residual(ball_sigma, ball_conn)
    for x in ball_points:
        assert np.abs(res.value(x)).max() < 1e-10
    rng = np.random.default_rng(73)
    hat = cp.cproj_change(ball_conn, random_one_form(ball.chart, rng), ball.J)
    res2 = tr.metricity_residual(ball_sigma, hat)
    for x in ball_points:
        assert np.abs(res2.value(x)).max() < 1e-9


def test_metricity_flat_delta():
    scale, flat = flat_scale()
    sigma = constant_tensor(flat.chart, np.eye(4), (+1, +1), -2.0)
    res = tr.metricity_residual(sigma, scale.conn)
    assert np.abs(res.value([0.2, 0.1, 0, 0])).max() == 0.0


def test_splitting_sigma_parallel_scale(ball_scale, ball_sigma, ball_points):
    L = tr.splitting_L_sigma(ball_sigma, ball_scale)
    for x in ball_points[:6]:
        assert np.abs(L.mu.value(x)).max() < 1e-12
        expected = 0.25 * np.einsum("ij,ij->", ball_sigma.value(x),
                                    ball_scale.P.value(x))
        assert float(L.nu.value(x)) == pytest.approx(expected, abs=1e-12)


def test_splitting_sigma_flat_delta():
    scale, flat = flat_scale()
    sigma = constant_tensor(flat.chart, np.eye(4), (+1, +1), -2.0)
    L = tr.splitting_L_sigma(sigma, scale)
    x = [0.3, 0.1, 0, 0]
    assert np.abs(L.mu.value(x)).max() == 0.0
    assert float(L.nu.value(x)) == 0.0


def test_splitting_characterization_tracefree(ball_scale, ball_sigma,
                                              ball_points):
    L = tr.splitting_L_sigma(ball_sigma, ball_scale)
    D = tr.tractor_connection_Hstar(L)
    for x in ball_points[:6]:
        top = D.sigma.value(x)
        assert np.abs(np.einsum("aba->b", top)).max() < 1e-9
        assert abs(np.einsum("aa->", D.mu.value(x))) < 1e-9


def test_splitting_sigma_scale_naturality(ball_scale, ball_sigma, ball_points):
    rng = np.random.default_rng(74)
    ups = random_one_form(ball_scale.conn.chart, rng)
    new_scale = tr.change_scale(ball_scale, ups)
    via_change = tr.hstar_change_scale(tr.splitting_L_sigma(ball_sigma,
                                                            ball_scale),
                                       ups, new_scale)
    direct = tr.splitting_L_sigma(ball_sigma, new_scale)
    for x in ball_points[:5]:
        assert np.abs(via_change.mu.value(x) - direct.mu.value(x)).max() < 1e-9
        assert abs(float(via_change.nu.value(x))
                   - float(direct.nu.value(x))) < 1e-9


def test_splitting_tau_parallel_scale(ball_scale, ball_tau, ball_points):
    L = tr.splitting_L_tau(ball_tau, ball_scale)
    P_plus = ball_scale.decomposition.P_plus
    for x in ball_points[:6]:
        assert np.abs(L.phi.value(x)).max() < 1e-12
        expected = float(ball_tau.value(x)) * P_plus.value(x)
        assert np.abs(L.psi.value(x) - expected).max() < 1e-10


def test_splitting_tau_flat_unit():
    scale, flat = flat_scale()
    tau = constant_scalar(flat.chart, 1.0, 2.0)
    L = tr.splitting_L_tau(tau, scale)
    x = [0.1, 0.4, 0, 0]
    assert np.abs(L.phi.value(x)).max() == 0.0
    assert np.abs(L.psi.value(x)).max() == 0.0


def test_splitting_tau_characterization(ball_scale, ball_tau, ball_points):
    L = tr.splitting_L_tau(ball_tau, ball_scale)
    D = tr.tractor_connection_H(L)
    Jm = ball_scale.J.field.value(ball_points[0])
    for x in ball_points[:6]:
        assert np.abs(D.tau.value(x)).max() < 1e-9
        mid = D.phi.value(x)
        sym = 0.5 * (mid + mid.T)
        herm = 0.5 * (sym + Jm.T @ sym @ Jm)
        assert np.abs(herm).max() < 1e-9


def test_splitting_tau_scale_naturality(ball_scale, ball_tau, ball_points):
    rng = np.random.default_rng(75)
    ups = random_one_form(ball_scale.conn.chart, rng)
    new_scale = tr.change_scale(ball_scale, ups)
    via_change = tr.h_change_scale(tr.splitting_L_tau(ball_tau, ball_scale),
                                   ups, new_scale)
    direct = tr.splitting_L_tau(ball_tau, new_scale)
    for x in ball_points[:5]:
        assert np.abs(via_change.phi.value(x) - direct.phi.value(x)).max() < 1e-9
        assert np.abs(via_change.psi.value(x) - direct.psi.value(x)).max() < 1e-9


def test_bgg_residual_on_ball(ball_scale, ball_tau, ball_points):
    res = tr.bgg_residual_tau(ball_tau, ball_scale)
    for x in ball_points[:6]:
        assert np.abs(res.value(x)).max() < 1e-9


# -------------------------------------------------------- Einstein, det, inv

def test_einstein_residual_ball(ball_scale, ball_sigma, ball_points):
    er = tr.einstein_residual(ball_sigma, ball_scale)
    for x in ball_points:
        assert np.abs(er.value(x)).max() < 1e-9


def test_einstein_residual_perturbed_nonzero(perturbed_scale, perturbed,
                                             perturbed_points):
    _, tau = geo.volume_density_and_tau(perturbed.g)
    tau_inv = geo.TensorField(perturbed.chart, (), -2.0,
                              lambda x, k: tr.jrecip(tau.jet(x, k)))
    sigma = geo.field_einsum(",ab->ab", tau_inv,
                             geo.metric_inverse(perturbed.g), (+1, +1))
    er = tr.einstein_residual(sigma, perturbed_scale)
    assert max(np.abs(er.value(x)).max() for x in perturbed_points) > 1e-3


def test_einstein_residual_flat_zero():
    scale, flat = flat_scale()
    sigma = constant_tensor(flat.chart, np.eye(4), (+1, +1), -2.0)
    er = tr.einstein_residual(sigma, scale)
    assert np.abs(er.value([0.2, 0, 0.1, 0])).max() == 0.0


def test_det_H_reference_value():
    scale, flat = flat_scale()
    chart = flat.chart
    s = tr.HStarSection(scale, constant_tensor(chart, np.eye(4), (+1, +1), -2.0),
                        constant_tensor(chart, np.zeros(4), (+1,), -2.0),
                        constant_scalar(chart, 3.0, -2.0))
    assert float(tr.det_H(s).value([0.1, 0, 0, 0])) == pytest.approx(3.0)


def test_det_H_homogeneity():
    scale, flat = flat_scale()
    chart = flat.chart
    lam = 1.7
    s1 = tr.HStarSection(scale, constant_tensor(chart, np.eye(4), (+1, +1), -2.0),
                         constant_tensor(chart, np.zeros(4), (+1,), -2.0),
                         constant_scalar(chart, 2.0, -2.0))
    s2 = tr.HStarSection(scale,
                         constant_tensor(chart, lam * np.eye(4), (+1, +1), -2.0),
                         constant_tensor(chart, np.zeros(4), (+1,), -2.0),
                         constant_scalar(chart, lam * 2.0, -2.0))
    x = [0.0, 0, 0, 0]
    ratio = float(tr.det_H(s2).value(x)) / float(tr.det_H(s1).value(x))
    assert ratio == pytest.approx(lam ** 3, rel=1e-12)    # m + 1 = 3


def test_det_H_requires_mu_zero(ball_scale):
    chart = ball_scale.conn.chart
    s = tr.HStarSection(ball_scale,
                        constant_tensor(chart, np.eye(4), (+1, +1), -2.0),
                        constant_tensor(chart, np.ones(4), (+1,), -2.0),
                        constant_scalar(chart, 1.0, -2.0))
    with pytest.raises(tr.TractorError):
        tr.det_H(s).value([0.1, 0, 0, 0])


def test_det_H_proportional_to_scalar_curvature(ball, ball_scale, ball_sigma,
                                                ball_conn, ball_points):
    L = tr.splitting_L_sigma(ball_sigma, ball_scale)
    detH = tr.det_H(L)
    S = geo.scalar_curvature(ball.g, geo.ricci(geo.curvature(ball_conn)))
    ratios = [float(detH.value(x)) / float(S.value(x)) for x in ball_points]
    spread = (max(ratios) - min(ratios)) / abs(np.mean(ratios))
    assert spread < 1e-6


def test_invert_H_reference():
    scale, flat = flat_scale()
    chart = flat.chart
    s = tr.HStarSection(scale, constant_tensor(chart, np.eye(4), (+1, +1), -2.0),
                        constant_tensor(chart, np.zeros(4), (+1,), -2.0),
                        constant_scalar(chart, 1.0, -2.0))
    inv = tr.invert_H(s)
    x = [0.1, 0, 0, 0]
    assert float(inv.tau.value(x)) == 1.0
    assert np.array_equal(inv.psi.value(x), np.eye(4))


def test_invert_H_round_trip(ball_scale, ball_sigma, ball_points):
    L = tr.splitting_L_sigma(ball_sigma, ball_scale)
    back = tr.invert_H_section(tr.invert_H(L))
    for x in ball_points[:6]:
        assert np.abs(back.sigma.value(x) - ball_sigma.value(x)).max() < 1e-10
        assert abs(float(back.nu.value(x)) - float(L.nu.value(x))) < 1e-10


def test_invert_H_top_slot_proportional_to_tau(ball, ball_scale, ball_sigma,
                                               ball_conn, ball_tau,
                                               ball_points):
    L = tr.splitting_L_sigma(ball_sigma, ball_scale)
    inv = tr.invert_H(L)
    S = geo.scalar_curvature(ball.g, geo.ricci(geo.curvature(ball_conn)))
    values = [float(inv.tau.value(x)) * float(S.value(x))
              / float(ball_tau.value(x)) for x in ball_points]
    spread = (max(values) - min(values)) / abs(np.mean(values))
    assert spread < 1e-6


def test_dimension_three_constants():
    """m = 3 disambiguates every dimension-dependent constant: the splitting
    slots, the trace insertions and the middle-slot cancellation all carry
    1/m, 1/(2m) or 1/(4m^2)."""
    geom = ex.unit_ball(3)
    pts = geo.seeded_points(geom.chart, count=3, seed=19, radius=0.35,
                            rho=geom.rho, rho_min=0.2)
    conn = geo.canonical_connection(geom.g, geom.J, pts)
    scale = tr.scale_from_connection(conn, geom.J, geom.g)
    _, tau = geo.volume_density_and_tau(geom.g)
    tau_inv = geo.TensorField(geom.chart, (), -2.0,
                              lambda x, k: tr.jrecip(tau.jet(x, k)))
    sigma = geo.field_einsum(",ab->ab", tau_inv, geo.metric_inverse(geom.g),
                             (+1, +1))
    res = tr.metricity_residual(sigma, conn)
    L = tr.splitting_L_sigma(sigma, scale)
    D = tr.tractor_connection_Hstar(L)
    er = tr.einstein_residual(sigma, scale)
    for x in pts[:2]:
        assert np.abs(res.value(x)).max() < 1e-10
        assert np.abs(L.mu.value(x)).max() < 1e-11
        expected_nu = np.einsum("ij,ij->", sigma.value(x),
                                scale.P.value(x)) / 6.0     # 1/(2m), m = 3
        assert float(L.nu.value(x)) == pytest.approx(expected_nu, abs=1e-11)
        assert np.abs(np.einsum("aba->b", D.sigma.value(x))).max() < 1e-9
        assert abs(np.einsum("aa->", D.mu.value(x))) < 1e-9
        assert np.abs(er.value(x)).max() < 1e-9             # still Einstein


def test_invert_H_rejects_zero_nu():
    scale, flat = flat_scale()
    chart = flat.chart
    s = tr.HStarSection(scale, constant_tensor(chart, np.eye(4), (+1, +1), -2.0),
                        constant_tensor(chart, np.zeros(4), (+1,), -2.0),
                        constant_scalar(chart, 0.0, -2.0))
    with pytest.raises(tr.TractorError):
        tr.invert_H(s).tau.value([0.1, 0, 0, 0])
