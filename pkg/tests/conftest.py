import numpy as np
import pytest

from cprojective import boundary as bd
from cprojective import cproj as cp
from cprojective import examples as ex
from cprojective import geometry as geo
from cprojective import tractor as tr


@pytest.fixture(scope="session")
def ball():
    return ex.unit_ball(2)


@pytest.fixture(scope="session")
def ball_conn(ball):
    return geo.canonical_connection(ball.g, ball.J)


@pytest.fixture(scope="session")
def ball_scale(ball, ball_conn):
    return tr.scale_from_connection(ball_conn, ball.J, ball.g)


@pytest.fixture(scope="session")
def ball_rho(ball):
    return bd.DefiningFunction(ball.chart, ball.rho)


@pytest.fixture(scope="session")
def ball_points(ball):
    return geo.seeded_points(ball.chart, count=20, seed=42, radius=0.6,
                             rho=ball.rho, rho_min=0.05)


@pytest.fixture(scope="session")
def ball_rays(ball_rho):
    seeds = [[0.99, 0, 0, 0], [0, 0.99, 0, 0], [0, 0, 0, 0.99],
             [0.5, 0.5, 0.5, 0.2], [-0.6, 0.3, -0.4, 0.4]]
    return [bd.make_ray(ball_rho, p) for p in seeds]


@pytest.fixture(scope="session")
def ball_sigma(ball):
    _, tau = geo.volume_density_and_tau(ball.g)
    tau_inv = geo.TensorField(ball.chart, (), -2.0,
                              lambda x, k: tr.jrecip(tau.jet(x, k)), "tau_inv")
    return geo.field_einsum(",ab->ab", tau_inv, geo.metric_inverse(ball.g),
                            (+1, +1))


@pytest.fixture(scope="session")
def ball_tau(ball):
    return geo.volume_density_and_tau(ball.g)[1]


@pytest.fixture(scope="session")
def flat():
    return ex.flat_space(2)


@pytest.fixture(scope="session")
def perturbed():
    return ex.perturbed_ball(2, 0.4)


@pytest.fixture(scope="session")
def perturbed_conn(perturbed):
    return geo.canonical_connection(perturbed.g, perturbed.J)


@pytest.fixture(scope="session")
def perturbed_scale(perturbed, perturbed_conn):
    return tr.scale_from_connection(perturbed_conn, perturbed.J, perturbed.g)


@pytest.fixture(scope="session")
def perturbed_points(perturbed):
    return geo.seeded_points(perturbed.chart, count=20, seed=42, radius=0.6,
                             rho=perturbed.rho, rho_min=0.05)


@pytest.fixture(scope="session")
def perturbed_rays(perturbed):
    rho = bd.DefiningFunction(perturbed.chart, perturbed.rho)
    seeds = [[0.99, 0, 0, 0], [0, 0.99, 0, 0], [0, 0, 0, 0.99],
             [0.5, 0.5, 0.5, 0.2]]
    return [bd.make_ray(rho, p) for p in seeds]


def random_polynomial(chart, rng, degree=2, scale=1.0):
    """Low-degree polynomial expression with seeded coefficients."""
    from cprojective import fieldexpr as fx
    e = fx.const(rng.uniform(-scale, scale))
    for i in range(chart.n):
        e = e + fx.const(rng.uniform(-scale, scale)) * fx.var(chart, i)
    if degree >= 2:
        for i in range(chart.n):
            for j in range(i, chart.n):
                e = e + fx.const(rng.uniform(-scale, scale) / 2.0) \
                    * fx.var(chart, i) * fx.var(chart, j)
    return e


def random_one_form(chart, rng, degree=1, scale=0.5):
    import numpy as _np
    comps = _np.array([random_polynomial(chart, rng, degree, scale)
                       for _ in range(chart.n)], dtype=object)
    return geo.tensor_from_exprs(chart, comps, (-1,))
