import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degensl import ode
from degensl.errors import IntegrationOverflowError
from degensl.potential import PotentialGrid, builtin

mus = st.complex_numbers(max_magnitude=20.0, allow_nan=False, allow_infinity=False).filter(
    lambda z: abs(z.imag) <= 2.0
)


@given(mus)
def test_free_solutions_match_trig_oracle(mu):
    q = PotentialGrid.zero(257)
    rec = ode.solve_fundamental(q, mu, richardson=False)
    x = q.x
    if mu == 0:
        c, s = np.ones_like(x), x
    else:
        c, s = np.cos(mu * x), np.sin(mu * x) / mu
    scale = np.cosh(abs(mu.imag) * np.pi)
    assert np.max(np.abs(rec.c - c)) <= 1e-12 * scale
    assert np.max(np.abs(rec.s - s)) <= 1e-12 * scale


@pytest.mark.parametrize("q0", [2.0, -3.0, 1.5 + 0.5j])
def test_constant_potential_oracle(q0):
    q = PotentialGrid(np.full(129, q0))
    mu = 1.7 + 0.3j
    k = np.sqrt(mu * mu - q0)
    e = ode.endpoints(q, mu)
    assert abs(e.c - np.cos(k * np.pi)) < 1e-12
    assert abs(e.s - np.sin(k * np.pi) / k) < 1e-12
    assert abs(e.s_prime - np.cos(k * np.pi)) < 1e-12


@pytest.mark.parametrize("name", ["zero", "linear", "cos2x", "asym-bump", "complex-linear"])
@given(mu=mus)
def test_wronskian_invariant(name, mu):
    rec = ode.solve_fundamental(builtin(name, 513), mu, richardson=False)
    assert rec.wronskian_defect() <= 1e-8


def test_empirical_order_at_least_three_and_a_half():
    f = lambda x: np.exp(-x) * np.sin(3 * x) + x
    mu = 4.3 + 0.2j
    vals = [ode.endpoints(PotentialGrid.from_function(f, n), mu).c for n in (65, 129, 257, 513)]
    ref = ode.endpoints(PotentialGrid.from_function(f, 4097), mu).c
    errs = np.abs(np.array(vals) - ref)
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders >= 3.5), orders


def test_mirror_symmetric_potential_gives_equal_diagonal(q_cos2x):
    e = ode.endpoints(q_cos2x, np.array([0.7, 3.2 + 0.4j, 11.0]))
    assert np.max(np.abs(e.c - e.s_prime)) < 1e-12


def test_batch_matches_single(q_linear_small):
    zs = np.array([0.3, 2.0 - 1.0j, 7.5 + 0.25j])
    batch = ode.fundamental_batch(q_linear_small, zs)
    for k, z in enumerate(zs):
        rec = ode.solve_fundamental(q_linear_small, z, richardson=False)
        assert np.array_equal(batch[0][k], rec.c)
        assert np.array_equal(batch[3][k], rec.s_prime)
        assert ode.eval_at_pi(rec)[2] == rec.s[-1]


def test_endpoints_shape_and_richardson(q_linear_small):
    zs = np.array([[1.0, 2.0], [3.0, 4.0 + 1j]])
    e = ode.endpoints(q_linear_small, zs, error_estimate=True)
    assert e.c.shape == (2, 2)
    assert e.error.shape == (4, 2, 2)
    fine = ode.endpoints(builtin("linear", 4097), zs)
    assert np.all(np.abs(e.c - fine.c) <= 20 * e.error[0] + 1e-13)


def test_extrapolation_improves(q_linear_small):
    mu = 9.1
    ref = ode.endpoints(builtin("linear", 8193), mu).s
    plain = ode.endpoints(q_linear_small, mu).s
    extra = ode.endpoints(q_linear_small, mu, extrapolate=True).s
    assert abs(extra - ref) < abs(plain - ref)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_overflow_is_reported():
    q = PotentialGrid(np.full(65, 1e5))
    with pytest.raises(IntegrationOverflowError) as info:
        ode.endpoints(q, 1.0)
    assert 0 < info.value.index < 65


def test_inhomogeneous_solution_oracle():
    q = PotentialGrid.zero(1025)
    mu = 1.5
    x = q.x
    # u = x^2 solves u'' + mu^2 u = 2 + mu^2 x^2 but has u'(0) = 0, u(0) = 0
    rhs = 2 + mu * mu * x * x
    u, du = ode.solve_inhomogeneous(q, mu, rhs, derivative=True)
    particular = x * x - (2 / mu**2) * (1 - np.cos(mu * x))
    expected = particular + (2 / mu**2) * (1 - np.cos(mu * x))
    assert np.max(np.abs(u - expected)) < 1e-8
    assert np.max(np.abs(du - 2 * x)) < 1e-7


def test_inhomogeneous_complex_parameter(q_linear):
    # substitute back: u'' - q u + mu^2 u = rhs, checked with second-order differences
    q = q_linear
    mu = 0.5 + 0.5j
    rhs = np.exp(1j * q.x) + q.x
    u, du = ode.solve_inhomogeneous(q, mu, rhs, derivative=True)
    assert abs(u[0]) < 1e-14 and abs(du[0]) < 1e-14
    assert np.max(np.abs(np.gradient(u, q.h, edge_order=2) - du)) < 1e-5 * np.max(np.abs(u))
    d2 = np.gradient(du, q.h, edge_order=2)
    resid = d2 - q.values * u + mu * mu * u - rhs
    assert np.max(np.abs(resid[1:-1])) < 2e-5 * np.max(np.abs(u))


def test_inhomogeneous_shape_check(q_linear_small):
    with pytest.raises(ValueError):
        ode.solve_inhomogeneous(q_linear_small, 1.0, np.ones(3))
