import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degensl.errors import DegenerateDeterminantError, ValidationError
from degensl.potential import PotentialGrid, builtin
from degensl.spectral import (
    DELTA,
    DIRICHLET,
    BoundaryTheta,
    DetEvaluator,
    SearchRegion,
    SpectralPoint,
    char_det,
    degenerate_floor,
    dirichlet_det,
    find_zeros,
    refine_zero,
    winding_number,
)


def test_theta_validation():
    assert BoundaryTheta(0).sign == 1 and BoundaryTheta(1).sign == -1
    with pytest.raises(ValidationError):
        BoundaryTheta(2)


def test_spectral_point_canonical():
    p = SpectralPoint.from_mu(-2.0 + 0.5j, 2)
    assert p.mu == 2.0 - 0.5j
    assert p.lam == pytest.approx(p.mu**2)
    assert p.to_json()["multiplicity"] == 2
    with pytest.raises(ValidationError):
        SpectralPoint.from_mu(1.0, 0)


def test_region_validation():
    with pytest.raises(ValidationError):
        SearchRegion(2.0, 1.0, 0.0, 1.0)


@pytest.mark.parametrize("name", ["zero", "cos2x"])
def test_symmetric_potentials_have_identically_zero_delta(name):
    q = builtin(name)
    mus = np.linspace(0.1, 30.0, 100)
    assert np.max(np.abs(char_det(q, 0, mus))) <= 1e-7


def test_asymmetric_potential_has_nonzero_delta(q_linear):
    mus = np.linspace(0.1, 30.0, 100)
    assert np.max(np.abs(char_det(q_linear, 0, mus))) > 1e-2


@given(st.floats(0.0, 20.0), st.floats(-2.0, 2.0))
def test_delta_is_even(re, im):
    q = builtin("asym-bump", 257)
    mu = complex(re, im)
    a, b = char_det(q, 0, np.array([mu, -mu]))
    assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


def test_dirichlet_det_free_oracle(q_zero):
    mus = np.array([0.5, 1.5 + 0.3j, 7.25])
    assert np.allclose(dirichlet_det(q_zero, mus), np.sin(np.pi * mus) / mus, atol=1e-12)


def test_evaluator_caches(q_linear_small):
    f = DetEvaluator(DELTA, q_linear_small)
    zs = np.array([1.0, 2.0, 1.0])
    v = f(zs)
    assert v[0] == v[2]
    assert len(f._cache) == 2
    with pytest.raises(ValidationError):
        DetEvaluator("neumann", q_linear_small)


def test_free_dirichlet_zeros(q_zero):
    region = SearchRegion(0.5, 10.5, -1.0, 1.0)
    zeros = find_zeros(DIRICHLET, q_zero, 0, region)
    assert [p.multiplicity for p in zeros] == [1] * 10
    assert np.max(np.abs(np.array([p.mu for p in zeros]) - np.arange(1, 11))) <= 1e-7
    assert winding_number(DIRICHLET, q_zero, 0, region) == 10


def test_find_zeros_refuses_identically_zero_delta(q_cos2x):
    with pytest.raises(DegenerateDeterminantError):
        find_zeros(DELTA, q_cos2x, 0, SearchRegion(0.5, 5.5, -1.0, 1.0))


def test_zeros_are_zeros(q_linear):
    zeros = find_zeros(DELTA, q_linear, 0, SearchRegion(0.5, 8.5, -1.0, 1.0))
    assert len(zeros) >= 5
    vals = char_det(q_linear, 0, np.array([p.mu for p in zeros]))
    assert np.max(np.abs(vals)) < 1e-8
    # a box around each zero winds once
    for p in zeros:
        box = SearchRegion(p.mu.real - 0.01, p.mu.real + 0.01, p.mu.imag - 0.01, p.mu.imag + 0.01)
        assert winding_number(DELTA, q_linear, 0, box) == p.multiplicity


def test_double_zero_multiplicity(q_zero):
    def f(zs):
        zs = np.asarray(zs, dtype=complex)
        return (zs - 2.0) ** 2 * (zs + 1.0)

    p = refine_zero(DELTA, q_zero, 0, 2.3 + 0.1j, evaluator=f)
    assert p.multiplicity == 2
    assert abs(p.mu - 2.0) < 1e-7


def test_refine_from_perturbed_seed(q_zero):
    p = refine_zero(DIRICHLET, q_zero, 0, 3.2 + 0.1j)
    assert abs(p.mu - 3.0) < 1e-10


def test_dirichlet_asymptotics(q_linear):
    # zeros of s(pi, .) approach n like C/n with C = int q / (2 pi)
    zeros = find_zeros(DIRICHLET, q_linear, 0, SearchRegion(0.5, 20.5, -1.0, 1.0))
    mus = np.array([p.mu.real for p in zeros])
    n = np.arange(1, mus.size + 1)
    assert mus.size == 20
    C = np.max(np.abs(mus[14:] - n[14:]) * n[14:])
    assert np.all(np.abs(mus[2:] - n[2:]) <= 1.05 * C / n[2:])
    assert C == pytest.approx(np.pi / 4, rel=0.02)


def test_degenerate_floor_scales_with_norm(q_linear):
    assert degenerate_floor(q_linear) > degenerate_floor(PotentialGrid.zero(65))
