import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from degensl.errors import ValidationError
from degensl.target import TargetDeterminant, eval_f, eval_v, f_sup_bound, load_target, sup_bound_check

coeff_lists = st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=4)


def _quad_f(a, mu):
    g = lambda t: sum(ak * np.sin((k + 1) * t) for k, ak in enumerate(a))
    re = quad(lambda t: g(t) * np.sin(mu * t), 0, np.pi, limit=200)[0]
    return re


@given(coeff_lists, st.floats(-12.0, 12.0))
def test_closed_form_matches_quadrature(a, mu):
    t = TargetDeterminant(np.array(a))
    assert eval_f(t, mu).real == pytest.approx(_quad_f(a, mu), abs=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("d", [0.0, 1e-9, -1e-7, 1e-4])
def test_stable_near_integer_nodes(k, d):
    # only the k-th mode survives at mu = k: pi/2 * a_k
    t = TargetDeterminant(np.array([0.3, -0.2, 0.7]))
    val = eval_f(t, k + d)
    ref = _quad_f([0.3, -0.2, 0.7], k + d)
    assert val.real == pytest.approx(ref, abs=1e-9)
    assert np.isfinite(val)


def test_single_mode_values():
    t = TargetDeterminant(np.array([1.0]))
    assert eval_f(t, 1.0) == pytest.approx(np.pi / 2)
    assert abs(eval_f(t, 3.0)) < 1e-15
    assert eval_v(t, 0.0) == pytest.approx(np.pi)


@given(coeff_lists, st.floats(-3.0, 3.0), st.floats(-1.0, 1.0))
def test_odd_f_even_v(a, re, im):
    t = TargetDeterminant(np.array(a))
    mu = complex(re, im)
    assert eval_f(t, -mu) == pytest.approx(-eval_f(t, mu), abs=1e-12)
    assert eval_v(t, -mu) == pytest.approx(eval_v(t, mu), abs=1e-12)


@given(coeff_lists)
def test_v_continuous_at_small_radius_switch(a):
    t = TargetDeterminant(np.array(a))
    lo, hi = eval_v(t, np.array([0.5 - 1e-12, 0.5 + 1e-12]))
    assert abs(lo - hi) < 1e-9


def test_scale_applies():
    a = np.array([1.0, 2.0])
    assert eval_f(TargetDeterminant(a, scale=0.5), 1.3) == pytest.approx(0.5 * eval_f(TargetDeterminant(a), 1.3))
    assert TargetDeterminant(a, scale=0.0).is_zero


def test_density():
    t = TargetDeterminant(np.array([1.0, 0.5]))
    x = np.linspace(0, np.pi, 7)
    assert np.allclose(t.density(x), np.sin(x) + 0.5 * np.sin(2 * x))


@pytest.mark.parametrize(
    "kwargs",
    [dict(sine_coeffs=np.array([])), dict(sine_coeffs=np.array([np.nan])),
     dict(sine_coeffs=np.array([1.0]), m=-1), dict(sine_coeffs=np.array([1.0]), scale=-2.0)],
)
def test_validation(kwargs):
    with pytest.raises(ValidationError):
        TargetDeterminant(**kwargs)


def test_json_round_trip(tmp_path):
    t = TargetDeterminant(np.array([0.01, 0.02j]), m=1, scale=2.0)
    path = tmp_path / "t.json"
    path.write_text(json.dumps(t.to_json()))
    u = load_target(path)
    assert np.array_equal(u.sine_coeffs, t.sine_coeffs)
    assert (u.m, u.scale) == (1, 2.0)


def test_load_errors(tmp_path):
    with pytest.raises(ValidationError, match="not found"):
        load_target(tmp_path / "none.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ValidationError, match="not valid JSON"):
        load_target(bad)
    bad.write_text(json.dumps({"coeffs": [1]}))
    with pytest.raises(ValidationError, match="sine_coeffs"):
        load_target(bad)


@pytest.mark.parametrize("re_mu", [45.0, 60.0, 100.0])
def test_tail_bound_dominates_samples(re_mu):
    t = TargetDeterminant(np.array([0.5, -0.25, 1.0]))
    bound = f_sup_bound(t, re_mu)
    mu = np.linspace(re_mu, re_mu + 50, 2001)[None, :] + 1j * np.linspace(-1, 1, 21)[:, None]
    assert np.max(np.abs(eval_f(t, mu))) <= bound


def test_tail_bound_infinite_near_nodes():
    assert f_sup_bound(TargetDeterminant(np.array([0.0, 0.0, 1.0])), 3.0) == np.inf


def test_sup_bound_check_pass_and_fail():
    assert sup_bound_check(TargetDeterminant(np.array([0.01])), 2).passed
    assert not sup_bound_check(TargetDeterminant(np.array([10.0])), 2).passed
    assert sup_bound_check(TargetDeterminant(np.array([5.0]), scale=0.0), 2).passed
