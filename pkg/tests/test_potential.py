import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degensl.errors import ValidationError
from degensl.potential import (
    BUILTINS,
    PotentialGrid,
    builtin,
    from_samples,
    lagrange_weights,
    load_potential,
    potential_from_spec,
)


def test_zero_builtin_is_zero():
    assert not np.any(builtin("zero").values)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_sample_their_functions(name):
    q = builtin(name, 65)
    assert q.n_points == 65
    assert np.allclose(q.values, BUILTINS[name](q.x))


def test_unknown_builtin():
    with pytest.raises(ValidationError, match="unknown built-in"):
        builtin("sawtooth")


def test_grid_geometry():
    q = PotentialGrid.zero(9)
    assert q.h == pytest.approx(np.pi / 8)
    assert q.x[0] == 0.0 and q.x[-1] == pytest.approx(np.pi)


@pytest.mark.parametrize("bad", [np.zeros(4), np.array([0.0] * 8 + [np.nan])])
def test_rejects_short_or_nonfinite(bad):
    with pytest.raises(ValidationError):
        PotentialGrid(bad)


def test_values_are_frozen():
    q = builtin("linear", 17)
    with pytest.raises(ValueError):
        q.values[0] = 1.0


def test_samples_resampled_within_linear_bound():
    xs = np.linspace(0, np.pi, 9)
    rows = [[x, x, 0.0] for x in xs]
    q = from_samples(rows, 2049)
    h = xs[1] - xs[0]
    assert np.max(np.abs(q.values - q.x)) <= h * np.pi


def test_samples_validation_names_problem():
    with pytest.raises(ValidationError, match="increasing"):
        from_samples([[0, 0, 0], [2, 0, 0], [1, 0, 0], [np.pi, 0, 0]])
    with pytest.raises(ValidationError, match="cover"):
        from_samples([[0.5, 0, 0], [np.pi, 0, 0]])
    with pytest.raises(ValidationError):
        from_samples([[0, "a", 0]])


def test_spec_forms(tmp_path):
    samples = [[x, np.sin(x), 0.0] for x in np.linspace(0, np.pi, 33)]
    a = potential_from_spec({"expr-free samples": samples}, 65)
    b = potential_from_spec({"samples": samples}, 65)
    assert np.array_equal(a.values, b.values)
    path = tmp_path / "q.json"
    path.write_text(json.dumps({"samples": samples}))
    c = load_potential(path, 65)
    assert np.array_equal(a.values, c.values)
    d = potential_from_spec("q.json", 65, base_dir=tmp_path)
    assert np.array_equal(a.values, d.values)
    assert np.array_equal(potential_from_spec({"builtin": "cos2x"}, 65).values, builtin("cos2x", 65).values)


def test_missing_file():
    with pytest.raises(ValidationError, match="not found"):
        load_potential("/nonexistent/q.json")


def test_malformed_spec():
    with pytest.raises(ValidationError, match="expected one of"):
        potential_from_spec({"formula": "x"})


@given(st.floats(0.0, 1.0))
def test_lagrange_weights_reproduce_cubics(t):
    nodes = np.array([-1.0, 0.0, 1.0, 2.0])
    w = lagrange_weights(nodes, t)
    assert w.sum() == pytest.approx(1.0)
    for p in range(4):
        assert w @ nodes**p == pytest.approx(t**p, abs=1e-12)


@pytest.mark.parametrize("tau", [0.2113, 0.5, 0.7887])
def test_interval_values_exact_for_cubic(tau):
    f = lambda x: 1 + x - 0.3 * x**2 + 0.05 * x**3
    q = PotentialGrid.from_function(f, 33)
    mid = q.x[:-1] + tau * q.h
    assert np.allclose(q.interval_values(tau), f(mid), atol=1e-12)


def test_refined_is_cubic_accurate():
    q = PotentialGrid.from_function(np.cos, 65)
    r = q.refined()
    assert r.n_points == 129
    assert np.max(np.abs(r.values - np.cos(r.x))) < 0.1 * q.h**4


def test_norms():
    q = builtin("linear", 2049)
    assert q.l1_norm() == pytest.approx(np.pi**2 / 2, rel=1e-6)
    assert q.sup_norm() == pytest.approx(np.pi)
