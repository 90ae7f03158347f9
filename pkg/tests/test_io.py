import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degensl import io
from degensl.errors import ValidationError

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite), min_size=0, max_size=20))
def test_csv_round_trip_is_lossless(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    io.write_csv(path, ["a", "b"], rows)
    header, data = io.read_csv(path)
    assert header == ["a", "b"]
    assert data.shape == (len(rows), 2)
    for (a, b), got in zip(rows, data):
        assert got[0] == a and got[1] == b


def test_empty_table_is_header_only(tmp_path):
    path = io.write_csv(tmp_path / "e.csv", ["mu", "re_residual", "im_residual"], [])
    assert path.read_text() == "mu,re_residual,im_residual\n"


def test_number_format():
    assert io.fmt(0.1) == "1.0000000000000001e-01"
    assert io.fmt(3) == "3"
    assert io.fmt(np.int64(7)) == "7"
    assert io.fmt(True) == "true"


def test_csv_is_whitespace_free(tmp_path):
    path = io.write_csv(tmp_path / "t.csv", ["x", "y"], [[1.0, -2.5], [3, 4e-300]])
    assert " " not in path.read_text()


def test_read_csv_rejects_garbage(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,abc\n")
    with pytest.raises(ValidationError):
        io.read_csv(path)
    path.write_text("x,y\n1\n")
    with pytest.raises(ValidationError):
        io.read_csv(path)


def test_json_floats_and_specials():
    doc = {"a": 0.1, "b": [1, 2.5], "c": float("nan"), "d": complex(1, -2), "e": None,
           "f": np.array([1.0, 2.0]), "g": {"h": True, "i": "text"}, "j": [], "k": {}}
    text = io.dumps(doc)
    back = json.loads(text)
    assert back["a"] == 0.1 and back["c"] is None and back["d"] == [1.0, -2.0]
    assert back["f"] == [1.0, 2.0] and back["g"] == {"h": True, "i": "text"}
    assert "1.0000000000000001e-01" in text


@given(st.lists(finite, max_size=10))
def test_json_round_trip_is_lossless(values):
    back = json.loads(io.dumps({"v": values}))["v"]
    assert back == values


def test_json_rejects_unknown_types():
    with pytest.raises(TypeError):
        io.dumps({"x": object()})


def test_json_is_deterministic():
    doc = {"z": [math.pi, [1, 2]], "a": {"b": 1e-300}}
    assert io.dumps(doc) == io.dumps(doc)
