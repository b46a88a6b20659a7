import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subfreq import GridFunction, make_box_domain, make_mask_domain
from subfreq.gridio import (
    domain_from_pgm,
    dumps,
    field_from_csv,
    field_slice_to_pgm,
    field_to_csv,
    format_float,
    mask_to_pgm,
    read_pgm,
    write_pgm,
)


@pytest.mark.parametrize("binary", [False, True])
def test_pgm_round_trip(tmp_path, binary):
    img = np.random.default_rng(0).integers(0, 256, size=(7, 5))
    path = tmp_path / "a.pgm"
    write_pgm(path, img, binary=binary)
    assert np.array_equal(read_pgm(path), img)


def test_pgm_with_comments_and_errors(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_text("P2\n# a comment\n2 2\n255\n0 255 # trailing\n255 0\n")
    assert read_pgm(path).shape == (2, 2)
    path.write_text("P2\n2 2\n255\n0 255\n")
    with pytest.raises(ValueError, match="samples"):
        read_pgm(path)
    path.write_text("P3\n1 1\n255\n0\n")
    with pytest.raises(ValueError, match="magic"):
        read_pgm(path)


def test_mask_round_trip_through_pgm(tmp_path):
    dom = make_mask_domain([(0, 1), (0, 2)], (9, 13), lambda x: (x[0] - 0.5) ** 2 + (x[1] - 1) ** 2 < 0.2)
    path = tmp_path / "m.pgm"
    mask_to_pgm(path, dom)
    back = domain_from_pgm(path, dom.bounds)
    assert np.array_equal(back.interior_mask, dom.interior_mask)
    assert back.shape == dom.shape


def test_field_slice_scales_to_full_range(tmp_path):
    dom = make_box_domain([(0, 1)] * 3, (5, 6, 7))
    f = GridFunction.from_callable(dom, lambda x: x[0] * x[1] * x[2])
    path = tmp_path / "s.pgm"
    field_slice_to_pgm(path, f)
    img = read_pgm(path)
    assert img.shape == (5, 6) and img.max() == 255


@given(st.integers(0, 2**31 - 1))
def test_csv_round_trip_is_bit_exact(seed):
    import tempfile
    from pathlib import Path

    dom = make_box_domain([(0, 1), (-1, 1)], (5, 4))
    f = GridFunction.from_interior(dom, np.random.default_rng(seed).normal(size=dom.num_interior))
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "f.csv"
        field_to_csv(path, f)
        assert path.read_text().splitlines()[0] == "i,j,x1,x2,value"
        assert np.array_equal(field_from_csv(path, dom).values, f.values)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(x):
    assert float(format_float(x)) == x


def test_dumps_is_valid_json_with_stable_layout():
    obj = {"b": 1, "a": [1.0, 2.5, None, True], "nested": {"x": np.float64(0.1)}, "s": "q\"", "e": []}
    text = dumps(obj)
    assert json.loads(text) == {"b": 1, "a": [1.0, 2.5, None, True], "nested": {"x": 0.1}, "s": 'q"', "e": []}
    assert text.index('"b"') < text.index('"a"')
    assert dumps(obj) == text
    assert format_float(float("nan")) == "NaN"
    with pytest.raises(TypeError):
        dumps({"x": object()})
