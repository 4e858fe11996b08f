import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mscrowd.desired import DesiredField, eval_desired
from mscrowd.geometry import Grid
from mscrowd.measures import write_vector_field, read_vector_field


def test_constant():
    f = DesiredField.constant((0.4, 0.0))
    assert eval_desired(f, (3.0, -2.0)).tolist() == [0.4, 0.0]


def test_toward_target():
    f = DesiredField.toward((1.0, 0.0), 1.0)
    assert eval_desired(f, (0.0, 0.0)).tolist() == [1.0, 0.0]
    assert eval_desired(f, (1.0, 0.0)).tolist() == [0.0, 0.0]


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 3))
def test_toward_target_constant_speed(x, y, speed):
    f = DesiredField.toward((0.5, -0.25), speed)
    if math.hypot(x - 0.5, y + 0.25) > 1e-9:
        assert np.hypot(*eval_desired(f, (x, y))) == pytest.approx(speed)


def test_grid_sampled_piecewise_constant(rng):
    g = Grid(0.0, 0.0, 0.5, 4, 3)
    vals = rng.random(g.shape + (2,))
    f = DesiredField.sampled(g, vals)
    a = eval_desired(f, (0.51, 0.01))
    b = eval_desired(f, (0.99, 0.49))
    assert np.array_equal(a, b) and np.array_equal(a, vals[0, 1])


def test_grid_sampled_from_file(tmp_path, rng):
    g = Grid(0.0, 0.0, 0.5, 4, 3)
    vals = np.round(rng.random(g.shape + (2,)), 6)
    write_vector_field(tmp_path / "v.dat", g, vals)
    g2, v2 = read_vector_field(tmp_path / "v.dat")
    assert g2 == g
    np.testing.assert_allclose(v2, vals)


def test_zero_field_and_heading():
    f = DesiredField.zero(heading=(1.0, 0.0))
    assert not f([(1.0, 2.0)]).any()
    assert f.headings([(1.0, 2.0)]).tolist() == [[1.0, 0.0]]


def test_heading_follows_desired_direction():
    f = DesiredField.toward((3.0, 4.0), 2.0)
    np.testing.assert_allclose(f.headings([(0.0, 0.0)]), [[0.6, 0.8]])


def test_validation():
    with pytest.raises(ValueError):
        DesiredField.toward((0, 0), 0.0)
    with pytest.raises(ValueError):
        DesiredField("nope")
    with pytest.raises(ValueError):
        DesiredField.sampled(Grid(0, 0, 1, 2, 2), np.zeros((3, 2, 2)))
    with pytest.raises(ValueError):
        DesiredField.zero(heading=(1.0, 1.0))
