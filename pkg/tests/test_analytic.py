import math

import numpy as np
import pytest

from mscrowd.analytic import RotatingGaussian, Translation, convergence, simulate


def test_exact_masses_sum_to_one():
    c = RotatingGaussian()
    for h in (0.2, 0.1):
        g = c.grid(h)
        assert c.exact(g, 0.7).total_mass() == pytest.approx(1.0, abs=1e-7)


def test_exact_centre_rotates():
    c = RotatingGaussian()
    g = c.grid(0.05)
    d = c.exact(g, math.pi / 2)
    m = d.cell_masses()
    cx = (m * g.centers()[..., 0]).sum()
    cy = (m * g.centers()[..., 1]).sum()
    assert cx == pytest.approx(0.0, abs=1e-6) and cy == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("h", [0.2, 0.1, 0.05, 0.025])
def test_translation_is_exact(h):
    num, ref = simulate(Translation(), h)
    assert np.array_equal(num.rho, ref.rho)


def test_rotation_error_shrinks():
    res = convergence("rotation", [0.2, 0.1])
    assert res[1][1] < res[0][1]


def test_unknown_case():
    with pytest.raises(KeyError):
        convergence("spiral", [0.1])
