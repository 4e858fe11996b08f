import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mscrowd.diagnostics import (ZeroMass, aggregate, average_outflow_time, center_of_mass, door_flux,
                                 l1_cell_error, moments, scale_moments)
from mscrowd.geometry import DoorSegment, Grid, Rect
from mscrowd.measures import CrowdMeasure, MacroDensity, MicroState
from mscrowd.scenario import build_world, preset
from mscrowd.stepper import run

G = Grid(-2.0, -2.0, 0.5, 8, 8)


def cm_of(points, rho=None, theta=1.0, lam=1.0, grid=G):
    rho = np.zeros(grid.shape) if rho is None else rho
    return CrowdMeasure(MicroState.from_points(points), MacroDensity(grid, rho), theta, lam)


class TestCenter:
    def test_single_agent(self):
        assert center_of_mass(cm_of([(0.3, -0.7)])).tolist() == [0.3, -0.7]

    def test_symmetric_square(self):
        rho = np.zeros(G.shape)
        rho[2:6, 2:6] = 1.0
        np.testing.assert_allclose(center_of_mass(cm_of(np.zeros((0, 2)), rho, theta=0.0)), [0.0, 0.0],
                                   atol=1e-15)

    def test_blend(self):
        rho = np.zeros(G.shape)
        rho[3, 1] = 4.0  # centre (-1.25, -0.25); mass 1 with h^2 = 0.25
        c = center_of_mass(cm_of([(0.75, -0.25)], rho, theta=0.5, lam=1.0))
        np.testing.assert_allclose(c, [-0.25, -0.25])

    def test_empty(self):
        with pytest.raises(ZeroMass):
            center_of_mass(cm_of(np.zeros((0, 2))))

    def test_region(self):
        c = center_of_mass(cm_of([(-1.0, 0.0), (1.0, 0.0)]), Rect(0.0, -1.0, 2.0, 1.0))
        assert c.tolist() == [1.0, 0.0]


class TestMoments:
    def test_single_dirac(self):
        assert moments(cm_of([(0.4, 0.4)]))["m"] == (0.0, 0.0, 0.0)

    def test_two_agents(self):
        assert moments(cm_of([(-1.0, 0.0), (1.0, 0.0)]))["m"] == (2.0, 0.0, 2.0)

    def test_empty_scale(self):
        with pytest.raises(ZeroMass):
            scale_moments(cm_of([(0.0, 0.0)]), "M")

    @given(st.floats(0, 1), st.floats(0.1, 50), st.integers(0, 10 ** 6))
    def test_shared_centre_identity(self, theta, lam, seed):
        rng = np.random.default_rng(seed)
        rho = rng.random(G.shape)
        cm = cm_of(rng.random((9, 2)) * 3 - 1.5, rho, theta, lam)
        c = rng.random(2)
        res = moments(cm, center=c)
        for k in range(3):
            ref = theta * res["m"][k] + (1 - theta) * lam * res["M"][k]
            assert res["mu"][k] == pytest.approx(ref, rel=1e-12, abs=1e-300)
        for s in ("m", "M", "mu"):
            assert res[s][2] == res[s][0] + res[s][1]

    @given(st.integers(-2, 2), st.integers(-2, 2), st.integers(0, 10 ** 6))
    def test_translation_covariant(self, di, dj, seed):
        rng = np.random.default_rng(seed)
        g = Grid(0.0, 0.0, 0.5, 12, 12)
        rho = np.zeros(g.shape)
        rho[4:8, 4:8] = rng.random((4, 4))
        pts = rng.random((5, 2)) * 2 + 2
        a = moments(cm_of(pts, rho, 0.4, 3.0, g))
        rho2 = np.roll(np.roll(rho, dj, 0), di, 1)
        b = moments(cm_of(pts + [di * 0.5, dj * 0.5], rho2, 0.4, 3.0, g))
        for s in a:
            np.testing.assert_allclose(b[s], a[s], rtol=1e-10, atol=1e-12)


class TestFlux:
    door = DoorSegment((2.0, 0.0), (2.0, 2.0), (1.0, 0.0))
    probe = Rect(-2.0, -2.0, 2.0, 2.0)

    def test_nothing_moves(self):
        cm = cm_of([(0.0, 0.0)])
        f = door_flux(cm, cm, self.door, self.probe, 0.1, cm.micro.positions)
        assert (f.total, f.forward, f.backward) == (0.0, 0, 0)

    def test_one_agent_exits(self):
        pre = cm_of([(1.9, 1.0), (0.0, 0.0)])
        post = cm_of([(0.0, 0.0)])
        attempted = np.array([[2.1, 1.0], [0.0, 0.0]])
        f = door_flux(pre, post, self.door, self.probe, 0.1, attempted)
        assert f.forward == 1 and f.backward == 0
        assert f.total == pytest.approx(1 / 0.1)

    def test_macro_part(self):
        rho = np.ones(G.shape)
        rho2 = rho.copy()
        rho2[0, 0] = 0.0
        pre, post = cm_of([], rho, 0.25, 8.0), cm_of([], rho2, 0.25, 8.0)
        f = door_flux(pre, post, None, self.probe, 0.5)
        assert f.macro == pytest.approx(0.75 * 8.0 * 0.25 / 0.5)
        assert f.micro == 0.0

    def test_closed_room_has_zero_flux(self):
        rec, _ = run(build_world(preset("test1")), max_steps=20)
        assert not rec.column("p1_flux").any()


class TestOutflowTime:
    def test_step_function(self):
        t = np.linspace(0, 10, 100001)
        m = np.where(t < 3.0, 5.0, 0.0)
        assert average_outflow_time(t, m) == pytest.approx(3.0, abs=1e-3)

    def test_linear_decay(self):
        t = np.linspace(0, 4, 11)
        assert average_outflow_time(t, 2.0 * (1 - t / 4)) == pytest.approx(2.0)

    def test_empty_room(self):
        with pytest.raises(ZeroMass):
            average_outflow_time([0, 1], [0.0, 0.0])

    @given(st.lists(st.floats(0, 1), min_size=2, max_size=40), st.floats(0.1, 20))
    def test_monotone_series_in_range(self, drops, T):
        m = 1.0 - np.cumsum(np.asarray(drops) / (sum(drops) + 1))
        m = np.concatenate([[1.0], m])
        t = np.linspace(0, T, len(m))
        assert 0.0 <= average_outflow_time(t, m) <= T * (1 + 1e-12)


class TestL1:
    g = Grid(0.0, 0.0, 0.1, 6, 4)

    def test_identical(self, rng):
        d = MacroDensity(self.g, rng.random(self.g.shape))
        assert l1_cell_error(d, d) == 0.0

    def test_one_cell(self, rng):
        rho = rng.random(self.g.shape)
        rho2 = rho.copy()
        rho2[2, 3] += 0.7
        assert l1_cell_error(MacroDensity(self.g, rho), MacroDensity(self.g, rho2)) == pytest.approx(0.7 * 0.01)

    def test_nested_reference(self, rng):
        fine = Grid(0.0, 0.0, 0.05, 12, 8)
        rf = rng.random(fine.shape)
        coarse = aggregate(MacroDensity(fine, rf), self.g) / self.g.cell_area
        assert l1_cell_error(MacroDensity(fine, rf), MacroDensity(self.g, coarse)) == pytest.approx(0.0, abs=1e-15)

    def test_non_nested(self, rng):
        other = Grid(0.0, 0.0, 0.07, 8, 5)
        with pytest.raises(ValueError):
            l1_cell_error(MacroDensity(other, np.ones(other.shape)), MacroDensity(self.g, np.ones(self.g.shape)))


class TestRecord:
    def test_csv_format(self):
        rec, _ = run(build_world(preset("test1")), max_steps=3)
        rows = list(csv.reader(io.StringIO(rec.to_csv())))
        assert rows[0][:3] == ["step", "t", "dt"]
        assert len(rows) == 5 and all(len(r) == len(rows[0]) for r in rows)
        assert rows[1][0] == "0" and rows[2][0] == "1"
        for v in rows[2][1:]:
            digits = v.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
            assert len(digits) <= 9
        for s in ("m", "M", "mu"):
            i1, i2, ig = (rec.column(f"p1_{k}_{s}") for k in ("I1", "I2", "IG"))
            np.testing.assert_allclose(ig, i1 + i2, rtol=1e-8)

    def test_times_increase_and_masses_nonnegative(self):
        rec, _ = run(build_world(preset("test4")), max_steps=30)
        assert (np.diff(rec.column("t")) > 0).all()
        for c in ("p1_macro_mass", "p1_mu_mass", "p1_rho_min"):
            assert (rec.column(c) >= 0).all()
        assert "p1_leader_x" in rec.columns

    def test_probe_budget(self):
        s = preset("test2_small")
        rec, _ = run(build_world(s), stop_when_empty=True)
        m0, M0 = rec.column("p1_probe_m")[0], rec.column("p1_probe_M")[0]
        np.testing.assert_allclose(rec.column("p1_out_M") + rec.column("p1_probe_M"), M0, rtol=1e-8)
        np.testing.assert_array_equal(rec.column("p1_out_m") + rec.column("p1_probe_m"), m0)
        assert rec.column("p1_cross_fwd")[-1] == m0 and rec.column("p1_cross_back")[-1] == 0
