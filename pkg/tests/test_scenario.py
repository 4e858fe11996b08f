import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mscrowd.geometry import DoorSegment, Grid, Rect
from mscrowd.interaction import KernelParams
from mscrowd.measures import write_vector_field
from mscrowd.scenario import (PRESETS, DesiredSpec, Layout, LeaderSpec, PopulationSpec, Scenario, ScenarioError,
                              apply_overrides, build_world, funnel_field, load, parse, preset, seal_doors,
                              serialize, validate)
from mscrowd.stepper import StepControls

MINIMAL = """
[domain]
x0 = 0
y0 = 0
x1 = 2
y1 = 1
h = 0.1

[population.1]
origin = 0.55 0.45
spacing = 0.2 0.2
counts = 3 2
lambda = 6
theta = 0.5
f_r = 0.1
r_r = 0.3
alpha_bar = pi/2
"""


class TestPresets:
    @pytest.mark.parametrize("name", PRESETS)
    def test_every_preset_valid(self, name):
        assert validate(preset(name)) == []

    def test_table_values(self):
        t1 = preset("test1").populations[0]
        assert (t1.N, t1.lam, t1.kernel.f_r, t1.kernel.f_a, t1.kernel.r_r) == (100, 10.0, 0.1, 0.0, 0.5)
        assert t1.kernel.alpha_bar == math.pi / 2 and t1.desired.kind == "zero"
        assert preset("test1").controls.t_final == 1.0
        assert preset("test2_small").populations[0].N == 10
        big = preset("test2_large").populations[0]
        assert (big.N, big.lam, big.kernel.f_r, big.kernel.r_r) == (100, 100.0, 0.1, 0.25)
        t3 = preset("test3").populations
        assert all(p.exo_weight == 0.65 for p in t3)
        assert all((p.N, p.lam, p.kernel.r_r, p.exo_kernel.r_r) == (30, 30.0, 0.2, 0.35) for p in t3)
        t4 = preset("test4").populations[0]
        assert t4.kernel.f_a == 0.4 and t4.kernel.f_r == 0.05 and t4.kernel.r_a == 1.5
        assert t4.N == 25 and t4.lam == 80.0 and t4.leader.velocity == (0.4, 0.0)

    def test_test2_door_width(self):
        d = preset("test2_large").doors[0]
        assert d.width == 0.5

    def test_unknown(self):
        with pytest.raises(ScenarioError):
            preset("test9")

    @pytest.mark.parametrize("name", PRESETS)
    def test_scaling_within_tolerance(self, name):
        w = build_world(preset(name))
        for spec, pop in zip(preset(name).populations, w.populations):
            lam = pop.measure.lam
            assert abs(lam * pop.measure.macro.total_mass() - spec.N) <= 0.05 * spec.N

    def test_leader_appended_last(self):
        m = build_world(preset("test4")).populations[0].measure.micro
        assert m.n == 26 and m.leader.tolist() == [False] * 25 + [True]


class TestValidate:
    def test_theta_out_of_range(self):
        s = preset("test1")
        s = replace(s, populations=(replace(s.populations[0], theta=1.2),))
        assert any("theta out of range" in m for m in validate(s))

    def test_agent_in_obstacle(self):
        s = replace(preset("test1"), obstacles=(Rect(2.0, 1.0, 2.5, 1.5),))
        assert any("inside an obstacle" in m for m in validate(s))

    def test_door_off_the_walls(self):
        s = replace(preset("test1"), doors=(DoorSegment((3.0, 1.0), (3.0, 2.0), (1.0, 0.0)),))
        assert any("door 1" in m for m in validate(s))

    def test_lambda_m0_mismatch(self):
        s = preset("test1")
        s = replace(s, populations=(replace(s.populations[0], m0=20.0),))
        assert any("disagrees" in m for m in validate(s))

    def test_grid_must_fit(self):
        assert any("whole number" in m for m in validate(replace(preset("test1"), h=0.07)))

    def test_duplicate_agents(self):
        s = preset("test1")
        lay = Layout("points", points=((1.0, 1.0), (1.0, 1.0)))
        s = replace(s, populations=(replace(s.populations[0], layout=lay),))
        assert any("distinct" in m for m in validate(s))

    def test_build_rejects_invalid(self):
        s = preset("test1")
        with pytest.raises(ScenarioError):
            build_world(replace(s, populations=(replace(s.populations[0], theta=-0.1),)))


class TestText:
    def test_minimal(self):
        s = parse(MINIMAL)
        p = s.populations[0]
        assert p.N == 6 and p.kernel.r_a == 0.3 and p.kernel.alpha_bar == math.pi / 2
        assert s.grid.shape == (10, 20)
        assert validate(s) == []

    @pytest.mark.parametrize("name", PRESETS)
    def test_preset_round_trip(self, name):
        s = preset(name)
        assert parse(serialize(s)) == s
        assert serialize(parse(serialize(s))) == serialize(s)

    def test_unknown_key(self):
        with pytest.raises(ScenarioError, match="unknown key"):
            parse(MINIMAL + "colour = red\n")

    def test_unknown_section(self):
        with pytest.raises(ScenarioError):
            parse(MINIMAL + "\n[weather]\nrain = 1\n")

    def test_missing_domain_key(self):
        with pytest.raises(ScenarioError):
            parse(MINIMAL.replace("h = 0.1\n", ""))

    def test_gap_in_numbering(self):
        with pytest.raises(ScenarioError):
            parse(MINIMAL.replace("[population.1]", "[population.2]"))

    def test_bad_number(self):
        with pytest.raises(ScenarioError):
            parse(MINIMAL.replace("theta = 0.5", "theta = half"))

    def test_load_with_sampled_field(self, tmp_path):
        g = Grid(0.0, 0.0, 0.1, 20, 10)
        v = np.zeros(g.shape + (2,))
        v[..., 0] = 0.7
        write_vector_field(tmp_path / "field.dat", g, v)
        text = MINIMAL + "desired = grid_sampled\ndesired_file = field.dat\n"
        (tmp_path / "s.ini").write_text(text)
        w = build_world(load(tmp_path / "s.ini"))
        assert w.populations[0].desired([(1.0, 0.5)]).tolist() == [[0.7, 0.0]]

    @given(st.floats(0, 1), st.floats(0.5, 200), st.floats(0.01, 1), st.floats(0.05, 1.0),
           st.floats(0, math.pi), st.booleans(), st.sampled_from(["zero", "constant", "toward_target"]))
    def test_round_trip_property(self, theta, lam, fr, rr, abar, two, kind):
        pop = PopulationSpec(
            name="a", layout=Layout("points", points=((0.25, 0.5), (1.0 / 3.0, 0.75))),
            theta=theta, lam=lam, kernel=KernelParams(fr, 0.0, rr, rr, abar),
            desired={"zero": DesiredSpec("zero"),
                     "constant": DesiredSpec("constant", vector=(0.1, -0.2)),
                     "toward_target": DesiredSpec("toward_target", target=(1.5, 0.5), speed=1.25)}[kind],
            probe=Rect(0.0, 0.0, 1.0, 1.0), leader=LeaderSpec((1.5, 0.5), (0.4, 0.0), 1.5),
        )
        pops = (pop,)
        if two:
            pops = (pop, replace(pop, name="b", exo_kernel=KernelParams(fr, 0.0, rr * 2, rr * 2), exo_weight=0.65))
        s = Scenario("rt", Rect(0.0, 0.0, 2.0, 1.0), 0.1, pops, StepControls(0.05, 0.9, 3.0),
                     obstacles=(Rect(1.2, 0.0, 1.4, 0.3),),
                     doors=(DoorSegment((2.0, 0.25), (2.0, 0.75), (1.0, 0.0)),), eps_wall=0.01,
                     snapshot_every=5, stop_when_empty=True)
        assert parse(serialize(s)) == s


class TestOverrides:
    def test_population_key(self):
        s = apply_overrides(preset("test1"), ["populations.0.theta=0.3", "domain.h=0.05",
                                              "controls.t_final=10"])
        assert s.populations[0].theta == 0.3 and s.h == 0.05 and s.controls.t_final == 10.0

    def test_obstacle_key(self):
        s = apply_overrides(preset("test3"), ["obstacles.0.rect=4.9 0 5.1 1.4"])
        assert s.obstacles[0] == Rect(4.9, 0.0, 5.1, 1.4)

    @pytest.mark.parametrize("bad", ["populations.3.theta=0.1", "populations.0.colour=red",
                                     "theta=0.3", "populations.0.theta", "weather.rain=1"])
    def test_rejected(self, bad):
        with pytest.raises(ScenarioError):
            apply_overrides(preset("test1"), [bad])

    def test_value_type_checked(self):
        with pytest.raises(ScenarioError):
            apply_overrides(preset("test1"), ["populations.0.theta=abc"])


def test_seal_doors():
    s = seal_doors(preset("test2_large"))
    assert s.doors == () and s.populations[0].door is None and validate(s) == []


def test_funnel_field_points_at_gate():
    g = Grid(0.0, 0.0, 0.5, 8, 8)
    gate = Rect(2.0, 1.5, 2.5, 2.5)
    f = funnel_field(g, gate, 1.0, 1.2)
    np.testing.assert_allclose(np.hypot(f[..., 0], f[..., 1]), 1.2)
    assert (f[..., 0] > 0).all()
    assert f[0, 0, 1] > 0 and f[7, 0, 1] < 0  # below and above the gate steer inward
    assert f[1, 6].tolist() == [1.2, 0.0]  # past the gate: straight on
