import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mscrowd.geometry import Domain, DoorSegment, Grid, Rect, cell_index, project_admissible, rect_overlap_area

coord = st.floats(-5, 5, allow_nan=False)
size = st.floats(0.01, 3, allow_nan=False)


@st.composite
def rects(draw):
    x, y = draw(coord), draw(coord)
    return Rect(x, y, x + draw(size), y + draw(size))


class TestCellIndex:
    g = Grid(0.0, 0.0, 0.1, 10, 10)

    def test_containing_cell(self):
        assert cell_index((0.05, 0.05), self.g) == (0, 0)
        assert cell_index((0.25, 0.15), self.g) == (2, 1)

    def test_half_open_boundary(self):
        assert cell_index((0.1, 0.0), self.g) == (1, 0)

    def test_outside_gives_marker(self):
        assert cell_index((-0.01, 0.5), self.g) is None
        assert cell_index((1.0, 0.5), self.g) is None

    def test_every_edge_belongs_to_the_cell_above(self):
        for i in range(10):
            x = self.g.x0 + i * self.g.h
            assert cell_index((x, 0.55), self.g) == (i, 5)

    @given(st.floats(0, 0.999999), st.floats(0, 0.999999))
    def test_point_lies_in_its_cell(self, x, y):
        i, j = cell_index((x, y), self.g)
        r = self.g.cell_rect(i, j)
        assert r.x0 <= x < r.x1 and r.y0 <= y < r.y1


class TestOverlap:
    def test_examples(self):
        u = Rect(0, 0, 1, 1)
        assert rect_overlap_area(u, u) == 1.0
        assert rect_overlap_area(u, Rect(2, 2, 3, 3)) == 0.0
        assert rect_overlap_area(u, u.translated(0.5, 0.0)) == 0.5

    @given(rects(), rects())
    def test_symmetric_nonnegative_bounded(self, a, b):
        o = rect_overlap_area(a, b)
        assert o == rect_overlap_area(b, a)
        assert 0.0 <= o <= min(a.area, b.area) * (1 + 1e-12)

    @given(rects(), rects(), st.floats(-3, 3), st.floats(-3, 3))
    def test_translation_invariant(self, a, b, dx, dy):
        o1 = rect_overlap_area(a, b)
        o2 = rect_overlap_area(a.translated(dx, dy), b.translated(dx, dy))
        assert o2 == pytest.approx(o1, abs=1e-9)

    @given(rects())
    def test_partition_of_the_domain(self, r):
        g = Grid(-2.0, -1.0, 0.25, 16, 12)
        total = sum(rect_overlap_area(g.cell_rect(i, j), r) for j in range(g.ny) for i in range(g.nx))
        assert total == pytest.approx(rect_overlap_area(r, g.bounds), abs=1e-9)


class TestProjection:
    box = Rect(0.0, 0.0, 4.0, 4.0)

    def test_away_from_boundaries_unchanged(self):
        v = project_admissible((1.0, -1.0), (2.0, 2.0), (), self.box)
        assert v.tolist() == [1.0, -1.0]

    def test_slides_along_floor(self):
        v = project_admissible((1.0, -1.0), (2.0, 0.0), (), self.box)
        assert v.tolist() == [1.0, 0.0]

    def test_tangent_unchanged(self):
        v = project_admissible((1.0, 0.0), (2.0, 0.0), (), self.box)
        assert v.tolist() == [1.0, 0.0]

    def test_leaving_the_wall_unchanged(self):
        assert project_admissible((0.3, 0.7), (2.0, 0.0), (), self.box).tolist() == [0.3, 0.7]

    def test_concave_corner_enforces_both(self):
        v = project_admissible((-1.0, -1.0), (0.0, 0.0), (), self.box)
        assert v.tolist() == [0.0, 0.0]

    def test_obstacle_face(self):
        obs = (Rect(2.0, 1.0, 3.0, 3.0),)
        v = project_admissible((1.0, 0.5), (1.995, 2.0), obs, self.box, eps=0.01)
        assert v.tolist() == [0.0, 0.5]
        v = project_admissible((1.0, 0.5), (1.9, 2.0), obs, self.box, eps=0.01)
        assert v.tolist() == [1.0, 0.5]

    def test_door_opens_the_wall(self):
        door = DoorSegment((4.0, 1.5), (4.0, 2.5), (1.0, 0.0))
        assert project_admissible((1.0, 0.0), (4.0, 2.0), (), self.box, (door,)).tolist() == [1.0, 0.0]
        assert project_admissible((1.0, 0.0), (4.0, 3.0), (), self.box, (door,)).tolist() == [0.0, 0.0]

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 4), st.floats(0, 4))
    def test_idempotent(self, vx, vy, x, y):
        obs = (Rect(1.0, 1.0, 2.0, 2.5),)
        once = project_admissible((vx, vy), (x, y), obs, self.box, eps=0.2)
        twice = project_admissible(once, (x, y), obs, self.box, eps=0.2)
        assert np.array_equal(once, twice)


class TestDomain:
    def test_free_mask_and_exit_faces(self):
        g = Grid(0.0, 0.0, 1.0, 4, 3)
        d = Domain(g, (Rect(1.0, 1.0, 2.0, 2.0),), (DoorSegment((4.0, 1.0), (4.0, 2.0), (1.0, 0.0)),))
        assert d.free_mask().sum() == 11 and not d.free_mask()[1, 1]
        ex = d.exit_faces()
        assert ex[1, 3, 1] and ex.sum() == 1

    def test_cell_projection_blocks_walls_and_obstacles(self):
        g = Grid(0.0, 0.0, 1.0, 3, 3)
        d = Domain(g, (Rect(1.0, 1.0, 2.0, 2.0),))
        v = np.ones(g.shape + (2,))
        p = d.project_cells(v)
        assert p[0, 2].tolist() == [0.0, 1.0]  # right wall
        assert p[1, 0].tolist() == [0.0, 1.0]  # obstacle to the right
        assert p[1, 1].tolist() == [0.0, 0.0]  # inside the obstacle
        assert p[2, 2].tolist() == [0.0, 0.0]

    def test_move_slides_and_exits(self):
        g = Grid(0.0, 0.0, 0.1, 40, 40)
        door = DoorSegment((4.0, 1.5), (4.0, 2.5), (1.0, 0.0))
        d = Domain(g, doors=(door,))
        p, out = d.move((3.95, 2.0), (0.2, 0.0))
        assert out
        p, out = d.move((3.95, 3.0), (0.2, 0.1))
        assert not out and p[0] < 4.0 and p[1] == pytest.approx(3.1)

    def test_door_crossings_by_direction(self):
        door = DoorSegment((1.0, 0.0), (1.0, 1.0), (1.0, 0.0))
        before = np.array([[0.9, 0.5], [1.1, 0.5], [0.9, 1.5], [0.5, 0.5]])
        after = np.array([[1.1, 0.5], [0.9, 0.4], [1.1, 1.5], [0.6, 0.5]])
        assert door.crossings(before, after) == (1, 1)

    def test_door_must_be_axis_aligned(self):
        with pytest.raises(ValueError):
            DoorSegment((0.0, 0.0), (1.0, 1.0), (1.0, 0.0))
        with pytest.raises(ValueError):
            DoorSegment((0.0, 0.0), (0.0, 0.0), (1.0, 0.0))

    def test_nested_grids(self):
        coarse = Grid(0.0, 0.0, 0.2, 5, 5)
        assert coarse.is_nested_in(Grid(0.0, 0.0, 0.1, 10, 10)) == 2
        assert coarse.is_nested_in(Grid(0.05, 0.0, 0.1, 10, 10)) == 0
        assert coarse.is_nested_in(Grid(0.0, 0.0, 0.15, 7, 7)) == 0

    def test_grid_invariants(self):
        with pytest.raises(ValueError):
            Grid(0, 0, 0.0, 3, 3)
        with pytest.raises(ValueError):
            Grid(0, 0, 0.1, 0, 3)
        assert math.isclose(Grid(0, 0, 0.1, 10, 20).y1, 2.0)
