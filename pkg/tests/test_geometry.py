import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import (brute_force_hull_perimeter, brute_force_sed_radius,
                     largest_component_fraction, random_point_sets)
from swarm_aggregation.geometry import (
    Disc, cluster_fraction, compute_metrics, convex_hull_perimeter, dispersion,
    hex_packing, min_dispersion_baseline, smallest_enclosing_disc)

coords = st.floats(min_value=-100, max_value=100, allow_nan=False, allow_infinity=False)
point_lists = st.lists(st.tuples(coords, coords), min_size=2, max_size=12)


class TestSmallestEnclosingDisc:
    def test_single_point(self):
        assert smallest_enclosing_disc([(0, 0)]) == Disc((0.0, 0.0), 0.0)

    def test_antipodal_pair(self):
        d = smallest_enclosing_disc([(0, 0), (4, 0)])
        assert d.center == (2.0, 0.0)
        assert d.radius == 2.0
        assert d.circumference == pytest.approx(4 * math.pi)

    def test_empty_raises(self):
        with pytest.raises(ValueError, match="empty point set"):
            smallest_enclosing_disc([])

    def test_nonfinite_raises(self):
        with pytest.raises(ValueError):
            smallest_enclosing_disc([(0, 0), (math.nan, 1)])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        for pts in random_point_sets(rng, 200, 12):
            got = smallest_enclosing_disc(pts, rng).radius
            assert got == pytest.approx(brute_force_sed_radius(pts), abs=1e-9)

    @settings(max_examples=150, deadline=None)
    @given(point_lists)
    def test_contains_all_and_two_on_boundary(self, pts):
        d = smallest_enclosing_disc(pts)
        dist = [math.dist(d.center, p) for p in pts]
        assert max(dist) <= d.radius + 1e-9
        if len(set(pts)) >= 2:
            on_boundary = sum(abs(x - d.radius) <= 1e-9 * max(1.0, d.radius) for x in dist)
            assert on_boundary >= 2

    @settings(max_examples=100, deadline=None)
    @given(point_lists, st.floats(0, 2 * math.pi), coords, coords)
    def test_rigid_motion_invariance(self, pts, angle, tx, ty):
        rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        moved = np.asarray(pts) @ rot.T + (tx, ty)
        r0 = smallest_enclosing_disc(pts).radius
        r1 = smallest_enclosing_disc(moved).radius
        assert r1 == pytest.approx(r0, rel=1e-9, abs=1e-9)


class TestConvexHullPerimeter:
    def test_unit_square(self):
        assert convex_hull_perimeter([(0, 0), (1, 0), (1, 1), (0, 1)]) == pytest.approx(4.0)

    def test_collinear_out_and_back(self):
        assert convex_hull_perimeter([(0, 0), (1, 0), (3, 0)]) == pytest.approx(6.0)

    def test_single_point(self):
        assert convex_hull_perimeter([(3, 4)]) == 0.0

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            convex_hull_perimeter([])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(12)
        for pts in random_point_sets(rng, 200, 10):
            assert convex_hull_perimeter(pts) == pytest.approx(
                brute_force_hull_perimeter(pts), abs=1e-9)

    @settings(max_examples=150, deadline=None)
    @given(point_lists)
    def test_not_longer_than_enclosing_circle(self, pts):
        assert convex_hull_perimeter(pts) <= smallest_enclosing_disc(pts).circumference + 1e-9


class TestDispersion:
    def test_coincident(self):
        assert dispersion([(1, 1)] * 5) == 0.0

    def test_pair(self):
        assert dispersion([(0, 0), (2, 0)]) == 2.0

    def test_equilateral_triangle(self):
        tri = [(math.cos(a), math.sin(a)) for a in (0, 2 * math.pi / 3, 4 * math.pi / 3)]
        assert dispersion(tri) == pytest.approx(3.0)

    def test_is_sum_of_distances_not_squares(self):
        # sum of squared distances would be 8
        assert dispersion([(-2, 0), (2, 0), (0, 0)]) == pytest.approx(4.0)

    @settings(max_examples=100, deadline=None)
    @given(point_lists, coords, coords, st.floats(0.1, 10))
    def test_translation_and_scaling(self, pts, tx, ty, k):
        base = dispersion(pts)
        assert dispersion(np.asarray(pts) + (tx, ty)) == pytest.approx(base, rel=1e-9, abs=1e-7)
        assert dispersion(k * np.asarray(pts)) == pytest.approx(k * base, rel=1e-9, abs=1e-7)


class TestClusterFraction:
    def test_two_touching_one_far(self):
        assert cluster_fraction([(0, 0), (2, 0), (50, 0)], 1.0) == pytest.approx(2 / 3)

    def test_all_far(self):
        pts = [(10 * i, 0) for i in range(6)]
        assert cluster_fraction(pts, 1.0) == pytest.approx(1 / 6)

    @pytest.mark.parametrize("k,n", [(1, 5), (3, 8), (7, 7), (4, 12)])
    def test_chain_plus_isolated(self, k, n):
        r = 1.5
        pts = [(2 * r * i, 0.0) for i in range(k)] + [(1000.0 + 100 * i, 77.0) for i in range(n - k)]
        edges = [(i, i + 1) for i in range(k - 1)]
        assert cluster_fraction(pts, r, 0.0) == pytest.approx(largest_component_fraction(n, edges))
        assert cluster_fraction(pts, r, 0.0) == pytest.approx(k / n)

    def test_default_tolerance_is_tenth_radius(self):
        assert cluster_fraction([(0, 0), (2.09, 0)], 1.0) == 1.0
        assert cluster_fraction([(0, 0), (2.11, 0)], 1.0) == 0.5

    def test_bad_radius(self):
        with pytest.raises(ValueError):
            cluster_fraction([(0, 0)], 0.0)

    @settings(max_examples=100, deadline=None)
    @given(point_lists, st.floats(0, 5), st.floats(0, 5))
    def test_monotone_in_tolerance(self, pts, t1, t2):
        lo, hi = sorted((t1, t2))
        assert cluster_fraction(pts, 2.0, lo) <= cluster_fraction(pts, 2.0, hi)

    def test_matches_graph_oracle_on_random_sets(self):
        rng = np.random.default_rng(5)
        for pts in random_point_sets(rng, 100, 12, scale=6.0):
            n = len(pts)
            edges = [(i, j) for i in range(n) for j in range(i + 1, n)
                     if math.dist(pts[i], pts[j]) <= 2.2]
            assert cluster_fraction(pts, 1.0, 0.2) == pytest.approx(largest_component_fraction(n, edges))


class TestBaseline:
    def test_single(self):
        assert min_dispersion_baseline(1, 7.4) == 0.0

    @pytest.mark.parametrize("s", [1.0, 2.0, 7.4])
    def test_full_first_ring(self, s):
        assert min_dispersion_baseline(7, s) == pytest.approx(6 * s)

    def test_three_is_touching_triangle(self):
        assert min_dispersion_baseline(3, 2.0) == pytest.approx(2 * math.sqrt(3))

    def test_n100_regression(self):
        assert min_dispersion_baseline(100, 1.0) == pytest.approx(350.46698455723583, rel=1e-12)
        assert min_dispersion_baseline(100, 7.4) == pytest.approx(7.4 * 350.46698455723583, rel=1e-12)

    def test_packing_sites_are_distinct_lattice_points(self):
        sites = hex_packing(40, 1.0)
        d = np.hypot(*(sites[:, None] - sites[None]).transpose(2, 0, 1))
        np.fill_diagonal(d, np.inf)
        assert d.min() == pytest.approx(1.0)


def test_compute_metrics_fields():
    m = compute_metrics([(0, 0), (2, 0)], 1.0, time=3.5)
    assert m.time == 3.5
    assert m.sed_circumference == pytest.approx(2 * math.pi)
    assert m.hull_perimeter == pytest.approx(4.0)
    assert m.dispersion == pytest.approx(2.0)
    assert m.cluster_fraction == 1.0
