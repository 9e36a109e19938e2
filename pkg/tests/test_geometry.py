"""Tests for deviation geometry and the separation repair."""

import math

import numpy as np
import pytest

from borefield_uq import geometry as geo
from borefield_uq.exceptions import UnrepairableGeometryError


class TestLayout:
    def test_grid_spanning(self):
        lay = geo.grid_layout(3, 3, 20.0, 81.0, direction_deg=40.0)
        assert lay.n_boreholes == 9
        xs = sorted({c[0] for c in lay.collars.tolist()})
        assert xs == [-10.0, 0.0, 10.0]
        assert lay.length == 81.0
        assert np.allclose(lay.ref_direction,
                           [math.cos(math.radians(40)), math.sin(math.radians(40))])

    def test_direction_normalized(self):
        lay = geo.ArrayLayout(collars=[[0, 0], [5, 0]], ref_direction=[3.0, 4.0], length=10.0)
        assert np.allclose(lay.ref_direction, [0.6, 0.8])

    def test_validation(self):
        with pytest.raises(ValueError, match="coincide"):
            geo.ArrayLayout(collars=[[1, 1], [1, 1]], ref_direction=[1, 0], length=10.0)
        with pytest.raises(ValueError, match="nonzero"):
            geo.ArrayLayout(collars=[[0, 0]], ref_direction=[0, 0], length=10.0)
        with pytest.raises(ValueError, match="positive"):
            geo.ArrayLayout(collars=[[0, 0]], ref_direction=[1, 0], length=0.0)


class TestDeviationParams:
    def test_vector_round_trip(self):
        y = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        p = geo.DeviationParams.from_vector(y, 3)
        assert p.azimuth_deg.tolist() == [1.0, 2.0, 3.0]
        assert p.inclination_deg.tolist() == [4.0, 5.0, 6.0]

    def test_inclination_bounds(self):
        with pytest.raises(ValueError):
            geo.DeviationParams([0.0], [-1.0])
        with pytest.raises(ValueError):
            geo.DeviationParams([0.0], [90.0])


class TestRealize:
    def test_vertical(self):
        lay = geo.grid_layout(2, 2, 10.0, 81.0)
        segs = geo.realize_geometry(lay, geo.DeviationParams(np.zeros(4), np.zeros(4)))
        for s, c in zip(segs, lay.collars):
            assert np.allclose(s.top, [c[0], c[1], 0.0])
            assert np.allclose(s.bottom, [c[0], c[1], -81.0])
            assert s.length == pytest.approx(81.0)

    def test_inclined_offset(self):
        # 6 degrees of tilt over 81 m drifts the bottom 8.4668 m sideways
        lay = geo.grid_layout(1, 1, 0.0, 81.0, direction_deg=40.0)
        segs = geo.realize_geometry(lay, geo.DeviationParams([0.0], [6.0]))
        off = segs[0].bottom[:2] - segs[0].top[:2]
        assert np.linalg.norm(off) == pytest.approx(81.0 * math.sin(math.radians(6)), abs=1e-12)
        assert np.linalg.norm(off) == pytest.approx(8.4668, abs=1e-3)
        assert np.allclose(off / np.linalg.norm(off), lay.ref_direction)
        assert segs[0].bottom[2] == pytest.approx(-81.0 * math.cos(math.radians(6)))
        assert segs[0].length == pytest.approx(81.0)

    def test_azimuth_rotates_clockwise(self):
        lay = geo.ArrayLayout(collars=[[0.0, 0.0]], ref_direction=[0.0, 1.0], length=10.0)
        segs = geo.realize_geometry(lay, geo.DeviationParams([90.0], [30.0]))
        off = segs[0].bottom[:2]
        # north reference turned 90 degrees clockwise points east
        assert np.allclose(off, [10.0 * math.sin(math.radians(30)), 0.0], atol=1e-12)

    def test_length_preserved_for_any_angles(self):
        rng = np.random.default_rng(1)
        lay = geo.grid_layout(2, 1, 8.0, 50.0)
        for _ in range(50):
            p = geo.DeviationParams(rng.uniform(-180, 180, 2), rng.uniform(0, 45, 2))
            for s in geo.realize_geometry(lay, p):
                assert s.length == pytest.approx(50.0, rel=1e-12)

    def test_count_mismatch(self):
        lay = geo.grid_layout(2, 2, 10.0, 81.0)
        with pytest.raises(ValueError):
            geo.realize_geometry(lay, geo.DeviationParams([0.0], [0.0]))


class TestSegmentDistance:
    def test_parallel_vertical(self):
        a = geo.BoreholeSegment(top=[0, 0, 0], bottom=[0, 0, -10])
        b = geo.BoreholeSegment(top=[5, 0, 0], bottom=[5, 0, -10])
        assert geo.segment_min_distance(a, b) == pytest.approx(5.0, abs=1e-12)

    def test_identical(self):
        a = geo.BoreholeSegment(top=[0, 0, 0], bottom=[0, 0, -10])
        assert geo.segment_min_distance(a, a) == 0.0

    def test_skew(self):
        a = geo.BoreholeSegment(top=[0, 0, 0], bottom=[0, 0, -10])
        c = geo.BoreholeSegment(top=[3, -5, -5], bottom=[3, 5, -5])
        assert geo.segment_min_distance(a, c) == pytest.approx(3.0, abs=1e-12)

    def test_closest_at_endpoints(self):
        d = geo.BoreholeSegment(top=[0, 0, 1], bottom=[0, 0, 11])
        e = geo.BoreholeSegment(top=[0, 4, 1], bottom=[0, 9, 1])
        assert geo.segment_min_distance(d, e) == pytest.approx(4.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            pts = rng.uniform(-10, 10, (4, 3))
            a = geo.BoreholeSegment(top=pts[0], bottom=pts[1])
            b = geo.BoreholeSegment(top=pts[2], bottom=pts[3])
            assert geo.segment_min_distance(a, b) == pytest.approx(
                geo.segment_min_distance(b, a), abs=1e-12)

    def test_against_sampling_oracle(self):
        rng = np.random.default_rng(0)
        ts = np.linspace(0.0, 1.0, 401)
        for _ in range(200):
            pts = rng.uniform(-10, 10, (4, 3))
            a = geo.BoreholeSegment(top=pts[0], bottom=pts[1])
            b = geo.BoreholeSegment(top=pts[2], bottom=pts[3])
            closed = geo.segment_min_distance(a, b)
            p = a.top[None, :] + ts[:, None] * (a.bottom - a.top)[None, :]
            q = b.top[None, :] + ts[:, None] * (b.bottom - b.top)[None, :]
            sampled = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=2).min()
            assert closed <= sampled + 1e-9
            assert sampled - closed < 5e-3


class TestCorrection:
    LAY = geo.ArrayLayout(collars=[[0, 0], [2, 0]], ref_direction=[1, 0], length=50.0)

    def test_identity_when_clear(self):
        p = geo.DeviationParams([0.0, 0.0], [5.0, 5.0])
        segs, p2, report = geo.correct_geometry(self.LAY, p, 0.5)
        assert report == []
        assert (p2.azimuth_deg == p.azimuth_deg).all()
        ref = geo.realize_geometry(self.LAY, p)
        for a, b in zip(segs, ref):
            assert (a.top == b.top).all() and (a.bottom == b.bottom).all()

    def test_crossing_pair_repaired(self):
        # the two boreholes tilt straight at each other; the second one
        # owns the conflict and rotates by the smallest viable change
        p = geo.DeviationParams([0.0, 180.0], [10.0, 10.0])
        assert geo.min_pairwise_distance(geo.realize_geometry(self.LAY, p))[0] < 0.01
        segs, p2, report = geo.correct_geometry(self.LAY, p, 0.5)
        assert geo.min_pairwise_distance(segs)[0] >= 0.5
        assert len(report) == 1
        assert report[0].borehole == 1
        assert abs(report[0].change_deg) == 29.0
        # the first borehole did not move
        assert p2.azimuth_deg[0] == 0.0

    def test_vertical_defers_to_inclined(self):
        p = geo.DeviationParams([0.0, 180.0], [0.0, 2.3])
        segs, p2, report = geo.correct_geometry(self.LAY, p, 0.5)
        assert geo.min_pairwise_distance(segs)[0] >= 0.5
        assert [r.borehole for r in report] == [1]
        # the vertical borehole did not move
        assert p2.azimuth_deg[0] == 0.0

    def test_two_verticals_unrepairable(self):
        lay = geo.ArrayLayout(collars=[[0, 0], [0.3, 0]], ref_direction=[1, 0], length=50.0)
        with pytest.raises(UnrepairableGeometryError):
            geo.correct_geometry(lay, geo.DeviationParams([0, 0], [0, 0]), 0.5)

    def test_near_vertical_not_forced_to_escape(self):
        # a barely inclined path (bottom circle ~0.12 m) cannot rotate
        # clear of a deep intruder; the intruder owns the pair and
        # moves instead
        lay = geo.grid_layout(2, 2, 12.0, 81.0)
        p = geo.DeviationParams([-69.86, 28.52, -116.36, 128.38],
                                [10.422, 0.083, 0.694, 12.248])
        segs, p2, report = geo.correct_geometry(lay, p, 0.5)
        assert geo.min_pairwise_distance(segs)[0] >= 0.5
        assert p2.azimuth_deg[1] == p.azimuth_deg[1]
        assert [r.borehole for r in report] == [3]

    def test_collars_and_inclinations_never_move(self):
        rng = np.random.default_rng(7)
        lay = geo.grid_layout(2, 2, 4.0, 81.0)
        for _ in range(100):
            p = geo.DeviationParams(rng.uniform(-90, 90, 4), rng.uniform(0, 18, 4))
            try:
                segs, p2, report = geo.correct_geometry(lay, p, 0.5)
            except UnrepairableGeometryError:
                continue
            assert (p2.inclination_deg == p.inclination_deg).all()
            for s, c in zip(segs, lay.collars):
                assert (s.top[:2] == c).all()
            assert geo.min_pairwise_distance(segs)[0] >= 0.5

    def test_separation_fuzz(self):
        # dense tight layout with large inclinations: every outcome is
        # either a viable geometry or an explicit failure
        rng = np.random.default_rng(42)
        lay = geo.grid_layout(3, 3, 8.0, 81.0)
        repaired = 0
        for _ in range(200):
            p = geo.DeviationParams(rng.uniform(-90, 90, 9), rng.uniform(0, 18, 9))
            try:
                segs, _, report = geo.correct_geometry(lay, p, 0.5)
            except UnrepairableGeometryError:
                continue
            assert geo.min_pairwise_distance(segs)[0] >= 0.5
            repaired += len(report)
        assert repaired > 0  # the scenario does produce conflicts

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        lay = geo.grid_layout(2, 2, 4.0, 81.0)
        p = geo.DeviationParams(rng.uniform(-90, 90, 4), rng.uniform(12, 18, 4))
        a = geo.correct_geometry(lay, p, 0.5)
        b = geo.correct_geometry(lay, p, 0.5)
        assert (a[1].azimuth_deg == b[1].azimuth_deg).all()
        assert [r.borehole for r in a[2]] == [r.borehole for r in b[2]]
