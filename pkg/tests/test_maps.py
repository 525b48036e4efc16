import struct

import numpy as np
import pytest
from conftest import brute_boundary_distance, brute_raster, rotated_rect, square
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from PIL import Image

from diffbin.errors import DimensionError, FormatError, InvalidParameter, RangeError
from diffbin.geometry import Polygon, polygon_area
from diffbin.maps import (
    DISTANCE,
    BinaryMap,
    FloatMap,
    distance_band,
    fmap_bytes,
    fmap_parse,
    fmap_read,
    fmap_write,
    png_export,
    rasterize_polygon,
    to_gray8,
)


class TestContainers:
    def test_float_map_is_float32_and_frozen(self):
        m = FloatMap(np.full((2, 3), 0.25))
        assert m.data.dtype == np.dtype("<f4")
        assert m.shape == (2, 3) and (m.height, m.width) == (2, 3)
        with pytest.raises(ValueError):
            m.data[0, 0] = 1.0

    @pytest.mark.parametrize("bad", [np.full((2, 2), 1.5), np.full((2, 2), -0.1), np.full((2, 2), np.nan)])
    def test_probability_range(self, bad):
        with pytest.raises(RangeError):
            FloatMap(bad)

    def test_distance_role(self):
        assert FloatMap(np.full((2, 2), 7.0), DISTANCE).data.max() == 7.0
        with pytest.raises(RangeError):
            FloatMap(np.full((2, 2), -1.0), DISTANCE)
        with pytest.raises(InvalidParameter):
            FloatMap(np.zeros((2, 2)), "colour")

    @pytest.mark.parametrize("shape", [(0, 3), (3,), (2, 2, 2)])
    def test_bad_shapes(self, shape):
        with pytest.raises(DimensionError):
            FloatMap(np.zeros(shape))

    def test_equality(self):
        assert FloatMap.zeros(3, 4) == FloatMap(np.zeros((3, 4)))
        assert FloatMap.zeros(3, 4) != FloatMap.zeros(4, 3)
        assert BinaryMap(np.eye(3, dtype=bool)).count() == 3


class TestRasterize:
    def test_square_pixel_count(self):
        mask = rasterize_polygon([square(10, 10, 10)], 32, 32)
        assert mask.count() == 100
        np.testing.assert_array_equal(mask.data, brute_raster(square(10, 10, 10), 32, 32))

    def test_empty_list(self):
        assert rasterize_polygon([], 8, 8).count() == 0

    def test_full_canvas(self):
        assert rasterize_polygon([square(0, 0, 16)], 16, 16).count() == 256

    def test_overlaps_union(self):
        mask = rasterize_polygon([square(0, 0, 10), square(5, 5, 10)], 20, 20)
        assert mask.count() == 100 + 100 - 25

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_ray_casting_oracle(self, seed):
        rng = np.random.default_rng(seed)
        # Random star-shaped polygon, concave in general.
        angles = np.sort(rng.uniform(0, 2 * np.pi, 9))
        radii = rng.uniform(6, 18, 9)
        pts = np.column_stack([20 + radii * np.cos(angles), 20 + radii * np.sin(angles)])
        poly = Polygon(pts)
        np.testing.assert_array_equal(rasterize_polygon([poly], 40, 40).data, brute_raster(poly, 40, 40))

    def test_clipped_to_canvas(self):
        mask = rasterize_polygon([square(-5, -5, 10)], 10, 10)
        assert mask.count() == 25

    @given(
        st.integers(0, 30),
        st.integers(0, 30),
        st.floats(min_value=5, max_value=30),
        st.floats(min_value=5, max_value=30),
        st.floats(min_value=0, max_value=3.14),
    )
    def test_integer_translation_covariance(self, dx, dy, w, h, angle):
        poly = rotated_rect(20, 20, w, h, angle)
        base = rasterize_polygon([poly], 100, 100).data
        moved = rasterize_polygon([poly.translated(dx, dy)], 100, 100).data
        np.testing.assert_array_equal(moved[dy:, dx:], base[: 100 - dy, : 100 - dx])

    def test_convex_area_within_two_percent_typical(self):
        # Typical placements; adversarial sub-pixel offsets can reach ~1/w + 1/h.
        rng = np.random.default_rng(12)
        for _ in range(200):
            w, h = rng.uniform(50, 150, 2)
            poly = rotated_rect(*rng.uniform(110, 130, 2), w, h, rng.uniform(0, np.pi))
            count = rasterize_polygon([poly], 240, 240).count()
            assert abs(count - polygon_area(poly)) < 0.02 * polygon_area(poly)

    @settings(max_examples=60)
    @given(
        st.floats(min_value=5, max_value=150),
        st.floats(min_value=5, max_value=150),
        st.floats(min_value=0, max_value=3.14),
        st.floats(min_value=100, max_value=101),
        st.floats(min_value=100, max_value=101),
    )
    def test_lattice_point_bound(self, w, h, angle, cx, cy):
        # Nosarzewska: a convex region holds N lattice points with A - P/2 < N < A + P/2 + 1.
        poly = rotated_rect(cx, cy, w, h, angle)
        count = rasterize_polygon([poly], 240, 240).count()
        area, perim = w * h, 2 * (w + h)
        assert area - perim / 2 < count < area + perim / 2 + 1


class TestDistanceBand:
    poly = square(50, 50, 100)

    def test_brute_force_oracle(self):
        band = distance_band(self.poly, 21.0, 200, 200).data
        ring = [tuple(p) for p in self.poly.points]
        for i, j in [(100, 160), (100, 150), (30, 30), (60, 60), (100, 29), (45, 100)]:
            d = brute_boundary_distance(j + 0.5, i + 0.5, ring)
            expected = max(0.0, 1.0 - d / 21.0)
            assert band[i, j] == pytest.approx(expected, abs=1e-6), (i, j)

    def test_ten_and_a_half_outside(self):
        # Pixel (100, 160) has its center at x=160.5, 10.5 px right of the edge x=150.
        assert distance_band(self.poly, 21.0, 200, 200).data[100, 160] == 0.5

    def test_boundary_and_edge(self):
        on_edge = square(50.5, 50.5, 100)
        band = distance_band(on_edge, 21.0, 200, 200).data
        assert band[100, 50] == 1.0
        # Center x = 29.5 sits exactly 21 px outside the edge at 50.5.
        assert band[100, 29] == 0.0

    def test_values_in_unit_interval(self):
        band = distance_band(rotated_rect(100, 100, 80, 40, 0.4), 10.0, 200, 200).data
        assert band.min() >= 0.0 and band.max() <= 1.0

    def test_near_one_shrinks_to_boundary(self):
        band = distance_band(rotated_rect(100, 100, 80, 40, 0.4), 10.0, 200, 200).data
        counts = [np.count_nonzero(band >= 1 - eps) for eps in (0.5, 0.2, 0.05)]
        assert counts[0] > counts[1] > counts[2]

    def test_bad_d(self):
        with pytest.raises(InvalidParameter):
            distance_band(self.poly, 0.0, 10, 10)


class TestFmap:
    def test_layout(self):
        m = FloatMap(np.array([[0.0, 0.5, 1.0]]))
        blob = fmap_bytes(m)
        assert blob[:4] == b"FMAP"
        assert struct.unpack_from("<II", blob, 4) == (1, 3)
        assert struct.unpack_from("<3f", blob, 12) == (0.0, 0.5, 1.0)
        assert len(blob) == 12 + 12

    def test_round_trip(self, tmp_path):
        m = FloatMap(np.random.default_rng(0).random((7, 5)))
        path = tmp_path / "m.fmap"
        fmap_write(m, path)
        back = fmap_read(path)
        assert back == m
        assert back.data.tobytes() == m.data.tobytes()
        assert not (tmp_path / "m.fmap.tmp").exists()

    @settings(max_examples=50)
    @given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=2, max_dims=2, max_side=12), elements=st.floats(0, 1, width=32)))
    def test_round_trip_identity(self, arr):
        m = FloatMap(arr)
        assert fmap_parse(fmap_bytes(m)).data.tobytes() == m.data.tobytes()

    def test_bad_magic(self):
        blob = b"XXXX" + struct.pack("<II", 1, 1) + struct.pack("<f", 0.0)
        with pytest.raises(FormatError, match="magic"):
            fmap_parse(blob)

    def test_truncated(self):
        blob = b"FMAP" + struct.pack("<II", 3, 2) + struct.pack("<5f", *[0.0] * 5)
        with pytest.raises(FormatError, match="truncated"):
            fmap_parse(blob)

    @pytest.mark.parametrize(
        "blob",
        [
            b"FMA",
            b"FMAP" + struct.pack("<II", 0, 4),
            b"FMAP" + struct.pack("<II", 1 << 16, 1 << 16),
            b"FMAP" + struct.pack("<II", 1, 1) + struct.pack("<2f", 0.0, 0.0),
            b"FMAP" + struct.pack("<II", 1, 1) + struct.pack("<f", 2.0),
        ],
    )
    def test_malformed(self, blob):
        with pytest.raises(FormatError):
            fmap_parse(blob)

    def test_distance_role_accepts_large_values(self):
        blob = b"FMAP" + struct.pack("<II", 1, 1) + struct.pack("<f", 2.0)
        assert fmap_parse(blob, DISTANCE).data[0, 0] == 2.0


class TestPng:
    def test_gray_levels(self):
        m = FloatMap(np.array([[0.0, 0.5, 1.0]]))
        np.testing.assert_array_equal(to_gray8(m), [[0, 128, 255]])

    def test_export(self, tmp_path):
        path = tmp_path / "m.png"
        png_export(FloatMap.zeros(4, 6), path)
        img = Image.open(path)
        assert img.mode == "L" and img.size == (6, 4)
        assert np.asarray(img).max() == 0

    def test_out_of_range(self, tmp_path):
        with pytest.raises(RangeError):
            png_export(FloatMap(np.full((2, 2), 3.0), DISTANCE), tmp_path / "x.png")
