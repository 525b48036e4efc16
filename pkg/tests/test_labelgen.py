import warnings

import numpy as np
import pytest
from conftest import brute_boundary_distance, brute_raster, rect, rotated_rect, square
from hypothesis import given, settings
from hypothesis import strategies as st

from diffbin.errors import DegenerateGeometry, FormatError, InvalidParameter
from diffbin.geometry import Polygon
from diffbin.labelgen import (
    Annotation,
    LabelSet,
    LabelWarning,
    format_annotation,
    gen_prob_label,
    gen_thresh_label,
    gen_train_mask,
    generate_labels,
    parse_annotation_line,
    parse_annotations,
    read_annotations,
)
from diffbin.maps import BinaryMap, FloatMap


def ann(poly, ignore=False):
    return Annotation(poly, ignore=ignore)


class TestProbLabel:
    def test_shrunk_square(self):
        label = gen_prob_label([ann(square(50, 50, 100))], 200, 200, 0.4)
        # D = 21 so the kernel is the 58 px square [71, 129) in both axes.
        assert label.count() == 3364
        expected = np.zeros((200, 200), dtype=bool)
        expected[71:129, 71:129] = True
        np.testing.assert_array_equal(label.data, expected)

    def test_empty(self):
        assert gen_prob_label([], 20, 20).count() == 0

    def test_ignored_only(self):
        assert gen_prob_label([ann(square(2, 2, 15), ignore=True)], 20, 20).count() == 0

    def test_overlapping_union(self):
        a, b = square(10, 10, 50), square(40, 10, 50)
        both = gen_prob_label([ann(a), ann(b)], 80, 120).data
        np.testing.assert_array_equal(both, gen_prob_label([ann(a)], 80, 120).data | gen_prob_label([ann(b)], 80, 120).data)

    def test_r_near_one_covers_footprint(self):
        poly = rotated_rect(50, 50, 60, 30, 0.3)
        kernel = gen_prob_label([ann(poly)], 100, 100, r=0.9999).data
        full = brute_raster(poly, 100, 100)
        assert np.count_nonzero(kernel ^ full) <= 0.01 * full.sum()

    def test_bad_r(self):
        with pytest.raises(InvalidParameter):
            gen_prob_label([ann(square(0, 0, 10))], 10, 10, r=1.0)

    def test_tiny_polygon_vanishes_silently(self):
        assert gen_prob_label([ann(square(3, 3, 0.5))], 10, 10).count() == 0


class TestThreshLabel:
    def test_values_match_brute_force(self):
        poly = rotated_rect(60, 55, 70, 40, 0.35)
        D = 2800 * 0.84 / 220
        label, band = gen_thresh_label([ann(poly)], 120, 120)
        ring = [tuple(p) for p in poly.points]
        rows, cols = np.nonzero(band.data)
        for i, j in list(zip(rows, cols))[::37]:
            d = brute_boundary_distance(j + 0.5, i + 0.5, ring)
            expected = 0.3 + 0.4 * max(0.0, 1.0 - d / D)
            assert label.data[i, j] == pytest.approx(expected, abs=1e-6)

    def test_border_and_band_edge(self):
        poly = square(50.5, 50.5, 100)
        label, band = gen_thresh_label([ann(poly)], 200, 200)
        # Column 50 has its center on the left edge; column 29 sits exactly D = 21 outside.
        assert label.data[100, 50] == pytest.approx(0.7)
        assert band.data[100, 29] and label.data[100, 29] == pytest.approx(0.3)
        assert label.data[100, 28] == 0.0 and not band.data[100, 28]

    def test_outside_every_band(self):
        label, band = gen_thresh_label([ann(square(50, 50, 100))], 200, 200)
        assert label.data[0, 0] == 0.0 and not band.data[0, 0]
        assert label.data[100, 100] == 0.0 and not band.data[100, 100]

    def test_overlapping_bands_take_max(self):
        a, b = square(20, 20, 60), square(70, 20, 60)
        la, _ = gen_thresh_label([ann(a)], 100, 160)
        lb, _ = gen_thresh_label([ann(b)], 100, 160)
        both, _ = gen_thresh_label([ann(a), ann(b)], 100, 160)
        np.testing.assert_array_equal(both.data, np.maximum(la.data, lb.data))

    def test_custom_range(self):
        label, band = gen_thresh_label([ann(square(50.5, 50.5, 100))], 200, 200, t_min=0.1, t_max=0.9)
        assert label.data[band.data].min() == pytest.approx(0.1)
        assert label.data[band.data].max() == pytest.approx(0.9)

    @pytest.mark.parametrize("lo,hi", [(0.7, 0.3), (-0.1, 0.5), (0.2, 1.2), (0.5, 0.5)])
    def test_bad_range(self, lo, hi):
        with pytest.raises(InvalidParameter):
            gen_thresh_label([], 10, 10, t_min=lo, t_max=hi)

    def test_ignored_has_no_band(self):
        label, band = gen_thresh_label([ann(square(50, 50, 100), ignore=True)], 200, 200)
        assert band.count() == 0 and label.data.max() == 0.0


class TestTrainMask:
    def test_no_ignored(self):
        assert gen_train_mask([ann(square(5, 5, 10))], 20, 20).count() == 400

    def test_ignored_everything(self):
        assert gen_train_mask([ann(square(0, 0, 20), ignore=True)], 20, 20).count() == 0

    def test_half_canvas(self):
        mask = gen_train_mask([ann(rect(0, 0, 100, 200), ignore=True)], 200, 200).data
        assert np.count_nonzero(~mask) == 100 * 200
        assert not mask[:, :100].any() and mask[:, 100:].all()


@st.composite
def scenes(draw):
    w = draw(st.floats(min_value=20, max_value=80))
    h = draw(st.floats(min_value=20, max_value=80))
    angle = draw(st.floats(min_value=0, max_value=3.14))
    return rotated_rect(60, 60, w, h, angle)


class TestLabelSetProperties:
    @settings(max_examples=25, deadline=None)
    @given(scenes())
    def test_invariants(self, poly):
        labels = generate_labels([ann(poly)], 120, 120)
        prob, band = labels.prob_label.data, labels.band_mask.data
        thresh = labels.thresh_label.data
        assert not (prob & band).any()
        assert band[thresh > 0].all()
        vals = thresh[band]
        assert vals.min() >= 0.3 - 1e-6 and vals.max() <= 0.7 + 1e-6
        # Kernel of a convex polygon lies inside its footprint.
        assert not (prob & ~brute_raster(poly, 120, 120)).any()
        # t_max only within one pixel of the boundary.
        ring = [tuple(p) for p in poly.points]
        for i, j in zip(*np.nonzero(thresh >= 0.7 - 1e-6)):
            assert brute_boundary_distance(j + 0.5, i + 0.5, ring) < 1.0

    def test_shapes_must_agree(self):
        with pytest.raises(InvalidParameter):
            LabelSet(
                BinaryMap(np.zeros((2, 2), bool)),
                FloatMap.zeros(2, 3),
                BinaryMap(np.zeros((2, 2), bool)),
                BinaryMap(np.zeros((2, 2), bool)),
            )


class TestAnnotation:
    def test_coerces_sequences(self):
        a = Annotation([(0, 0), (10, 0), (10, 10)])
        assert isinstance(a.polygon, Polygon)

    def test_self_intersecting_rejected(self):
        with pytest.raises(DegenerateGeometry):
            Annotation([(0, 0), (10, 10), (10, 0), (0, 20)])


class TestParsing:
    def test_line(self):
        a = parse_annotation_line("0,0,10,0,10,10,0,10,hello")
        assert a.text == "hello" and not a.ignore
        np.testing.assert_array_equal(a.polygon.bounds, (0, 0, 10, 10))

    def test_ignore_marker(self):
        assert parse_annotation_line("0,0,10,0,10,10,###").ignore

    def test_decimals(self):
        a = parse_annotation_line("0.5,0.5,10.25,0.5,10.25,10,text")
        assert a.polygon.bounds == (0.5, 0.5, 10.25, 10.0)

    @pytest.mark.parametrize(
        "line,msg",
        [
            ("0,0,10,0,10,word", "odd"),
            ("0,0,10,0,text", "at least 3"),
            ("0,0,ten,0,10,10,text", "non-numeric"),
            ("justtext", "transcription"),
        ],
    )
    def test_format_errors_name_line(self, line, msg):
        with pytest.raises(FormatError, match=f"line 7: .*{msg}"):
            parse_annotation_line(line, 7)

    def test_degenerate_line(self):
        with pytest.raises(DegenerateGeometry, match="line 3"):
            parse_annotation_line("0,0,5,5,10,10,text", 3)

    def test_file_skips_degenerate_with_warning(self):
        text = "0,0,10,0,10,10,a\n\n0,0,5,5,10,10,b\n0,0,20,0,20,20,###\n"
        with pytest.warns(LabelWarning, match="line 3"):
            annots = parse_annotations(text)
        assert [a.text for a in annots] == ["a", "###"]

    def test_file_syntax_error_raises(self):
        with pytest.raises(FormatError, match="line 2"):
            parse_annotations("0,0,10,0,10,10,a\n0,0,10,x\n")

    def test_read_with_bom(self, tmp_path):
        path = tmp_path / "gt.txt"
        path.write_bytes("﻿0,0,10,0,10,10,é\n".encode("utf-8"))
        (a,) = read_annotations(path)
        assert a.text == "é"

    def test_format_round_trip(self):
        a = parse_annotation_line("1.25,2,30,2,30,40.5,1.25,40.5,word")
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            back = parse_annotation_line(format_annotation(a))
        assert back == a
