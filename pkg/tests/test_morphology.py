from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mothscan import (
    BinaryImage,
    InputError,
    StructuringElement,
    close_mask,
    connected_components,
    dilate,
    erode,
    open_mask,
)
from oracles import close_naive, dilate_naive, erode_naive, flood_components, open_naive

masks = hnp.arrays(dtype=bool, shape=st.tuples(st.integers(1, 16), st.integers(1, 16)))
elements = st.builds(
    StructuringElement,
    shape=st.sampled_from(["square", "disk"]),
    radius=st.integers(1, 3),
)


def _key(comps):
    return sorted(((b.y, b.x, b.w, b.h, a) for b, a in comps))


class TestStructuringElement:
    def test_square_offsets(self):
        se = StructuringElement("square", 1)
        assert sorted(se.offsets()) == [
            (dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)
        ]

    def test_disk_offsets_within_radius(self):
        se = StructuringElement("disk", 2)
        offs = se.offsets()
        assert (0, 0) in offs
        assert all(dy * dy + dx * dx <= 4 for dy, dx in offs)
        assert (2, 0) in offs and (1, 1) in offs and (2, 2) not in offs

    def test_validation(self):
        with pytest.raises(InputError):
            StructuringElement("square", 0)
        with pytest.raises(InputError):
            StructuringElement("hex", 1)


class TestMorphologyOracles:
    @given(mask=masks, se=elements)
    @settings(max_examples=80, deadline=None)
    def test_erode_matches_set_definition(self, mask, se):
        got = erode(BinaryImage(mask), se).mask
        np.testing.assert_array_equal(got, erode_naive(mask, se.offsets()))

    @given(mask=masks, se=elements)
    @settings(max_examples=80, deadline=None)
    def test_dilate_matches_set_definition(self, mask, se):
        got = dilate(BinaryImage(mask), se).mask
        np.testing.assert_array_equal(got, dilate_naive(mask, se.offsets()))

    @given(mask=masks, se=elements)
    @settings(max_examples=40, deadline=None)
    def test_open_close_compose(self, mask, se):
        np.testing.assert_array_equal(
            open_mask(BinaryImage(mask), se).mask, open_naive(mask, se.offsets())
        )
        np.testing.assert_array_equal(
            close_mask(BinaryImage(mask), se).mask, close_naive(mask, se.offsets())
        )


class TestMorphologyProperties:
    @given(mask=masks, se=elements)
    @settings(max_examples=60, deadline=None)
    def test_erosion_anti_extensive_dilation_extensive(self, mask, se):
        b = BinaryImage(mask)
        assert not (erode(b, se).mask & ~mask).any()
        assert not (mask & ~dilate(b, se).mask).any()

    @given(mask=masks, se=elements)
    @settings(max_examples=60, deadline=None)
    def test_open_close_idempotent(self, mask, se):
        b = BinaryImage(mask)
        once = open_mask(b, se)
        np.testing.assert_array_equal(open_mask(once, se).mask, once.mask)
        once = close_mask(b, se)
        np.testing.assert_array_equal(close_mask(once, se).mask, once.mask)

    def test_open_removes_isolated_pixel(self):
        mask = np.zeros((9, 9), dtype=bool)
        mask[4, 4] = True
        assert not open_mask(BinaryImage(mask), StructuringElement("square", 1)).mask.any()

    def test_close_fills_small_hole(self):
        mask = np.zeros((9, 9), dtype=bool)
        mask[2:7, 2:7] = True
        mask[4, 4] = False
        got = close_mask(BinaryImage(mask), StructuringElement("square", 1)).mask
        want = mask.copy()
        want[4, 4] = True
        np.testing.assert_array_equal(got, want)

    def test_erode_full_image_shrinks_from_borders(self):
        mask = np.ones((5, 7), dtype=bool)
        got = erode(BinaryImage(mask), StructuringElement("square", 1)).mask
        want = np.zeros((5, 7), dtype=bool)
        want[1:-1, 1:-1] = True  # outside the image counts as background
        np.testing.assert_array_equal(got, want)


class TestConnectedComponents:
    @given(mask=masks)
    @settings(max_examples=100, deadline=None)
    def test_matches_flood_fill(self, mask):
        got = connected_components(BinaryImage(mask))
        assert _key(got) == _key(flood_components(mask))

    def test_empty_mask(self):
        assert connected_components(BinaryImage(np.zeros((4, 4), dtype=bool))) == []

    def test_full_mask_single_component(self):
        comps = connected_components(BinaryImage(np.ones((3, 5), dtype=bool)))
        assert len(comps) == 1
        box, area = comps[0]
        assert (box.x, box.y, box.w, box.h, area) == (0, 0, 5, 3, 15)

    def test_diagonal_pixels_are_connected(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[0, 0] = mask[1, 1] = mask[2, 2] = True
        comps = connected_components(BinaryImage(mask))
        assert len(comps) == 1
        assert comps[0][1] == 3

    def test_two_separate_blobs_sorted_by_position(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[5:7, 1:3] = True
        mask[0:2, 4:7] = True
        comps = connected_components(BinaryImage(mask))
        assert [(b.y, b.x) for b, _ in comps] == [(0, 4), (5, 1)]
        assert [a for _, a in comps] == [6, 4]

    def test_single_pixel(self):
        mask = np.zeros((3, 3), dtype=bool)
        mask[2, 1] = True
        comps = connected_components(BinaryImage(mask))
        assert comps == [(type(comps[0][0])(1, 2, 1, 1), 1)]
