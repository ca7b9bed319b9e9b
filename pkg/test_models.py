"""
Test core raster and geometry types
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from models import (
    BBox, Image, MaskInstance, Trimap, TrimapLabel, bbox_of_mask, iou, mask_iou, rasterize_ellipse,
)


@st.composite
def boxes(draw, limit=64):
    x0 = draw(st.integers(0, limit - 1))
    y0 = draw(st.integers(0, limit - 1))
    x1 = draw(st.integers(x0 + 1, limit))
    y1 = draw(st.integers(y0 + 1, limit))
    return BBox(x0, y0, x1, y1)


def test_bbox_rejects_degenerate():
    with pytest.raises(ValueError):
        BBox(5, 5, 5, 9)
    with pytest.raises(ValueError):
        BBox(5, 9, 8, 2)


def test_iou_half_overlap_example():
    # a 10x10 box against itself shifted by 5 columns: 50 / 150
    assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)) == pytest.approx(1 / 3)


@given(boxes(), boxes())
def test_iou_symmetric_and_bounded(a, b):
    value = iou(a, b)
    assert value == iou(b, a)
    assert 0.0 <= value <= 1.0


@given(boxes())
def test_iou_with_itself_is_one(a):
    assert iou(a, a) == 1.0


def test_image_is_immutable():
    image = Image.from_array(np.zeros((4, 5, 3), dtype=np.uint8))
    assert (image.width, image.height) == (5, 4)
    with pytest.raises(ValueError):
        image.pixels[0, 0, 0] = 1


def test_image_rejects_wrong_pixel_count():
    with pytest.raises(ValueError):
        Image(3, 3, np.zeros(10, dtype=np.uint8))


def test_mask_score_range():
    with pytest.raises(ValueError):
        MaskInstance(2, 2, np.ones((2, 2), dtype=bool), score=1.5)


def test_bbox_of_mask():
    bits = np.zeros((10, 12), dtype=bool)
    bits[2:5, 3:9] = True
    bits[7, 1] = True
    box = bbox_of_mask(MaskInstance(12, 10, bits, class_id=4))
    assert box == BBox(1, 2, 9, 8, 4)


def test_bbox_of_empty_mask_is_none():
    assert bbox_of_mask(MaskInstance.empty(8, 8)) is None


def _brute_mask_iou(a, b):
    inter = union = 0
    for y in range(a.height):
        for x in range(a.width):
            inter += bool(a.bits[y, x] and b.bits[y, x])
            union += bool(a.bits[y, x] or b.bits[y, x])
    return inter / union if union else 0.0


def test_mask_iou_matches_pixel_count():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a = MaskInstance(16, 16, rng.random((16, 16)) < rng.random())
        b = MaskInstance(16, 16, rng.random((16, 16)) < rng.random())
        assert mask_iou(a, b) == _brute_mask_iou(a, b)


def test_mask_iou_dimension_mismatch():
    with pytest.raises(ValueError):
        mask_iou(MaskInstance.empty(4, 4), MaskInstance.empty(4, 5))


def test_mask_iou_both_empty_is_zero():
    assert mask_iou(MaskInstance.empty(4, 4), MaskInstance.empty(4, 4)) == 0.0


@given(boxes(limit=48))
def test_ellipse_is_tangent_to_its_box(box):
    mask = rasterize_ellipse(box, 48, 48)
    assert bbox_of_mask(mask) == box
    assert mask.bits.sum() <= box.area


def test_ellipse_area_close_to_continuous():
    mask = rasterize_ellipse(BBox(0, 0, 100, 100), 100, 100)
    assert abs(mask.area - np.pi * 2500) <= 0.02 * np.pi * 2500


def test_thin_ellipse_keeps_its_end_pixels():
    box = BBox(0, 0, 10, 2)
    mask = rasterize_ellipse(box, 10, 2)
    xs = np.arange(10) + 0.5
    ys = np.arange(2) + 0.5
    sampled = ((xs[None, :] - 5) / 5) ** 2 + ((ys[:, None] - 1) / 1) ** 2 <= 1
    # centre sampling alone drops the end columns
    assert not sampled[:, 0].any()
    assert mask.bits[:, 0].all() and mask.bits[:, 9].all()
    assert (mask.bits | sampled).sum() == mask.bits.sum()


def test_ellipse_outside_raster():
    with pytest.raises(ValueError):
        rasterize_ellipse(BBox(0, 0, 10, 10), 8, 8)


def test_trimap_relabel_keeps_definite_pixels():
    labels = np.array([[TrimapLabel.DEFINITE_BACKGROUND, TrimapLabel.PROBABLE_FOREGROUND],
                       [TrimapLabel.DEFINITE_FOREGROUND, TrimapLabel.PROBABLE_BACKGROUND]])
    trimap = Trimap(2, 2, labels)
    relabelled = trimap.relabel_probable(np.array([[True, False], [False, True]]))
    assert relabelled.labels.tolist() == [
        [TrimapLabel.DEFINITE_BACKGROUND, TrimapLabel.PROBABLE_BACKGROUND],
        [TrimapLabel.DEFINITE_FOREGROUND, TrimapLabel.PROBABLE_FOREGROUND],
    ]
    assert relabelled.foreground_side.tolist() == [[False, False], [True, True]]
