"""
Test box-seeded GrabCut on rendered shapes
"""

import time

import numpy as np
import pytest

from conftest import make_scene
from models import BBox, Image, MaskInstance, TrimapLabel, mask_iou
from services.grabcut import GrabCutConfig, generate_pseudo_masks, run, seed_trimap


def _recovery_cases():
    rng = np.random.default_rng(99)
    cases = []
    for i in range(20):
        w, h = (int(v) for v in rng.integers(36, 80, size=2))
        x0 = int(rng.integers(8, 128 - 8 - w))
        y0 = int(rng.integers(8, 128 - 8 - h))
        kind = 'ellipse' if i % 2 == 0 else 'rectangle'
        noise = 0.0 if i % 4 < 2 else 4.0
        cases.append((BBox(x0, y0, x0 + w, y0 + h), kind, noise, i))
    return cases


RECOVERY_CASES = _recovery_cases()


@pytest.mark.parametrize('box, kind, noise, seed', RECOVERY_CASES)
def test_recovers_shape_from_tight_box(box, kind, noise, seed):
    image, gt = make_scene(box, kind=kind, seed=seed, noise=noise)
    started = time.perf_counter()
    result = run(image, box, GrabCutConfig(seed=seed))
    assert time.perf_counter() - started < 5.0
    assert mask_iou(result.mask, gt) >= 0.95
    trace = result.energy_trace
    assert len(trace) == result.iterations_run >= 1
    assert all(later <= earlier + 1e-6 for earlier, later in zip(trace, trace[1:]))


def test_red_disk_on_blue_from_dilated_box():
    ys, xs = np.mgrid[0:128, 0:128] + 0.5
    disk = (xs - 64) ** 2 + (ys - 64) ** 2 <= 20 ** 2
    pixels = np.zeros((128, 128, 3), dtype=np.uint8)
    pixels[..., 2] = 255
    pixels[disk] = (255, 0, 0)
    image = Image.from_array(pixels)
    # disk box is (44, 44, 84, 84), dilated by 4 px
    result = run(image, BBox(40, 40, 88, 88))
    assert mask_iou(result.mask, MaskInstance(128, 128, disk)) >= 0.95
    trace = result.energy_trace
    assert all(later <= earlier + 1e-6 for earlier, later in zip(trace, trace[1:]))


def test_mask_stays_inside_box(disk_scene):
    image, _, box = disk_scene
    mask = run(image, box).mask
    outside = np.ones_like(mask.bits)
    outside[box.y_min:box.y_max, box.x_min:box.x_max] = False
    assert not mask.bits[outside].any()
    assert mask.class_id == box.class_id


def test_deterministic_under_seed(disk_scene):
    image, _, box = disk_scene
    config = GrabCutConfig(k=3, seed=5)
    first, second = run(image, box, config), run(image, box, config)
    assert first.mask == second.mask
    assert first.energy_trace == second.energy_trace


def test_constant_image_terminates():
    image = Image.from_array(np.full((40, 40, 3), 128, dtype=np.uint8))
    result = run(image, BBox(10, 10, 30, 30), GrabCutConfig(max_iters=5))
    assert 1 <= result.iterations_run <= 5
    assert isinstance(result.mask, MaskInstance)


def test_full_image_box_returns_box():
    image = Image.from_array(np.zeros((16, 16, 3), dtype=np.uint8))
    result = run(image, BBox(0, 0, 16, 16))
    assert result.mask.bits.all()
    assert result.iterations_run == 0
    assert result.energy_trace == ()


def test_seed_trimap_labels():
    trimap = seed_trimap(BBox(2, 1, 5, 3), 6, 4)
    assert (trimap.labels == TrimapLabel.PROBABLE_FOREGROUND).sum() == 6
    assert (trimap.labels == TrimapLabel.DEFINITE_BACKGROUND).sum() == 18
    with pytest.raises(ValueError):
        seed_trimap(BBox(2, 1, 7, 3), 6, 4)


def test_config_validation():
    with pytest.raises(ValueError):
        GrabCutConfig(k=0)
    with pytest.raises(ValueError):
        GrabCutConfig(max_iters=0)


def test_generate_pseudo_masks_one_per_box(disk_scene):
    image, _, box = disk_scene
    masks = generate_pseudo_masks(image, [box, BBox(0, 0, 20, 20, 7)], GrabCutConfig(max_iters=2))
    assert [m.class_id for m in masks] == [box.class_id, 7]
