"""
Test manifest parsing, mask persistence, overlays and the synthetic corpus
"""

import json

import numpy as np
import pytest

from manifest_parser import VOC_CATEGORIES, ManifestError, ManifestParser, load_manifest, save_manifest
from mask_store import (
    MaskStoreError, instance_color, list_stems, load_masks, read_image, read_mask, render_overlay,
    save_masks, write_image,
)
from models import BBox, Image, MaskInstance, bbox_of_mask, rasterize_ellipse
from synthetic_corpus import build_corpus


def _entry(**overrides):
    entry = {
        'path': 'img/a.ppm', 'width': 20, 'height': 10,
        'instances': [{'box': [1, 1, 5, 5], 'class': 2}],
        'detections': [{'box': [0, 0, 4, 4], 'class': 1, 'score': 0.5}],
    }
    entry.update(overrides)
    return entry


def _parse(*entries):
    return ManifestParser(check_files=False).parse({'images': list(entries)}, '.')


def test_parse_valid_manifest():
    manifest = _parse(_entry())
    record = manifest.records[0]
    assert manifest.categories == VOC_CATEGORIES
    assert record.instances == (BBox(1, 1, 5, 5, 2),)
    assert record.detections[0].score == 0.5
    assert record.stem == 'a'


# (entry overrides, field named in the error)
INVALID_ENTRIES = [
    ({'path': ''}, 'path'),
    ({'width': 0}, 'width'),
    ({'height': 'ten'}, 'height'),
    ({'instances': [{'box': [1, 1, 1, 5], 'class': 2}]}, 'instances[0].box'),
    ({'instances': [{'box': [1, 1, 25, 5], 'class': 2}]}, 'instances[0].box'),
    ({'instances': [{'box': [1, 1, 5], 'class': 2}]}, 'instances[0].box'),
    ({'instances': [{'box': [1, 1, 5, 5], 'class': 20}]}, 'instances[0].class'),
    ({'detections': [{'box': [0, 0, 4, 4], 'class': 1, 'score': 1.5}]}, 'detections[0].score'),
    ({'instances': [{'box': [1, 1, 5, 5], 'class': 2, 'mask': 7}]}, 'instances[0].mask'),
]


@pytest.mark.parametrize('overrides, field', INVALID_ENTRIES)
def test_parse_rejects_invalid_records(overrides, field):
    bad = _entry(path='img/b.ppm')
    bad.update(overrides)
    with pytest.raises(ManifestError) as excinfo:
        _parse(_entry(), bad)
    assert excinfo.value.record_index == 1
    assert excinfo.value.field == field


def test_duplicate_stems_rejected():
    with pytest.raises(ManifestError):
        _parse(_entry(), _entry(path='other/a.png'))


def test_missing_and_malformed_manifest(tmp_path):
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / 'absent.json')
    bad = tmp_path / 'bad.json'
    bad.write_text('{"images": [')
    with pytest.raises(ManifestError):
        load_manifest(bad)


def test_missing_image_file(tmp_path):
    path = tmp_path / 'manifest.json'
    path.write_text(json.dumps({'images': [_entry()]}))
    with pytest.raises(ManifestError) as excinfo:
        load_manifest(path)
    assert excinfo.value.field == 'path'


def test_manifest_round_trip(tmp_path):
    manifest = _parse(_entry(), _entry(path='img/b.ppm', detections=[]))
    save_manifest(manifest, tmp_path / 'm.json')
    again = load_manifest(tmp_path / 'm.json', check_files=False)
    assert again.records == manifest.records
    assert again.categories == manifest.categories


def test_image_png_and_ppm(tmp_path):
    rng = np.random.default_rng(0)
    image = Image.from_array(rng.integers(0, 256, size=(7, 9, 3), dtype=np.uint8))
    for name in ('x.png', 'x.ppm'):
        write_image(image, tmp_path / name)
        assert read_image(tmp_path / name) == image
    with pytest.raises(MaskStoreError):
        read_image(tmp_path / 'missing.png')


def test_save_and_load_masks(tmp_path):
    masks = [
        rasterize_ellipse(BBox(2, 2, 10, 8, 3), 12, 10).replace(score=0.25),
        MaskInstance.empty(12, 10, class_id=5, score=0.75),
    ]
    paths = save_masks(masks, tmp_path, 'img', validity_flags=[True, False], extras=[{'note': 1}, None])
    assert [p.name for p in paths] == ['img_0_3.png', 'img_1_5.png']
    loaded, entries = load_masks(tmp_path, 'img')
    assert loaded == masks
    assert [e.valid for e in entries] == [True, False]
    assert entries[0].extra == {'note': 1}
    assert list_stems(tmp_path) == ['img']
    assert read_mask(paths[0]).bits.tolist() == masks[0].bits.tolist()


def test_load_masks_without_sidecar(tmp_path):
    with pytest.raises(MaskStoreError):
        load_masks(tmp_path, 'nothing')


def test_overlay_leaves_input_untouched_and_ignores_order():
    image = Image.from_array(np.full((20, 20, 3), 40, dtype=np.uint8))
    a = rasterize_ellipse(BBox(1, 1, 8, 8), 20, 20)
    b = rasterize_ellipse(BBox(10, 10, 19, 18), 20, 20)
    colors = [instance_color(0), instance_color(1)]
    first = render_overlay(image, [a, b], colors)
    second = render_overlay(image, [b, a], colors[::-1])
    assert first == second
    assert np.all(image.pixels == 40)
    assert render_overlay(image, []) == image


def test_instance_colors_are_distinct():
    colors = [instance_color(i) for i in range(20)]
    assert len(set(colors)) == 20
    assert colors[0] == (128, 0, 0)


def test_synthetic_corpus(tmp_path):
    path = build_corpus(tmp_path, n_images=4, seed=1, size=64)
    manifest = load_manifest(path)
    assert len(manifest.records) == 4
    assert [len(r.instances) for r in manifest.records] == [1, 2, 1, 2]
    for record in manifest.records:
        image = read_image(manifest.resolve(record.image_path))
        assert (image.width, image.height) == (64, 64)
        for box, mask_path in zip(record.instances, record.gt_mask_paths):
            assert bbox_of_mask(read_mask(manifest.resolve(mask_path), box.class_id)) == box
        assert len(record.detections) == len(record.instances)


def test_synthetic_corpus_is_seeded(tmp_path):
    build_corpus(tmp_path / 'a', n_images=2, seed=3, size=48)
    build_corpus(tmp_path / 'b', n_images=2, seed=3, size=48)
    for name in ('manifest.json', 'images/synth_0000.ppm', 'gt/synth_0001_1.png'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()
