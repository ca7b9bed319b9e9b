"""
Seeded synthetic corpus: flat-colour ellipses and rectangles on contrasting
backgrounds, with ground-truth mask PNGs, a manifest and planted detections.
"""

import logging
from pathlib import Path
from typing import List, Tuple

import numpy as np

from manifest_parser import VOC_CATEGORIES, AnnotationRecord, CorpusManifest, save_manifest
from mask_store import write_image, write_mask
from models import BBox, Image, MaskInstance, rasterize_ellipse
from services.pipeline import Detection

logger = logging.getLogger(__name__)

SHAPE_KINDS = ('ellipse', 'rectangle')
MANIFEST_NAME = 'manifest.json'


def shape_mask(kind: str, box: BBox, width: int, height: int) -> MaskInstance:
    if kind == 'ellipse':
        return rasterize_ellipse(box, width, height)
    if kind == 'rectangle':
        bits = np.zeros((height, width), dtype=bool)
        bits[box.y_min:box.y_max, box.x_min:box.x_max] = True
        return MaskInstance(width, height, bits, box.class_id)
    raise ValueError(f"Unknown shape kind {kind!r}")


def _background_colour(rng: np.random.Generator) -> np.ndarray:
    background = rng.integers(0, 80, size=3)
    return 255 - background if rng.random() < 0.5 else background


def render_scene(width: int, height: int, shapes: List[Tuple[str, BBox]], rng: np.random.Generator,
                 noise: float = 0.0) -> Tuple[Image, List[MaskInstance]]:
    """Paint each shape in its own foreground colour over one background colour"""
    background = _background_colour(rng)
    canvas = np.empty((height, width, 3), dtype=np.float64)
    canvas[:] = background
    masks = []
    for kind, box in shapes:
        mask = shape_mask(kind, box, width, height)
        foreground = 255 - background
        # nudge the shape colour so instances in one image differ
        foreground = np.clip(foreground + rng.integers(-25, 26, size=3), 0, 255)
        canvas[mask.bits] = foreground
        masks.append(mask)
    if noise > 0:
        canvas += rng.normal(0.0, noise, size=canvas.shape)
    return Image.from_array(np.clip(np.rint(canvas), 0, 255).astype(np.uint8)), masks


def _random_box(rng: np.random.Generator, x_range: Tuple[int, int], y_range: Tuple[int, int],
                side_range: Tuple[int, int], class_id: int) -> BBox:
    w = int(rng.integers(side_range[0], side_range[1] + 1))
    h = int(rng.integers(side_range[0], side_range[1] + 1))
    w = min(w, x_range[1] - x_range[0])
    h = min(h, y_range[1] - y_range[0])
    x0 = int(rng.integers(x_range[0], x_range[1] - w + 1))
    y0 = int(rng.integers(y_range[0], y_range[1] - h + 1))
    return BBox(x0, y0, x0 + w, y0 + h, class_id)


def _layout(rng: np.random.Generator, index: int, size: int, num_classes: int) -> List[Tuple[str, BBox]]:
    """Even images hold one large shape, odd images two small ones side by side"""
    margin = max(2, size // 16)
    if index % 2 == 0:
        side = (size // 2 + margin, size - 3 * margin)
        cells = [((margin, size - margin), (margin, size - margin), side)]
    else:
        half = size // 2
        side = (max(4, size // 10), half - 3 * margin)
        cells = [
            ((margin, half - margin), (margin, size - margin), side),
            ((half + margin, size - margin), (margin, size - margin), side),
        ]
    shapes = []
    for x_range, y_range, side_range in cells:
        kind = SHAPE_KINDS[int(rng.integers(len(SHAPE_KINDS)))]
        class_id = int(rng.integers(num_classes))
        shapes.append((kind, _random_box(rng, x_range, y_range, side_range, class_id)))
    return shapes


def _jittered_detection(rng: np.random.Generator, box: BBox, width: int, height: int) -> Detection:
    dx0, dy0, dx1, dy1 = (int(v) for v in rng.integers(-2, 3, size=4))
    x0 = min(max(0, box.x_min + dx0), box.x_max - 1)
    y0 = min(max(0, box.y_min + dy0), box.y_max - 1)
    x1 = max(min(width, box.x_max + dx1), x0 + 1)
    y1 = max(min(height, box.y_max + dy1), y0 + 1)
    score = round(float(rng.uniform(0.5, 1.0)), 3)
    return Detection(box=BBox(x0, y0, x1, y1, box.class_id), class_id=box.class_id, score=score)


def build_corpus(root, n_images: int = 4, seed: int = 0, size: int = 128, noise: float = 0.0,
                 categories=VOC_CATEGORIES) -> Path:
    """Write images, ground-truth masks and a manifest under ``root``; returns the manifest path"""
    if n_images < 0:
        raise ValueError(f"n_images must be >= 0, got {n_images}")
    if size < 32:
        raise ValueError(f"size must be >= 32, got {size}")
    root = Path(root)
    rng = np.random.default_rng(seed)
    records = []

    for index in range(n_images):
        stem = f"synth_{index:04d}"
        shapes = _layout(rng, index, size, len(categories))
        image, masks = render_scene(size, size, shapes, rng, noise)
        image_path = f"images/{stem}.ppm"
        write_image(image, root / image_path)

        mask_paths = []
        for instance_index, mask in enumerate(masks):
            mask_path = f"gt/{stem}_{instance_index}.png"
            write_mask(mask, root / mask_path)
            mask_paths.append(mask_path)

        boxes = tuple(box for _, box in shapes)
        records.append(AnnotationRecord(
            image_path=image_path,
            width=size,
            height=size,
            instances=boxes,
            detections=tuple(_jittered_detection(rng, box, size, size) for box in boxes),
            gt_mask_paths=tuple(mask_paths),
        ))

    manifest = CorpusManifest(root=root, categories=tuple(categories), records=tuple(records))
    path = save_manifest(manifest, root / MANIFEST_NAME)
    logger.info(f"Synthetic corpus of {n_images} images written to {root}", extra={'seed': seed})
    return path
