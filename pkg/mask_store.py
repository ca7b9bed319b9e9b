"""
Raster and mask persistence: image loading (PNG / binary PPM), 8-bit mask
PNGs with JSON sidecars, overlay rendering and report writers
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import cv2
import numpy as np
import pandas as pd

from models import Image, MaskInstance, bbox_of_mask

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = '.instances.json'
OVERLAY_ALPHA = 0.5


class MaskStoreError(ValueError):
    def __init__(self, path, message: str):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


@dataclass
class StoredInstance:
    """One entry of a sidecar file"""
    index: int
    filename: str
    class_id: int
    score: float
    valid: Optional[bool] = None
    extra: Optional[dict] = None

    def to_dict(self):
        data = {
            'index': self.index,
            'file': self.filename,
            'class': self.class_id,
            'score': self.score,
            'valid': self.valid,
        }
        if self.extra:
            data.update(self.extra)
        return data

    @classmethod
    def from_dict(cls, data):
        known = {'index', 'file', 'class', 'score', 'valid'}
        return cls(
            index=int(data['index']),
            filename=data['file'],
            class_id=int(data['class']),
            score=float(data['score']),
            valid=data.get('valid'),
            extra={k: v for k, v in data.items() if k not in known} or None,
        )


def read_image(path) -> Image:
    """Load an RGB image from PNG or binary PPM (P6)"""
    path = Path(path)
    if not path.exists():
        raise MaskStoreError(path, "image file not found")
    array = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if array is None:
        raise MaskStoreError(path, "could not decode image")
    return Image.from_array(cv2.cvtColor(array, cv2.COLOR_BGR2RGB))


def write_image(image: Image, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), cv2.cvtColor(np.ascontiguousarray(image.pixels), cv2.COLOR_RGB2BGR)):
        raise MaskStoreError(path, "could not write image")
    return path


def write_mask(mask: MaskInstance, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), mask.bits.astype(np.uint8) * 255):
        raise MaskStoreError(path, "could not write mask")
    return path


def read_mask(path, class_id: int = 0, score: float = 1.0) -> MaskInstance:
    path = Path(path)
    if not path.exists():
        raise MaskStoreError(path, "mask file not found")
    array = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if array is None:
        raise MaskStoreError(path, "could not decode mask")
    return MaskInstance(array.shape[1], array.shape[0], array >= 128, class_id, score)


def mask_filename(image_stem: str, index: int, class_id: int) -> str:
    return f"{image_stem}_{index}_{class_id}.png"


def sidecar_path(directory, image_stem: str) -> Path:
    return Path(directory) / f"{image_stem}{SIDECAR_SUFFIX}"


def save_masks(masks: Sequence[MaskInstance], directory, image_stem: str,
               validity_flags: Optional[Sequence[Optional[bool]]] = None,
               extras: Optional[Sequence[Optional[dict]]] = None) -> List[Path]:
    """Write one PNG per mask and a sidecar JSON with scores and validity flags"""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise MaskStoreError(directory, f"cannot create directory ({e})") from e

    paths, entries = [], []
    for index, mask in enumerate(masks):
        filename = mask_filename(image_stem, index, mask.class_id)
        paths.append(write_mask(mask, directory / filename))
        entries.append(StoredInstance(
            index=index,
            filename=filename,
            class_id=mask.class_id,
            score=mask.score,
            valid=validity_flags[index] if validity_flags is not None else None,
            extra=extras[index] if extras is not None else None,
        ))
    write_json({'image': image_stem, 'instances': [e.to_dict() for e in entries]},
               sidecar_path(directory, image_stem))
    return paths


def load_masks(directory, image_stem: str) -> Tuple[List[MaskInstance], List[StoredInstance]]:
    path = sidecar_path(directory, image_stem)
    if not path.exists():
        raise MaskStoreError(path, "sidecar not found")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise MaskStoreError(path, f"unreadable sidecar ({e})") from e

    entries = [StoredInstance.from_dict(d) for d in data.get('instances', [])]
    masks = [read_mask(Path(directory) / e.filename, e.class_id, e.score) for e in entries]
    return masks, entries


def list_stems(directory) -> List[str]:
    """Image stems that have a sidecar in ``directory``, sorted"""
    directory = Path(directory)
    if not directory.is_dir():
        return []
    return sorted(p.name[:-len(SIDECAR_SUFFIX)] for p in directory.glob(f"*{SIDECAR_SUFFIX}"))


def instance_color(index: int) -> Tuple[int, int, int]:
    """PASCAL VOC palette colour for label index + 1"""
    label = index + 1
    r = g = b = 0
    for shift in range(8):
        r |= ((label >> 0) & 1) << (7 - shift)
        g |= ((label >> 1) & 1) << (7 - shift)
        b |= ((label >> 2) & 1) << (7 - shift)
        label >>= 3
    return (r, g, b)


def render_overlay(image: Image, masks: Sequence[MaskInstance],
                   colors: Optional[Sequence[Tuple[int, int, int]]] = None,
                   alpha: float = OVERLAY_ALPHA) -> Image:
    """Alpha-blend each mask in its own colour and outline its box; ``image`` is untouched"""
    canvas = np.array(image.pixels, dtype=np.float64)
    colors = list(colors) if colors is not None else [instance_color(i) for i in range(len(masks))]

    for mask, color in zip(masks, colors):
        canvas[mask.bits] = (1.0 - alpha) * canvas[mask.bits] + alpha * np.asarray(color, dtype=np.float64)

    out = np.ascontiguousarray(np.clip(np.rint(canvas), 0, 255).astype(np.uint8))
    for mask, color in zip(masks, colors):
        box = bbox_of_mask(mask)
        if box is None:
            continue
        cv2.rectangle(out, (box.x_min, box.y_min), (box.x_max - 1, box.y_max - 1), tuple(int(c) for c in color), 1)
    return Image.from_array(out)


def write_json(data, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + '.tmp')
    try:
        with open(tmp, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, sort_keys=True)
            f.write('\n')
        os.replace(tmp, path)
    except OSError as e:
        raise MaskStoreError(path, f"could not write JSON ({e})") from e
    return path


def read_json(path) -> Dict:
    path = Path(path)
    if not path.exists():
        raise MaskStoreError(path, "file not found")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise MaskStoreError(path, f"unreadable JSON ({e})") from e


def write_histogram_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path
