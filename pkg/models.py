"""
Core raster and geometry types shared by every boxseg module
"""

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Image:
    """Dense RGB raster, stored as a read-only (height, width, 3) uint8 array"""
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"Image dimensions must be positive, got {self.width}x{self.height}")
        pixels = np.asarray(self.pixels)
        if pixels.size != self.width * self.height * 3:
            raise ValueError(
                f"Pixel array has {pixels.size} values, expected {self.width * self.height * 3}"
            )
        object.__setattr__(self, 'pixels', _frozen_array(pixels.reshape(self.height, self.width, 3), np.uint8))

    @classmethod
    def from_array(cls, array) -> 'Image':
        array = np.asarray(array)
        if array.ndim != 3 or array.shape[2] != 3:
            raise ValueError(f"Expected an (H, W, 3) array, got shape {array.shape}")
        return cls(width=array.shape[1], height=array.shape[0], pixels=array)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.width == other.width and self.height == other.height and np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"<Image({self.width}x{self.height})>"


@dataclass(frozen=True, order=True)
class BBox:
    """Half-open pixel rectangle [x_min, x_max) x [y_min, y_max)"""
    x_min: int
    y_min: int
    x_max: int
    y_max: int
    class_id: int = 0

    def __post_init__(self):
        for name in ('x_min', 'y_min', 'x_max', 'y_max', 'class_id'):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError(f"Degenerate box {self.as_list()}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height

    def within(self, width: int, height: int) -> bool:
        return self.x_min >= 0 and self.y_min >= 0 and self.x_max <= width and self.y_max <= height

    def with_class(self, class_id: int) -> 'BBox':
        return BBox(self.x_min, self.y_min, self.x_max, self.y_max, class_id)

    def as_list(self):
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True, eq=False)
class MaskInstance:
    """Binary foreground map for one object instance"""
    width: int
    height: int
    bits: np.ndarray
    class_id: int = 0
    score: float = 1.0

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.size != self.width * self.height:
            raise ValueError(f"Mask has {bits.size} bits, expected {self.width * self.height}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"Mask score {self.score} outside [0, 1]")
        object.__setattr__(self, 'bits', _frozen_array(bits.reshape(self.height, self.width) != 0, bool))
        object.__setattr__(self, 'score', float(self.score))
        object.__setattr__(self, 'class_id', int(self.class_id))

    @classmethod
    def empty(cls, width: int, height: int, class_id: int = 0, score: float = 1.0) -> 'MaskInstance':
        return cls(width, height, np.zeros((height, width), dtype=bool), class_id, score)

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    @property
    def is_empty(self) -> bool:
        return not self.bits.any()

    def replace(self, class_id: Optional[int] = None, score: Optional[float] = None) -> 'MaskInstance':
        return MaskInstance(
            self.width, self.height, self.bits,
            self.class_id if class_id is None else class_id,
            self.score if score is None else score,
        )

    def __eq__(self, other):
        if not isinstance(other, MaskInstance):
            return NotImplemented
        return (
            self.width == other.width and self.height == other.height
            and self.class_id == other.class_id and self.score == other.score
            and np.array_equal(self.bits, other.bits)
        )

    def __repr__(self):
        return f"<MaskInstance({self.width}x{self.height}, class={self.class_id}, area={self.area}, score={self.score:.3f})>"


class TrimapLabel(IntEnum):
    # Same numbering as the OpenCV GC_* constants
    DEFINITE_BACKGROUND = 0
    DEFINITE_FOREGROUND = 1
    PROBABLE_BACKGROUND = 2
    PROBABLE_FOREGROUND = 3


@dataclass(frozen=True, eq=False)
class Trimap:
    width: int
    height: int
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.size != self.width * self.height:
            raise ValueError(f"Trimap has {labels.size} labels, expected {self.width * self.height}")
        object.__setattr__(self, 'labels', _frozen_array(labels.reshape(self.height, self.width), np.uint8))

    @property
    def foreground_side(self) -> np.ndarray:
        return (self.labels == TrimapLabel.DEFINITE_FOREGROUND) | (self.labels == TrimapLabel.PROBABLE_FOREGROUND)

    @property
    def background_side(self) -> np.ndarray:
        return ~self.foreground_side

    @property
    def probable(self) -> np.ndarray:
        return (self.labels == TrimapLabel.PROBABLE_FOREGROUND) | (self.labels == TrimapLabel.PROBABLE_BACKGROUND)

    def relabel_probable(self, foreground: np.ndarray) -> 'Trimap':
        """Return a trimap whose probable pixels follow ``foreground``; definite pixels are kept"""
        labels = np.array(self.labels)
        probable = self.probable
        labels[probable & foreground] = TrimapLabel.PROBABLE_FOREGROUND
        labels[probable & ~foreground] = TrimapLabel.PROBABLE_BACKGROUND
        return Trimap(self.width, self.height, labels)


def bbox_of_mask(mask: MaskInstance) -> Optional[BBox]:
    """Tightest box around the foreground pixels, or None for an empty mask"""
    rows = np.flatnonzero(mask.bits.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.bits.any(axis=0))
    return BBox(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1, mask.class_id)


def iou(a: BBox, b: BBox) -> float:
    inter_w = max(0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    inter_h = max(0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    intersection = inter_w * inter_h
    union = a.area + b.area - intersection
    return intersection / union


def mask_iou(a: MaskInstance, b: MaskInstance) -> float:
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(f"Mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 0.0
    return np.count_nonzero(a.bits & b.bits) / union


def rasterize_ellipse(box: BBox, width: int, height: int) -> MaskInstance:
    """
    Axis-aligned ellipse inscribed in ``box``, sampled at pixel centres.

    Pixels are foreground when their centre lies inside the ellipse, with one
    deviation: the centre row(s) and column(s) of the box are always filled.
    For thin boxes pure centre sampling can miss the end pixels of the long
    axis; the filled cross keeps the mask tangent to all four sides.
    """
    if not box.within(width, height):
        raise ValueError(f"Box {box.as_list()} lies outside a {width}x{height} raster")
    cx = (box.x_min + box.x_max) / 2.0
    cy = (box.y_min + box.y_max) / 2.0
    a = box.width / 2.0
    b = box.height / 2.0

    xs = np.arange(box.x_min, box.x_max) + 0.5
    ys = np.arange(box.y_min, box.y_max) + 0.5
    inside = ((xs[None, :] - cx) / a) ** 2 + ((ys[:, None] - cy) / b) ** 2 <= 1.0

    # middle rows/cols: one for odd extents, two for even
    inside[(box.height - 1) // 2:box.height // 2 + 1, :] = True
    inside[:, (box.width - 1) // 2:box.width // 2 + 1] = True

    bits = np.zeros((height, width), dtype=bool)
    bits[box.y_min:box.y_max, box.x_min:box.x_max] = inside
    return MaskInstance(width, height, bits, box.class_id, 1.0)
