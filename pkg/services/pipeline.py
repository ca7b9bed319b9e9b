"""
Validity partition, size routing, invalid-mask statistics, small-branch
segmentation with ellipse fallback, and test-time fusion of the two branches
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple

import pandas as pd

from models import BBox, Image, MaskInstance, bbox_of_mask, iou, rasterize_ellipse
from services import grabcut
from services.grabcut import GrabCutConfig

logger = logging.getLogger(__name__)

DEFAULT_VALIDITY_IOU = 0.5
DEFAULT_SIZE_AREA = 64 * 64
HISTOGRAM_BUCKETS = (16 ** 2, 32 ** 2, 64 ** 2, 128 ** 2, 256 ** 2, float('inf'))


class Validity(Enum):
    VALID = "valid"
    INVALID = "invalid"


class SizeClass(Enum):
    SMALL = "small"
    LARGE = "large"


class Branch(Enum):
    LARGE = "large"
    SMALL = "small"


@dataclass(frozen=True)
class Detection:
    box: BBox
    class_id: int
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"Detection score {self.score} outside [0, 1]")

    def to_dict(self):
        return {'box': self.box.as_list(), 'class': self.class_id, 'score': self.score}


@dataclass
class PartitionedMasks:
    valid: List[Tuple[MaskInstance, BBox]] = field(default_factory=list)
    invalid: List[Tuple[MaskInstance, BBox]] = field(default_factory=list)
    threshold: float = DEFAULT_VALIDITY_IOU


@dataclass
class StatsReport:
    total_instances: int = 0
    invalid_count: int = 0
    invalid_fraction: float = 0.0
    small_invalid_over_invalid: float = 0.0
    invalid_over_small: float = 0.0
    invalid_over_large: float = 0.0
    histogram: List[int] = field(default_factory=lambda: [0] * len(HISTOGRAM_BUCKETS))
    undefined_fields: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            'total_instances': self.total_instances,
            'invalid_count': self.invalid_count,
            'invalid_fraction': self.invalid_fraction,
            'small_invalid_over_invalid': self.small_invalid_over_invalid,
            'invalid_over_small': self.invalid_over_small,
            'invalid_over_large': self.invalid_over_large,
            'histogram': list(self.histogram),
            'undefined_fields': list(self.undefined_fields),
        }

    def histogram_frame(self) -> pd.DataFrame:
        upper = ['inf' if b == float('inf') else int(b) for b in HISTOGRAM_BUCKETS]
        return pd.DataFrame({'bucket_upper_area': upper, 'count': list(self.histogram)})


@dataclass(frozen=True)
class RoutedMask:
    mask: MaskInstance
    branch: Branch
    source_index: int


def mask_box_iou(mask: MaskInstance, gt_box: BBox) -> float:
    """IoU between the mask's tight box and ``gt_box``; 0 for an empty mask"""
    mask_box = bbox_of_mask(mask)
    if mask_box is None:
        return 0.0
    return iou(mask_box, gt_box)


def validity(mask: MaskInstance, gt_box: BBox, threshold: float = DEFAULT_VALIDITY_IOU) -> Validity:
    if mask.is_empty:
        return Validity.INVALID
    return Validity.VALID if mask_box_iou(mask, gt_box) >= threshold else Validity.INVALID


def partition(masks: Sequence[Tuple[MaskInstance, BBox]], threshold: float = DEFAULT_VALIDITY_IOU) -> PartitionedMasks:
    result = PartitionedMasks(threshold=threshold)
    for mask, box in masks:
        if validity(mask, box, threshold) is Validity.VALID:
            result.valid.append((mask, box))
        else:
            result.invalid.append((mask, box))
    return result


def size_class(box: BBox, threshold_area: int = DEFAULT_SIZE_AREA) -> SizeClass:
    # equality routes Large
    return SizeClass.SMALL if box.area < threshold_area else SizeClass.LARGE


def histogram_bucket(area: int) -> int:
    for index, upper in enumerate(HISTOGRAM_BUCKETS):
        if area < upper:
            return index
    return len(HISTOGRAM_BUCKETS) - 1


def _fraction(numerator: int, denominator: int, name: str, undefined: List[str]) -> float:
    if denominator == 0:
        undefined.append(name)
        return 0.0
    return numerator / denominator


def compute_stats(masks: Sequence[Tuple[MaskInstance, BBox]], threshold: float = DEFAULT_VALIDITY_IOU,
                  threshold_area: int = DEFAULT_SIZE_AREA) -> StatsReport:
    """Counts invalid pseudo-masks by instance size (sized by the ground-truth box)"""
    report = StatsReport()
    small_total = large_total = small_invalid = large_invalid = 0

    for mask, box in masks:
        is_small = size_class(box, threshold_area) is SizeClass.SMALL
        small_total += is_small
        large_total += not is_small
        if validity(mask, box, threshold) is Validity.INVALID:
            small_invalid += is_small
            large_invalid += not is_small
            report.histogram[histogram_bucket(box.area)] += 1

    report.total_instances = small_total + large_total
    report.invalid_count = small_invalid + large_invalid
    undefined = report.undefined_fields
    report.invalid_fraction = _fraction(report.invalid_count, report.total_instances, 'invalid_fraction', undefined)
    report.small_invalid_over_invalid = _fraction(small_invalid, report.invalid_count, 'small_invalid_over_invalid', undefined)
    report.invalid_over_small = _fraction(small_invalid, small_total, 'invalid_over_small', undefined)
    report.invalid_over_large = _fraction(large_invalid, large_total, 'invalid_over_large', undefined)
    return report


def segment_detection(image: Image, detection: Detection, config: GrabCutConfig = GrabCutConfig(),
                      quality_threshold: float = DEFAULT_VALIDITY_IOU) -> Tuple[MaskInstance, bool]:
    """Returns the small-branch mask for one detection and whether the ellipse fallback was used"""
    box = detection.box.with_class(detection.class_id)
    mask = grabcut.run(image, box, config).mask
    used_ellipse = validity(mask, box, quality_threshold) is Validity.INVALID
    if used_ellipse:
        mask = rasterize_ellipse(box, image.width, image.height)
    return mask.replace(class_id=detection.class_id, score=detection.score), used_ellipse


def small_branch_segment(image: Image, detections: Sequence[Detection], config: GrabCutConfig = GrabCutConfig(),
                         quality_threshold: float = DEFAULT_VALIDITY_IOU) -> List[MaskInstance]:
    """
    GrabCut seeded by each detection box; masks failing the validity test are
    replaced by the ellipse inscribed in the detection box.
    """
    masks = []
    for index, detection in enumerate(detections):
        mask, used_ellipse = segment_detection(image, detection, config, quality_threshold)
        if used_ellipse:
            logger.debug(f"Detection {index}: GrabCut mask failed validity, substituted ellipse")
        masks.append(mask)
    return masks


def route(large_branch: Sequence[MaskInstance], small_branch: Sequence[MaskInstance],
          threshold_area: int = DEFAULT_SIZE_AREA) -> List[RoutedMask]:
    """Keep Small masks from the small branch and Large masks from the large branch"""
    routed = []
    for branch, masks, wanted in (
        (Branch.SMALL, small_branch, SizeClass.SMALL),
        (Branch.LARGE, large_branch, SizeClass.LARGE),
    ):
        for index, mask in enumerate(masks):
            box = bbox_of_mask(mask)
            if box is None:
                continue
            if size_class(box, threshold_area) is wanted:
                routed.append(RoutedMask(mask, branch, index))
    return routed


def fuse(large_branch: Sequence[MaskInstance], small_branch: Sequence[MaskInstance],
         threshold_area: int = DEFAULT_SIZE_AREA) -> List[MaskInstance]:
    return [r.mask for r in route(large_branch, small_branch, threshold_area)]
