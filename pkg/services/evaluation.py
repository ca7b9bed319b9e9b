"""
Instance segmentation metrics: region AP at mask-IoU thresholds (mAP^r) and
average best overlap (ABO)
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from models import MaskInstance, mask_iou

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.5, 0.75)


class MatchLabel(Enum):
    TP = "tp"
    FP = "fp"


@dataclass
class GroundTruthSet:
    """Ground-truth instances per image; each mask carries its class_id"""
    images: List[List[MaskInstance]] = field(default_factory=list)


@dataclass
class EvalResult:
    per_class_ap: Dict[int, Dict[float, float]] = field(default_factory=dict)
    per_class_abo: Dict[int, float] = field(default_factory=dict)
    map_50: float = 0.0
    map_75: float = 0.0
    abo: float = 0.0
    thresholds: Tuple[float, ...] = DEFAULT_THRESHOLDS

    def map_at(self, threshold: float) -> float:
        if not self.per_class_ap:
            return 0.0
        return float(np.mean([aps[threshold] for aps in self.per_class_ap.values()]))

    def to_dict(self, category_names: Sequence[str] = ()) -> dict:
        def name(class_id):
            return category_names[class_id] if class_id < len(category_names) else str(class_id)

        return {
            'map_50': self.map_50,
            'map_75': self.map_75,
            'abo': self.abo,
            'per_class': {
                name(c): {
                    'ap': {f"{t:g}": ap for t, ap in aps.items()},
                    'abo': self.per_class_abo.get(c, 0.0),
                }
                for c, aps in sorted(self.per_class_ap.items())
            },
        }

    def to_frame(self, category_names: Sequence[str] = ()) -> pd.DataFrame:
        rows = []
        for class_id, aps in sorted(self.per_class_ap.items()):
            row = {
                'class_id': class_id,
                'class': category_names[class_id] if class_id < len(category_names) else str(class_id),
            }
            row.update({f"ap_{t:g}": ap for t, ap in aps.items()})
            row['abo'] = self.per_class_abo.get(class_id, 0.0)
            rows.append(row)
        return pd.DataFrame(rows)


def score_order(predictions: Sequence[MaskInstance]) -> List[int]:
    """Indices by descending score; ties keep input order"""
    return sorted(range(len(predictions)), key=lambda i: -predictions[i].score)


def match_instances(predictions: Sequence[MaskInstance], ground_truth: Sequence[MaskInstance],
                    iou_threshold: float) -> List[MatchLabel]:
    """
    Greedy matching in descending score order. Each prediction takes the
    unmatched same-class ground truth with the highest mask IoU if that IoU
    reaches the threshold. Labels are returned in input order.
    """
    labels = [MatchLabel.FP] * len(predictions)
    matched = [False] * len(ground_truth)
    for p in score_order(predictions):
        prediction = predictions[p]
        best_iou, best_g = -1.0, None
        for g, gt in enumerate(ground_truth):
            if matched[g] or gt.class_id != prediction.class_id:
                continue
            overlap = mask_iou(prediction, gt)
            if overlap > best_iou:
                best_iou, best_g = overlap, g
        if best_g is not None and best_iou >= iou_threshold:
            matched[best_g] = True
            labels[p] = MatchLabel.TP
    return labels


def average_precision(tp_fp_sequence: Sequence[MatchLabel], num_gt: int) -> float:
    """All-point interpolated AP over a score-ordered TP/FP sequence"""
    if num_gt <= 0 or len(tp_fp_sequence) == 0:
        return 0.0
    hits = np.array([label is MatchLabel.TP for label in tp_fp_sequence])
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    # recall only rises at a TP, by 1 / num_gt; each step takes the best precision from there on
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    return float(envelope[hits].sum() / num_gt)


def _class_ids(predictions: Sequence[Sequence[MaskInstance]], ground_truth: GroundTruthSet) -> List[int]:
    classes = {m.class_id for image in ground_truth.images for m in image}
    classes |= {m.class_id for image in predictions for m in image}
    return sorted(classes)


def class_average_precision(predictions: Sequence[Sequence[MaskInstance]], ground_truth: GroundTruthSet,
                            class_id: int, iou_threshold: float) -> float:
    """Match per image, then rank all of the class's predictions corpus-wide by score"""
    scored: List[Tuple[float, int, int, MatchLabel]] = []
    num_gt = 0
    for image_index, (preds, gts) in enumerate(zip(predictions, ground_truth.images)):
        preds = [p for p in preds if p.class_id == class_id]
        gts = [g for g in gts if g.class_id == class_id]
        num_gt += len(gts)
        for order, label in enumerate(match_instances(preds, gts, iou_threshold)):
            scored.append((preds[order].score, image_index, order, label))
    scored.sort(key=lambda item: (-item[0], item[1], item[2]))
    return average_precision([item[3] for item in scored], num_gt)


def class_best_overlaps(predictions: Sequence[Sequence[MaskInstance]], ground_truth: GroundTruthSet) -> Dict[int, List[float]]:
    best: Dict[int, List[float]] = {}
    for preds, gts in zip(predictions, ground_truth.images):
        for gt in gts:
            overlaps = [mask_iou(p, gt) for p in preds if p.class_id == gt.class_id]
            best.setdefault(gt.class_id, []).append(max(overlaps, default=0.0))
    return best


def abo(predictions: Sequence[Sequence[MaskInstance]], ground_truth: GroundTruthSet) -> float:
    """Mean over ground-truth classes of the mean best overlap per instance"""
    best = class_best_overlaps(predictions, ground_truth)
    if not best:
        return 0.0
    return float(np.mean([np.mean(values) for values in best.values()]))


def evaluate(predictions: Sequence[Sequence[MaskInstance]], ground_truth: GroundTruthSet,
             thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> EvalResult:
    if len(predictions) != len(ground_truth.images):
        raise ValueError(f"{len(predictions)} prediction lists for {len(ground_truth.images)} ground-truth images")
    thresholds = tuple(sorted(set(thresholds) | set(DEFAULT_THRESHOLDS)))
    result = EvalResult(thresholds=thresholds)

    for class_id in _class_ids(predictions, ground_truth):
        result.per_class_ap[class_id] = {
            t: class_average_precision(predictions, ground_truth, class_id, t) for t in thresholds
        }
    best = class_best_overlaps(predictions, ground_truth)
    result.per_class_abo = {c: float(np.mean(v)) for c, v in best.items()}

    result.map_50 = result.map_at(0.5)
    result.map_75 = result.map_at(0.75)
    result.abo = float(np.mean(list(result.per_class_abo.values()))) if best else 0.0
    logger.debug(f"Evaluated {len(result.per_class_ap)} classes: map_50={result.map_50:.4f} map_75={result.map_75:.4f} abo={result.abo:.4f}")
    return result
