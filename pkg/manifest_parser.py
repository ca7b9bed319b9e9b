"""
Corpus manifest parsing and validation

Schema:
    {
      "categories": ["aeroplane", ...],
      "images": [
        {"path": "img/0001.ppm", "width": 128, "height": 128,
         "instances": [{"box": [x0, y0, x1, y1], "class": 3, "mask": "gt/0001_0.png"}],
         "detections": [{"box": [x0, y0, x1, y1], "class": 3, "score": 0.91}]}
      ]
    }

Boxes are half-open pixel rectangles. "mask" and "detections" are optional.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Tuple

from models import BBox
from services.pipeline import Detection

logger = logging.getLogger(__name__)

VOC_CATEGORIES = (
    'aeroplane', 'bicycle', 'bird', 'boat', 'bottle',
    'bus', 'car', 'cat', 'chair', 'cow',
    'diningtable', 'dog', 'horse', 'motorbike', 'person',
    'pottedplant', 'sheep', 'sofa', 'train', 'tvmonitor',
)


class ManifestError(ValueError):
    def __init__(self, message: str, record_index: Optional[int] = None, field: Optional[str] = None):
        location = []
        if record_index is not None:
            location.append(f"images[{record_index}]")
        if field:
            location.append(field)
        prefix = '.'.join(location)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.record_index = record_index
        self.field = field


@dataclass(frozen=True)
class AnnotationRecord:
    image_path: str
    width: int
    height: int
    instances: Tuple[BBox, ...] = ()
    detections: Tuple[Detection, ...] = ()
    gt_mask_paths: Tuple[Optional[str], ...] = ()

    @property
    def stem(self) -> str:
        return Path(self.image_path).stem

    def to_dict(self):
        instances = []
        for index, box in enumerate(self.instances):
            entry = {'box': box.as_list(), 'class': box.class_id}
            if index < len(self.gt_mask_paths) and self.gt_mask_paths[index]:
                entry['mask'] = self.gt_mask_paths[index]
            instances.append(entry)
        data = {
            'path': self.image_path,
            'width': self.width,
            'height': self.height,
            'instances': instances,
        }
        if self.detections:
            data['detections'] = [d.to_dict() for d in self.detections]
        return data


@dataclass(frozen=True)
class CorpusManifest:
    root: Path
    categories: Tuple[str, ...] = VOC_CATEGORIES
    records: Tuple[AnnotationRecord, ...] = field(default_factory=tuple)

    def resolve(self, relative: str) -> Path:
        return self.root / relative

    def to_dict(self):
        return {
            'categories': list(self.categories),
            'images': [r.to_dict() for r in self.records],
        }


class ManifestParser:
    """Validating parser: any schema violation raises ManifestError, never a partial manifest"""

    def __init__(self, check_files: bool = True):
        self.check_files = check_files

    def parse_file(self, path) -> CorpusManifest:
        path = Path(path)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise ManifestError(f"manifest not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ManifestError(f"invalid JSON in {path}: {e}") from e
        return self.parse(data, path.parent)

    def parse(self, data: Any, root) -> CorpusManifest:
        root = Path(root)
        if not isinstance(data, dict):
            raise ManifestError("manifest must be a JSON object")

        categories = data.get('categories', list(VOC_CATEGORIES))
        if not isinstance(categories, list) or not all(isinstance(c, str) for c in categories) or not categories:
            raise ManifestError("must be a nonempty list of names", field='categories')

        images = data.get('images', [])
        if not isinstance(images, list):
            raise ManifestError("must be a list", field='images')

        # mask files are keyed by image stem, so stems must be unique too
        records, seen_stems = [], set()
        for index, entry in enumerate(images):
            record = self._parse_record(entry, index, len(categories), root)
            if record.stem in seen_stems:
                raise ManifestError(f"duplicate image stem {record.stem!r}", index, 'path')
            seen_stems.add(record.stem)
            records.append(record)

        logger.debug(f"Parsed manifest with {len(records)} images and {len(categories)} categories")
        return CorpusManifest(root=root, categories=tuple(categories), records=tuple(records))

    def _parse_record(self, entry: Any, index: int, num_classes: int, root: Path) -> AnnotationRecord:
        if not isinstance(entry, dict):
            raise ManifestError("must be an object", index)

        image_path = entry.get('path')
        if not isinstance(image_path, str) or not image_path:
            raise ManifestError("missing or empty", index, 'path')
        if self.check_files and not (root / image_path).is_file():
            raise ManifestError(f"image not found: {image_path}", index, 'path')

        width = self._positive_int(entry.get('width'), index, 'width')
        height = self._positive_int(entry.get('height'), index, 'height')

        instances, mask_paths = [], []
        raw_instances = entry.get('instances', [])
        if not isinstance(raw_instances, list):
            raise ManifestError("must be a list", index, 'instances')
        for i, inst in enumerate(raw_instances):
            field_name = f"instances[{i}]"
            if not isinstance(inst, dict):
                raise ManifestError("must be an object", index, field_name)
            class_id = self._class_id(inst.get('class'), num_classes, index, f"{field_name}.class")
            instances.append(self._box(inst.get('box'), class_id, width, height, index, f"{field_name}.box"))
            mask_path = inst.get('mask')
            if mask_path is not None:
                if not isinstance(mask_path, str):
                    raise ManifestError("must be a path string", index, f"{field_name}.mask")
                if self.check_files and not (root / mask_path).is_file():
                    raise ManifestError(f"mask not found: {mask_path}", index, f"{field_name}.mask")
            mask_paths.append(mask_path)

        detections = []
        raw_detections = entry.get('detections', [])
        if not isinstance(raw_detections, list):
            raise ManifestError("must be a list", index, 'detections')
        for i, det in enumerate(raw_detections):
            field_name = f"detections[{i}]"
            if not isinstance(det, dict):
                raise ManifestError("must be an object", index, field_name)
            class_id = self._class_id(det.get('class'), num_classes, index, f"{field_name}.class")
            box = self._box(det.get('box'), class_id, width, height, index, f"{field_name}.box")
            score = det.get('score')
            if isinstance(score, bool) or not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
                raise ManifestError(f"score must be a number in [0, 1], got {score!r}", index, f"{field_name}.score")
            detections.append(Detection(box=box, class_id=class_id, score=float(score)))

        return AnnotationRecord(
            image_path=image_path,
            width=width,
            height=height,
            instances=tuple(instances),
            detections=tuple(detections),
            gt_mask_paths=tuple(mask_paths),
        )

    @staticmethod
    def _positive_int(value, index: int, field_name: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ManifestError(f"must be a positive integer, got {value!r}", index, field_name)
        return value

    @staticmethod
    def _class_id(value, num_classes: int, index: int, field_name: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < num_classes:
            raise ManifestError(f"class must be an integer in [0, {num_classes}), got {value!r}", index, field_name)
        return value

    @staticmethod
    def _box(value, class_id: int, width: int, height: int, index: int, field_name: str) -> BBox:
        if (not isinstance(value, list) or len(value) != 4
                or any(isinstance(v, bool) or not isinstance(v, int) for v in value)):
            raise ManifestError(f"box must be four integers, got {value!r}", index, field_name)
        x0, y0, x1, y1 = value
        if x0 >= x1 or y0 >= y1:
            raise ManifestError(f"degenerate box {value}", index, field_name)
        box = BBox(x0, y0, x1, y1, class_id)
        if not box.within(width, height):
            raise ManifestError(f"box {value} exceeds image bounds {width}x{height}", index, field_name)
        return box


def load_manifest(path, check_files: bool = True) -> CorpusManifest:
    return ManifestParser(check_files=check_files).parse_file(path)


def save_manifest(manifest: CorpusManifest, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest.to_dict(), f, indent=2)
        f.write('\n')
    return path
