"""
Segmentation task management
Builds one task per (image, instance) and runs them on a fixed-size worker pool.
Results are keyed by task id, so the pool's completion order never affects outputs.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np

from manifest_parser import CorpusManifest
from mask_store import read_image, write_json
from models import BBox, MaskInstance
from services import grabcut
from services.grabcut import GrabCutConfig
from services.pipeline import Detection, segment_detection

logger = logging.getLogger(__name__)


class TaskType(Enum):
    PSEUDO_MASK = "pseudo_mask"      # GrabCut on an annotated box
    SMALL_BRANCH = "small_branch"    # GrabCut on a detection, ellipse fallback


class TaskStatus(Enum):
    PENDING = "pending"
    COMPLETED = "completed"


@dataclass
class SegmentationTask:
    id: str
    image_index: int
    image_path: str
    image_stem: str
    instance_index: int
    box: BBox
    task_type: TaskType
    status: TaskStatus = TaskStatus.PENDING
    score: float = 1.0
    iterations_run: Optional[int] = None
    energy_trace: List[float] = field(default_factory=list)
    used_ellipse: Optional[bool] = None

    def to_dict(self):
        return {
            'id': self.id,
            'image_index': self.image_index,
            'image_path': self.image_path,
            'image_stem': self.image_stem,
            'instance_index': self.instance_index,
            'box': self.box.as_list(),
            'class': self.box.class_id,
            'task_type': self.task_type.value,
            'status': self.status.value,
            'score': self.score,
            'iterations_run': self.iterations_run,
            'energy_trace': list(self.energy_trace),
            'used_ellipse': self.used_ellipse,
        }

    @classmethod
    def from_dict(cls, data):
        x0, y0, x1, y1 = data['box']
        return cls(
            id=data['id'],
            image_index=data['image_index'],
            image_path=data['image_path'],
            image_stem=data['image_stem'],
            instance_index=data['instance_index'],
            box=BBox(x0, y0, x1, y1, data['class']),
            task_type=TaskType(data['task_type']),
            status=TaskStatus(data['status']),
            score=data.get('score', 1.0),
            iterations_run=data.get('iterations_run'),
            energy_trace=list(data.get('energy_trace', [])),
            used_ellipse=data.get('used_ellipse'),
        )


@lru_cache(maxsize=8)
def _cached_image(path: str):
    return read_image(path)


def _execute(payload: Tuple[dict, GrabCutConfig, float, Tuple[int, int]]):
    """Worker entry point; module-level so it pickles"""
    task_data, config, quality_threshold, expected_size = payload
    task = SegmentationTask.from_dict(task_data)
    image = _cached_image(task.image_path)
    if (image.width, image.height) != tuple(expected_size):
        raise ValueError(
            f"{task.image_path}: image is {image.width}x{image.height}, manifest says {expected_size[0]}x{expected_size[1]}"
        )
    if task.task_type is TaskType.PSEUDO_MASK:
        result = grabcut.run(image, task.box, config)
        return task.id, np.packbits(result.mask.bits), result.iterations_run, list(result.energy_trace), None
    detection = Detection(box=task.box, class_id=task.box.class_id, score=task.score)
    mask, used_ellipse = segment_detection(image, detection, config, quality_threshold)
    return task.id, np.packbits(mask.bits), None, [], used_ellipse


class TaskManager:
    def __init__(self, manifest: CorpusManifest, config: GrabCutConfig, workers: int = 1,
                 quality_threshold: float = 0.5):
        self.manifest = manifest
        self.config = config
        self.workers = workers
        self.quality_threshold = quality_threshold
        self.tasks: Dict[str, SegmentationTask] = {}
        self.masks: Dict[str, MaskInstance] = {}

    def create_tasks(self, task_type: TaskType) -> List[SegmentationTask]:
        """One task per annotated instance (or per detection for the small branch)"""
        created = []
        for image_index, record in enumerate(self.manifest.records):
            if task_type is TaskType.PSEUDO_MASK:
                items = [(box, 1.0) for box in record.instances]
            else:
                items = [(d.box.with_class(d.class_id), d.score) for d in record.detections]
            for instance_index, (box, score) in enumerate(items):
                task = SegmentationTask(
                    id=f"{record.stem}_{instance_index}",
                    image_index=image_index,
                    image_path=str(self.manifest.resolve(record.image_path)),
                    image_stem=record.stem,
                    instance_index=instance_index,
                    box=box,
                    task_type=task_type,
                    score=score,
                )
                self.tasks[task.id] = task
                created.append(task)
        return created

    def get_pending_tasks(self) -> List[SegmentationTask]:
        return [t for t in self.tasks.values() if t.status is TaskStatus.PENDING]

    def run(self) -> Dict[str, MaskInstance]:
        # images may have been rewritten since the last run in this process
        _cached_image.cache_clear()
        pending = self.get_pending_tasks()
        payloads = [(t.to_dict(), self.config, self.quality_threshold, self._record_size(t)) for t in pending]
        logger.info(f"Running {len(pending)} segmentation tasks on {self.workers} worker(s)")

        if self.workers == 1 or len(pending) <= 1:
            outcomes = map(_execute, payloads)
            self._collect(pending, outcomes)
        else:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                self._collect(pending, pool.map(_execute, payloads))
        return self.masks

    def _record_size(self, task: SegmentationTask) -> Tuple[int, int]:
        record = self.manifest.records[task.image_index]
        return record.width, record.height

    def _collect(self, pending: List[SegmentationTask], outcomes):
        for task, (task_id, packed, iterations_run, energy_trace, used_ellipse) in zip(pending, outcomes):
            record = self.manifest.records[task.image_index]
            bits = np.unpackbits(packed, count=record.width * record.height).astype(bool)
            self.masks[task_id] = MaskInstance(record.width, record.height, bits, task.box.class_id, task.score)
            task.iterations_run = iterations_run
            task.energy_trace = energy_trace
            task.used_ellipse = used_ellipse
            task.status = TaskStatus.COMPLETED

    def masks_for_image(self, image_index: int) -> List[Tuple[SegmentationTask, MaskInstance]]:
        tasks = sorted(
            (t for t in self.tasks.values() if t.image_index == image_index),
            key=lambda t: t.instance_index,
        )
        return [(t, self.masks[t.id]) for t in tasks if t.id in self.masks]

    def get_task_summary(self) -> Dict:
        summary = {
            'total': len(self.tasks),
            'pending': len([t for t in self.tasks.values() if t.status is TaskStatus.PENDING]),
            'completed': len([t for t in self.tasks.values() if t.status is TaskStatus.COMPLETED]),
        }
        return summary

    def save_tasks(self, path):
        data = {task_id: self.tasks[task_id].to_dict() for task_id in sorted(self.tasks)}
        return write_json(data, path)
