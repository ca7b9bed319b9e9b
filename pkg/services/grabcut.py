"""
Box-seeded GrabCut producing pseudo-masks from bounding box annotations
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from models import BBox, Image, MaskInstance, Trimap, TrimapLabel
from services.gmm import GmmPair, data_energy, init_gmm_pair, reassign_and_refit
from services.graph_cut import DEFAULT_GAMMA, Side, build_graph, cut_value, min_cut

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GrabCutConfig:
    k: int = 5
    gamma: float = DEFAULT_GAMMA
    max_iters: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class GrabCutResult:
    mask: MaskInstance
    energy_trace: Tuple[float, ...] = field(default_factory=tuple)
    iterations_run: int = 0


def seed_trimap(box: BBox, width: int, height: int) -> Trimap:
    if not box.within(width, height):
        raise ValueError(f"Box {box.as_list()} lies outside a {width}x{height} image")
    labels = np.full((height, width), TrimapLabel.DEFINITE_BACKGROUND, dtype=np.uint8)
    labels[box.y_min:box.y_max, box.x_min:box.x_max] = TrimapLabel.PROBABLE_FOREGROUND
    return Trimap(width, height, labels)


def _guarded_refit(pair: GmmPair, image: Image, trimap: Trimap) -> GmmPair:
    """
    Refit both sides, then also keep a side's previous model when the refit
    would raise its data energy on the probable pixels, which are the only
    pixels whose data terms enter the graph.
    """
    candidate = reassign_and_refit(pair, image, trimap)
    probable = trimap.probable
    fg_pixels = image.pixels[probable & trimap.foreground_side].astype(np.float64)
    bg_pixels = image.pixels[probable & trimap.background_side].astype(np.float64)

    foreground = candidate.foreground
    if data_energy(foreground, fg_pixels) > data_energy(pair.foreground, fg_pixels):
        logger.debug("Foreground refit rejected on probable pixels")
        foreground = pair.foreground
    background = candidate.background
    if data_energy(background, bg_pixels) > data_energy(pair.background, bg_pixels):
        logger.debug("Background refit rejected on probable pixels")
        background = pair.background
    return GmmPair(foreground, background)


def run(image: Image, box: BBox, config: GrabCutConfig = GrabCutConfig()) -> GrabCutResult:
    """
    Alternate GMM refitting and exact graph cuts until the labelling stops
    changing or ``config.max_iters`` is reached.
    """
    trimap = seed_trimap(box, image.width, image.height)
    if not trimap.background_side.any():
        # box covers the whole image: no background colour model can be fitted
        logger.debug("Seed box covers the whole image; returning the box as the mask")
        return GrabCutResult(
            mask=MaskInstance(image.width, image.height, trimap.foreground_side, box.class_id, 1.0),
            energy_trace=(),
            iterations_run=0,
        )

    models = init_gmm_pair(image, trimap, config.k, config.seed)
    energy_trace: List[float] = []
    iterations_run = 0

    for iteration in range(1, config.max_iters + 1):
        models = _guarded_refit(models, image, trimap)
        graph = build_graph(image, trimap, models, config.gamma)
        _, side = min_cut(graph)
        foreground = (side == Side.SOURCE).reshape(image.height, image.width)

        energy_trace.append(cut_value(graph, side) + graph.constant)
        iterations_run = iteration

        changed = np.count_nonzero(foreground[trimap.probable] != trimap.foreground_side[trimap.probable])
        trimap = trimap.relabel_probable(foreground)
        logger.debug(f"GrabCut iteration {iteration}: energy={energy_trace[-1]:.4f}, changed={changed}")
        if changed == 0:
            break
        if not trimap.foreground_side.any():
            logger.debug("Cut left no foreground pixels; stopping")
            break

    mask_bits = trimap.foreground_side & trimap.probable
    return GrabCutResult(
        mask=MaskInstance(image.width, image.height, mask_bits, box.class_id, 1.0),
        energy_trace=tuple(energy_trace),
        iterations_run=iterations_run,
    )


def generate_pseudo_masks(image: Image, boxes: List[BBox], config: GrabCutConfig = GrabCutConfig()) -> List[MaskInstance]:
    """One independently computed pseudo-mask per box, in box order"""
    masks = []
    for box in boxes:
        result = run(image, box, config)
        masks.append(result.mask.replace(class_id=box.class_id, score=1.0))
    return masks
