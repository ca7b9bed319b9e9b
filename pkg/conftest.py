import numpy as np
import pytest

from models import BBox
from synthetic_corpus import build_corpus, render_scene


def make_scene(box, size=128, kind='ellipse', seed=0, noise=0.0):
    """One shape on a contrasting background: (image, ground-truth mask)"""
    rng = np.random.default_rng(seed)
    image, masks = render_scene(size, size, [(kind, box)], rng, noise)
    return image, masks[0]


@pytest.fixture
def disk_scene():
    box = BBox(34, 30, 94, 90, 3)
    image, gt = make_scene(box)
    return image, gt, box


@pytest.fixture
def corpus_manifest(tmp_path):
    """Small synthetic corpus (two large-shape and two small-shape images)"""
    return build_corpus(tmp_path / 'corpus', n_images=4, seed=7, size=64)
