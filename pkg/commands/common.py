"""
Helpers shared by the subcommands: manifest loading, error translation and
the standard output locations under --out
"""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import List

import click

from config import RunConfig
from manifest_parser import CorpusManifest, load_manifest
from mask_store import list_stems, load_masks, sidecar_path
from models import MaskInstance
from utils import staged_output

logger = logging.getLogger(__name__)

MASKS_DIR = 'masks'
SMALL_BRANCH_DIR = 'small_branch'
FUSED_DIR = 'fused'
OVERLAYS_DIR = 'overlays'
PARTITION_FILE = 'partition.json'


@contextmanager
def domain_errors():
    """Turn domain and I/O failures into a one-line ClickException (exit status 1)"""
    try:
        yield
    except click.ClickException:
        raise
    except (ValueError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        raise click.ClickException(str(e)) from e


@contextmanager
def command_output(config: RunConfig):
    """Staged --out directory wrapped in the error translation"""
    with domain_errors():
        with staged_output(config.out) as staging:
            yield staging


def load_corpus(config: RunConfig, check_files: bool = True) -> CorpusManifest:
    with domain_errors():
        return load_manifest(config.require_manifest(), check_files=check_files)


def require_directory(path, what: str) -> Path:
    path = Path(path)
    if not path.is_dir():
        raise click.ClickException(f"missing {what}: {path} is not a directory")
    return path


def masks_or_empty(directory, image_stem: str) -> List[MaskInstance]:
    """Masks stored for ``image_stem``; an image with no sidecar has no masks"""
    if not sidecar_path(directory, image_stem).exists():
        return []
    masks, _ = load_masks(directory, image_stem)
    return masks


def stems_in(*directories) -> List[str]:
    stems = set()
    for directory in directories:
        stems.update(list_stems(directory))
    return sorted(stems)
