"""
Run configuration: CLI flags layered over environment defaults
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from services.grabcut import GrabCutConfig
from services.pipeline import DEFAULT_SIZE_AREA, DEFAULT_VALIDITY_IOU

ENV_PREFIX = 'BOXSEG_'


def env_defaults() -> dict:
    """Defaults read from BOXSEG_* variables (a .env file is honoured)"""
    load_dotenv()
    return {
        'seed': int(os.environ.get(f'{ENV_PREFIX}SEED', 0)),
        'workers': int(os.environ.get(f'{ENV_PREFIX}WORKERS', 1)),
        'gamma': float(os.environ.get(f'{ENV_PREFIX}GAMMA', 50.0)),
        'gmm_k': int(os.environ.get(f'{ENV_PREFIX}GMM_K', 5)),
        'max_iters': int(os.environ.get(f'{ENV_PREFIX}MAX_ITERS', 5)),
        'validity_iou': float(os.environ.get(f'{ENV_PREFIX}VALIDITY_IOU', DEFAULT_VALIDITY_IOU)),
        'size_area': int(os.environ.get(f'{ENV_PREFIX}SIZE_AREA', DEFAULT_SIZE_AREA)),
        'log_level': os.environ.get(f'{ENV_PREFIX}LOG', 'INFO').upper(),
    }


@dataclass
class RunConfig:
    manifest: Optional[Path] = None
    out: Path = field(default_factory=lambda: Path('boxseg_out'))
    seed: int = 0
    workers: int = 1
    gamma: float = 50.0
    gmm_k: int = 5
    max_iters: int = 5
    validity_iou: float = DEFAULT_VALIDITY_IOU
    size_area: int = DEFAULT_SIZE_AREA
    log_level: str = 'INFO'
    subcommand: Optional[str] = None

    def __post_init__(self):
        if self.manifest is not None:
            self.manifest = Path(self.manifest)
        self.out = Path(self.out)
        if not 0.0 <= self.validity_iou <= 1.0:
            raise ValueError(f"validity_iou must be in [0, 1], got {self.validity_iou}")
        if self.size_area < 1:
            raise ValueError(f"size_area must be >= 1, got {self.size_area}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.gmm_k < 1:
            raise ValueError(f"gmm_k must be >= 1, got {self.gmm_k}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")

    def grabcut_config(self) -> GrabCutConfig:
        return GrabCutConfig(k=self.gmm_k, gamma=self.gamma, max_iters=self.max_iters, seed=self.seed)

    def require_manifest(self) -> Path:
        if self.manifest is None:
            raise ValueError("--manifest is required for this command")
        return self.manifest
