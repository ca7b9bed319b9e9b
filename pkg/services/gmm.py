"""
Gaussian mixture colour models for GrabCut data terms
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from sklearn.cluster import KMeans

from models import Image, Trimap

logger = logging.getLogger(__name__)

COVARIANCE_EPSILON = 1e-2
KMEANS_MAX_ITERS = 20
_LOG_2PI = np.log(2.0 * np.pi)


class DegenerateTrimapError(ValueError):
    """Raised when one side of a trimap has no pixels to fit a model on"""


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    covariance: np.ndarray
    inverse: np.ndarray
    log_det: float

    @classmethod
    def build(cls, weight: float, mean, covariance) -> 'GaussianComponent':
        mean = np.asarray(mean, dtype=np.float64).reshape(3)
        covariance = np.asarray(covariance, dtype=np.float64).reshape(3, 3)
        # raises LinAlgError if the covariance is not positive-definite
        chol = np.linalg.cholesky(covariance)
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        return cls(float(weight), mean, covariance, np.linalg.inv(covariance), log_det)

    def with_weight(self, weight: float) -> 'GaussianComponent':
        return GaussianComponent(float(weight), self.mean, self.covariance, self.inverse, self.log_det)

    def log_density(self, pixels: np.ndarray) -> np.ndarray:
        """log N(pixel; mean, covariance) for an (N, 3) pixel array"""
        diff = np.asarray(pixels, dtype=np.float64).reshape(-1, 3) - self.mean
        mahalanobis = np.einsum('ij,jk,ik->i', diff, self.inverse, diff)
        return -0.5 * (3 * _LOG_2PI + self.log_det + mahalanobis)


@dataclass(frozen=True)
class GmmPair:
    foreground: Tuple[GaussianComponent, ...]
    background: Tuple[GaussianComponent, ...]

    def __post_init__(self):
        for side, model in (('foreground', self.foreground), ('background', self.background)):
            if len(model) < 1:
                raise ValueError(f"{side} model needs at least one component")
            total = sum(c.weight for c in model)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"{side} weights sum to {total}, expected 1")


def _as_pixels(pixels) -> np.ndarray:
    return np.asarray(pixels, dtype=np.float64).reshape(-1, 3)


def kmeans_init(pixels, k: int, seed: int) -> np.ndarray:
    """
    Seeded k-means returning one cluster label per pixel.

    ``k`` is clamped to the number of distinct colours.
    """
    points = _as_pixels(pixels)
    if points.shape[0] == 0:
        raise ValueError("k-means needs at least one pixel")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")

    distinct = np.unique(points, axis=0)
    if k > len(distinct):
        logger.debug(f"Clamping k from {k} to {len(distinct)} distinct colours")
        k = len(distinct)

    kmeans = KMeans(n_clusters=k, n_init=1, max_iter=KMEANS_MAX_ITERS, random_state=seed)
    return kmeans.fit_predict(points)


def fit_component(pixels, weight: float = 1.0) -> GaussianComponent:
    points = _as_pixels(pixels)
    if points.shape[0] == 0:
        raise ValueError("Cannot fit a component to zero pixels")
    mean = points.mean(axis=0)
    diff = points - mean
    covariance = diff.T @ diff / points.shape[0] + COVARIANCE_EPSILON * np.eye(3)
    return GaussianComponent.build(weight, mean, covariance)


def fit_model(pixels, labels: np.ndarray) -> Tuple[GaussianComponent, ...]:
    """One component per label value present; weights are the member fractions"""
    points = _as_pixels(pixels)
    components = []
    for cluster in np.unique(labels):
        members = points[labels == cluster]
        components.append(fit_component(members, members.shape[0] / points.shape[0]))
    return _normalized(components)


def _normalized(components) -> Tuple[GaussianComponent, ...]:
    total = sum(c.weight for c in components)
    return tuple(c.with_weight(c.weight / total) for c in components)


def component_log_likelihoods(model, pixels) -> np.ndarray:
    """(N, K) array of log(weight_k) + log N_k(pixel)"""
    points = _as_pixels(pixels)
    with np.errstate(divide='ignore'):
        return np.stack(
            [np.log(c.weight) + c.log_density(points) for c in model], axis=1
        )


def neg_log_likelihood(model, pixel) -> np.ndarray:
    """-log sum_k w_k N(pixel; mu_k, sigma_k); scalar for one pixel, array for many"""
    single = np.ndim(pixel) == 1
    per_component = component_log_likelihoods(model, pixel)
    energy = -np.logaddexp.reduce(per_component, axis=1)
    return float(energy[0]) if single else energy


def init_gmm_pair(image: Image, trimap: Trimap, k: int, seed: int) -> GmmPair:
    fg_pixels, bg_pixels = _side_pixels(image, trimap)
    fg_seed, bg_seed = np.random.SeedSequence(seed).generate_state(2)
    foreground = fit_model(fg_pixels, kmeans_init(fg_pixels, k, int(fg_seed)))
    background = fit_model(bg_pixels, kmeans_init(bg_pixels, k, int(bg_seed)))
    return GmmPair(foreground, background)


def _side_pixels(image: Image, trimap: Trimap):
    if (image.width, image.height) != (trimap.width, trimap.height):
        raise ValueError("Image and trimap dimensions differ")
    fg_side = trimap.foreground_side
    fg_pixels = image.pixels[fg_side].astype(np.float64)
    bg_pixels = image.pixels[~fg_side].astype(np.float64)
    if fg_pixels.shape[0] == 0 or bg_pixels.shape[0] == 0:
        raise DegenerateTrimapError(
            f"Trimap has {fg_pixels.shape[0]} foreground-side and {bg_pixels.shape[0]} background-side pixels"
        )
    return fg_pixels, bg_pixels


def data_energy(model, pixels) -> float:
    """Total neg_log_likelihood of ``pixels`` under ``model``; 0 for no pixels"""
    points = _as_pixels(pixels)
    if points.shape[0] == 0:
        return 0.0
    return float(np.sum(neg_log_likelihood(model, points)))


def _reassign_side(model, pixels: np.ndarray, side: str) -> Tuple[GaussianComponent, ...]:
    assignment = np.argmax(component_log_likelihoods(model, pixels), axis=1)
    refit = fit_model(pixels, assignment)
    # hard assignment plus a regularised refit can overshoot; keep the old model then
    if data_energy(refit, pixels) > data_energy(model, pixels):
        logger.debug(f"{side} refit rejected: data energy would increase")
        return tuple(model)
    return refit


def reassign_and_refit(pair: GmmPair, image: Image, trimap: Trimap) -> GmmPair:
    """
    Hard-assign each pixel to its most likely component on its side, then refit.

    A side keeps its previous model when the refit would raise that side's
    total data energy, so the energy over each side's pixels never increases.
    """
    fg_pixels, bg_pixels = _side_pixels(image, trimap)
    return GmmPair(
        _reassign_side(pair.foreground, fg_pixels, 'Foreground'),
        _reassign_side(pair.background, bg_pixels, 'Background'),
    )
