"""Depth noise: y_hat = alpha * y + eps.

alpha is Gamma(k, s) distributed and drawn once per image. eps is a zero-mean
Gaussian field whose spatial correlation comes from bicubically upsampling an
i.i.d. grid that is ``l`` times coarser than the image. Each pixel is then
rescaled so its marginal std is exactly ``sigma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .geometry import DepthImage

_KEYS_A = -0.5


@dataclass(frozen=True)
class NoiseParams:
    k: float = 5000.0
    s: float = 0.0002
    sigma: float = 0.001
    l: int = 6
    seed: int = 0
    per_pixel_alpha: bool = False

    def __post_init__(self):
        if not (self.k > 0 and self.s > 0):
            raise InvalidArgumentError("Gamma shape and scale must be positive")
        if not self.sigma >= 0:
            raise InvalidArgumentError("sigma must be non-negative")
        if int(self.l) != self.l or self.l < 1:
            raise InvalidArgumentError("correlation bandwidth l must be an integer >= 1")
        object.__setattr__(self, "l", int(self.l))

    def with_seed(self, seed: int) -> NoiseParams:
        return NoiseParams(self.k, self.s, self.sigma, self.l, int(seed), self.per_pixel_alpha)


def _keys(x: np.ndarray) -> np.ndarray:
    a = _KEYS_A
    x = np.abs(x)
    near = ((a + 2) * x - (a + 3)) * x * x + 1
    far = ((a * x - 5 * a) * x + 8 * a) * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def bicubic_matrix(n_out: int, n_in: int, factor: int) -> np.ndarray:
    """(n_out, n_in) weights that upsample by ``factor`` with pixel-centre alignment
    and clamped borders."""
    x = (np.arange(n_out) + 0.5) / factor - 0.5
    base = np.floor(x).astype(np.int64)
    m = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for off in range(-1, 3):
        j = base + off
        w = _keys(x - j)
        np.add.at(m, (rows, np.clip(j, 0, n_in - 1)), w)
    return m


def correlated_field(shape: tuple[int, int], sigma: float, l: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian field with marginal std ``sigma`` and correlation length ``l`` pixels."""
    h, w = shape
    gh, gw = math.ceil(h / l), math.ceil(w / l)
    grid = rng.standard_normal((gh, gw))
    ay = bicubic_matrix(h, gh, l)
    ax = bicubic_matrix(w, gw, l)
    field = ay @ grid @ ax.T
    # grid is i.i.d. so the variance at (i, j) is |ay_i|^2 |ax_j|^2
    scale = np.sqrt(np.outer((ay ** 2).sum(axis=1), (ax ** 2).sum(axis=1)))
    return sigma * field / scale


def draw_alpha(p: NoiseParams, rng: np.random.Generator, shape=None):
    return rng.gamma(p.k, p.s, size=shape)


def corrupt(img: DepthImage, p: NoiseParams, alpha: float | None = None) -> DepthImage:
    """Apply the noise model; invalid pixels stay 0 and negative results are clamped to 0.

    ``alpha`` overrides the Gamma draw (the field still uses the same stream
    position, so eps is identical with or without the override).
    """
    rng = np.random.default_rng(p.seed)
    y = img.data
    a = draw_alpha(p, rng, y.shape if p.per_pixel_alpha else None)
    if alpha is not None:
        a = alpha
    eps = correlated_field(y.shape, p.sigma, p.l, rng) if p.sigma > 0 else 0.0
    out = np.where(img.valid, np.maximum(a * y + eps, 0.0), 0.0)
    return DepthImage(out)


def viewpoint_seed(seed: int, index: int) -> int:
    return int(seed) ^ int(index)


def corrupt_views(images: list[DepthImage], p: NoiseParams) -> list[DepthImage]:
    return [corrupt(img, p.with_seed(viewpoint_seed(p.seed, i))) for i, img in enumerate(images)]


__all__ = ["NoiseParams", "bicubic_matrix", "correlated_field", "corrupt", "corrupt_views",
           "draw_alpha", "viewpoint_seed"]
