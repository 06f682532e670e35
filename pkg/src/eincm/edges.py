"""Edge images from grayscale frames.

The pipeline is denoise -> CLAHE -> sharpen -> bilateral -> Canny ->
smoothing. Filtering primitives come from OpenCV; the composition, the
smoothing back-ends and the value conventions live here.
"""
from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

from .errors import InvalidInputError


@dataclass(eq=False)
class GrayImage:
    pixels: np.ndarray  # (H, W) float64 in [0, 255]
    t: float = 0.0


@dataclass(eq=False)
class EdgeImage:
    pixels: np.ndarray  # (H, W) float64 in [0, 1]
    t: float = 0.0


@dataclass(frozen=True)
class EdgeConfig:
    canny_low: float = 100.0
    canny_high: float = 200.0
    smoothing: str = "gaussian"  # "gaussian" or "iedt"
    gaussian_k: int = 1
    iedt_lambda: float = 2.0
    clahe_clip: float = 2.0
    clahe_tiles: int = 8
    nlm_strength: float = 3.0
    sharpen_amount: float = 1.0
    sharpen_sigma: float = 1.0
    bilateral_spatial_sigma: float = 2.0
    bilateral_range_sigma: float = 25.0

    def __post_init__(self):
        if not self.canny_low < self.canny_high:
            raise InvalidInputError("canny_low must be below canny_high")
        if self.smoothing not in ("gaussian", "iedt"):
            raise InvalidInputError(f"unknown edge smoothing {self.smoothing!r}")
        if self.gaussian_k < 1 or self.gaussian_k % 2 == 0:
            raise InvalidInputError("gaussian_k must be odd and >= 1")
        if not self.iedt_lambda > 0:
            raise InvalidInputError("iedt_lambda must be positive")
        if self.clahe_tiles < 1:
            raise InvalidInputError("clahe_tiles must be >= 1")


def _as_u8(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(pixels), 0, 255).astype(np.uint8)


def denoise_nlm(img: GrayImage, strength: float) -> GrayImage:
    if strength <= 0:
        return GrayImage(np.array(img.pixels, dtype=np.float64), img.t)
    out = cv2.fastNlMeansDenoising(_as_u8(img.pixels), None, h=float(strength),
                                   templateWindowSize=7, searchWindowSize=21)
    return GrayImage(out.astype(np.float64), img.t)


def clahe(img: GrayImage, clip: float, tiles: int) -> GrayImage:
    if tiles < 1:
        raise InvalidInputError("tiles must be >= 1")
    op = cv2.createCLAHE(clipLimit=float(clip), tileGridSize=(int(tiles), int(tiles)))
    return GrayImage(op.apply(_as_u8(img.pixels)).astype(np.float64), img.t)


def sharpen(img: GrayImage, amount: float, sigma: float = 1.0, clamp: bool = True) -> GrayImage:
    """Unsharp mask ``in + amount * (in - blur(in))``."""
    if amount < 0:
        raise InvalidInputError("sharpen amount must be >= 0")
    src = np.asarray(img.pixels, dtype=np.float64)
    if amount == 0:
        return GrayImage(src.copy(), img.t)
    blurred = ndimage.gaussian_filter(src, sigma, mode="nearest")
    out = src + amount * (src - blurred)
    if clamp:
        out = np.clip(out, 0.0, 255.0)
    return GrayImage(out, img.t)


def bilateral(img: GrayImage, spatial_sigma: float, range_sigma: float) -> GrayImage:
    if not (spatial_sigma > 0 and range_sigma > 0):
        raise InvalidInputError("bilateral sigmas must be positive")
    d = 2 * int(np.ceil(2 * spatial_sigma)) + 1
    src = np.asarray(img.pixels, dtype=np.float32)
    out = cv2.bilateralFilter(src, d, float(range_sigma), float(spatial_sigma),
                              borderType=cv2.BORDER_REPLICATE)
    return GrayImage(out.astype(np.float64), img.t)


def canny(img: GrayImage, low: float, high: float) -> np.ndarray:
    """Binary edge map (uint8 0/1): 3x3 Sobel, L2 magnitude, 8-connected hysteresis."""
    if not low < high:
        raise InvalidInputError("low threshold must be below high threshold")
    edges = cv2.Canny(_as_u8(img.pixels), float(low), float(high), apertureSize=3, L2gradient=True)
    return (edges > 0).astype(np.uint8)


def smooth_edges_gaussian(edge_map: np.ndarray, k: int, t: float = 0.0) -> EdgeImage:
    if k < 1 or k % 2 == 0:
        raise InvalidInputError("kernel size must be odd and >= 1")
    m = np.asarray(edge_map, dtype=np.float64)
    if k > 1:
        m = cv2.GaussianBlur(m, (k, k), 0, borderType=cv2.BORDER_CONSTANT)
    peak = m.max() if m.size else 0.0
    if peak > 0:
        m = m / peak
    return EdgeImage(m, t)


def smooth_edges_iedt(edge_map: np.ndarray, lam: float, t: float = 0.0) -> EdgeImage:
    """Inverse exponential distance transform ``exp(-d / lam)``."""
    if not lam > 0:
        raise InvalidInputError("lambda must be positive")
    m = np.asarray(edge_map) > 0
    if not m.any():
        return EdgeImage(np.zeros(m.shape), t)
    d = ndimage.distance_transform_edt(~m)
    return EdgeImage(np.exp(-d / lam), t)


def extract_edges(img: GrayImage, cfg: EdgeConfig = EdgeConfig()) -> EdgeImage:
    x = denoise_nlm(img, cfg.nlm_strength)
    x = clahe(x, cfg.clahe_clip, cfg.clahe_tiles)
    x = sharpen(x, cfg.sharpen_amount, cfg.sharpen_sigma)
    x = bilateral(x, cfg.bilateral_spatial_sigma, cfg.bilateral_range_sigma)
    edge_map = canny(x, cfg.canny_low, cfg.canny_high)
    if cfg.smoothing == "iedt":
        return smooth_edges_iedt(edge_map, cfg.iedt_lambda, img.t)
    return smooth_edges_gaussian(edge_map, cfg.gaussian_k, img.t)
