"""Grayscale image primitives: luminance, dual-threshold binarization, grids.

Images are 2-D float64 numpy arrays with values in [0, L], L = 255.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

L_MAX = 255.0

INDETERMINATE = 2  # ternary binarization marker


@dataclass(frozen=True)
class GridGeometry:
    """Pixel layout of the module grid: axis-aligned, integer module size."""

    origin_x: int
    origin_y: int
    module_px: int
    n: int

    def __post_init__(self):
        if self.module_px < 3:
            raise ValueError("module size must be >= 3 px")

    @property
    def side_px(self) -> int:
        return self.n * self.module_px

    def covers(self, shape: tuple[int, int]) -> bool:
        h, w = shape
        return (
            self.origin_x >= 0
            and self.origin_y >= 0
            and self.origin_y + self.side_px <= h
            and self.origin_x + self.side_px <= w
        )


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec. 601 luminance of an HxWx3 image."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an HxWx3 image")
    gray = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(gray, 0.0, L_MAX)


def binarize(gray: np.ndarray, alpha: float) -> np.ndarray:
    """Dual-threshold ternary binarization.

    Returns 0 (dark), 1 (light) or INDETERMINATE per pixel with
    T_b = L(1-alpha)/2 and T_w = L(1+alpha)/2.  At alpha = 0 the single
    threshold uses >= T -> light, matching module extraction.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    gray = np.asarray(gray, dtype=np.float64)
    if alpha == 0.0:
        return (gray >= L_MAX / 2).astype(np.uint8)
    t_b = L_MAX * (1 - alpha) / 2
    t_w = L_MAX * (1 + alpha) / 2
    out = np.full(gray.shape, INDETERMINATE, dtype=np.uint8)
    out[gray < t_b] = 0
    out[gray > t_w] = 1
    return out


def resolve_indeterminate(ternary: np.ndarray) -> np.ndarray:
    """Permissive-retry fallback: indeterminate pixels resolve at L/2.

    Only meaningful when the caller still has the grayscale; here we model
    the retry by mapping indeterminate to light (the midpoint convention is
    applied by callers that keep the gray image; see `binarize_resolved`).
    """
    out = ternary.copy()
    out[out == INDETERMINATE] = 1
    return out


def binarize_resolved(gray: np.ndarray, alpha: float) -> np.ndarray:
    """Binary {0,1} view: dual thresholds, ties resolved at the L/2 midpoint."""
    tern = binarize(gray, alpha)
    mid = (np.asarray(gray, dtype=np.float64) >= L_MAX / 2).astype(np.uint8)
    out = tern.copy()
    ind = tern == INDETERMINATE
    out[ind] = mid[ind]
    return out


def resample_to_grid(image: np.ndarray, n: int, quiet_zone: int,
                     module_px: int | None = None) -> tuple[np.ndarray, GridGeometry]:
    """Resample so modules tile the raster exactly.

    Chooses integer module size a = round(W / (n + 2*quiet_zone)) unless given,
    resizes to side a*(n + 2*quiet_zone), and returns the image plus the
    geometry of the code region (origin just inside the quiet zone).
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[:2]
    total = n + 2 * quiet_zone
    a = module_px if module_px is not None else max(3, round(w / total))
    side = a * total
    if (h, w) != (side, side):
        image = cv2.resize(image, (side, side), interpolation=cv2.INTER_AREA)
    geom = GridGeometry(quiet_zone * a, quiet_zone * a, a, n)
    return np.clip(image, 0.0, L_MAX), geom


def save_gray_png(path, gray: np.ndarray) -> None:
    from PIL import Image

    arr = np.clip(np.round(np.asarray(gray, dtype=np.float64)), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def load_gray_png(path) -> np.ndarray:
    from PIL import Image

    img = Image.open(path)
    if img.mode in ("RGB", "RGBA"):
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
        return luminance(rgb)
    return np.asarray(img.convert("L"), dtype=np.float64)
