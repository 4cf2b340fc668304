"""Synthetic inputs for hermetic pipeline runs: a portrait-like source image,
grid-aligned elliptical face masks, and textured noise fields."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .imageops import L_MAX, GridGeometry


def smooth_noise(shape: tuple[int, int], sigma_px: float, amplitude: float,
                 seed: int) -> np.ndarray:
    """Zero-mean band-limited noise, max magnitude ~= amplitude."""
    rng = np.random.default_rng(seed)
    field = ndimage.gaussian_filter(rng.standard_normal(shape), sigma_px)
    peak = np.abs(field).max()
    if peak > 0:
        field = field / peak * amplitude
    return field


def _push_from_band(img: np.ndarray, center: float, half_width: float) -> np.ndarray:
    """Move values out of (center - hw, center + hw) so module means do not
    sit on the binarization threshold."""
    out = img.copy()
    low = (img < center) & (img > center - half_width)
    high = (img >= center) & (img < center + half_width)
    out[low] = center - half_width
    out[high] = center + half_width
    return out


def synthetic_portrait(side: int, seed: int = 0, tau: float = 128.0) -> np.ndarray:
    """Portrait-like grayscale image: bright face oval with dark features on
    a textured darker background; module-scale brightness kept clear of tau."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64) / side

    img = 70.0 + 50.0 * yy  # background gradient
    img += smooth_noise((side, side), side / 24.0, 22.0, seed + 1)

    cx, cy = 0.5 + 0.04 * (rng.random() - 0.5), 0.44 + 0.04 * (rng.random() - 0.5)
    rx, ry = 0.16, 0.21
    face = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    img[face] = 190.0 + 18.0 * smooth_noise((side, side), side / 30.0, 1.0,
                                            seed + 2)[face]

    for fx, fy, fr, val in (
        (cx - 0.06, cy - 0.05, 0.022, 60.0),   # eyes
        (cx + 0.06, cy - 0.05, 0.022, 60.0),
        (cx, cy + 0.10, 0.035, 95.0),          # mouth
    ):
        blob = ((xx - fx) ** 2 + (yy - fy) ** 2) <= fr ** 2
        img[blob] = val

    img = _push_from_band(img, tau, 26.0)
    return np.clip(img, 0.0, L_MAX)


def elliptical_module_mask(n: int, center: tuple[float, float] | None = None,
                           radii: tuple[float, float] = (6.5, 8.5)) -> np.ndarray:
    """Boolean n x n module mask: modules inside an ellipse (grid-aligned)."""
    if center is None:
        center = (n / 2.0, n / 2.0 - 1.5)
    rows, cols = np.mgrid[0:n, 0:n].astype(np.float64)
    cx, cy = center
    rx, ry = radii
    return ((cols + 0.5 - cx) / rx) ** 2 + ((rows + 0.5 - cy) / ry) ** 2 <= 1.0


def mask_image_from_modules(modules: np.ndarray, geom: GridGeometry,
                            canvas_shape: tuple[int, int]) -> np.ndarray:
    """Render a module-level mask as a 0/255 pixel image (grid-exact)."""
    a = geom.module_px
    img = np.zeros(canvas_shape, dtype=np.float64)
    px = np.kron(np.asarray(modules, dtype=np.float64), np.ones((a, a))) * 255.0
    img[geom.origin_y:geom.origin_y + px.shape[0],
        geom.origin_x:geom.origin_x + px.shape[1]] = px
    return img


def tone_shift(img: np.ndarray, tau: float = 128.0, dark_gain: float = 0.5,
               light_gain: float = 0.42) -> np.ndarray:
    """Contrast restyling that pushes every value away from tau: dark pixels
    get darker, light pixels lighter.  Module readings are preserved exactly,
    so this stands in for an identity-preserving restyle of the face region."""
    img = np.asarray(img, dtype=np.float64)
    out = img.copy()
    dark = img < tau
    out[dark] = img[dark] * dark_gain
    out[~dark] = L_MAX - (L_MAX - img[~dark]) * light_gain
    return np.clip(out, 0.0, L_MAX)


def blend_stand_in(blueprint_image: np.ndarray, source: np.ndarray,
                   blueprint_weight: float = 0.6) -> np.ndarray:
    """Hermetic substitute for an externally regenerated stylized image."""
    if not 0.0 <= blueprint_weight <= 1.0:
        raise ValueError("blueprint_weight must be in [0, 1]")
    return np.clip(
        blueprint_weight * np.asarray(blueprint_image, dtype=np.float64)
        + (1.0 - blueprint_weight) * np.asarray(source, dtype=np.float64),
        0.0, L_MAX,
    )
