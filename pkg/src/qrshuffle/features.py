"""Feature statistics and the Gaussian W2 aesthetic loss.

A fixed bank of small derivative filters over a Gaussian pyramid stands in
for learned features: per level we keep channel means and covariances, and
the loss is the closed-form L2-Wasserstein distance between Gaussians

    ||mu_1 - mu_2||^2 + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2}).

All gradients are analytic; every linear step (filtering, pyramid
downsampling, boundary crop) is backpropagated through its exact adjoint.
Zero padding is used throughout so the adjoint of correlation is
convolution; a fixed boundary crop keeps filter responses exact on the
interior (uniform input -> exactly zero derivative responses).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import cv2
import numpy as np

_SQRT2 = np.sqrt(2.0)

# 8 zero-sum 3x3 derivative/orientation filters (fixed constants)
FILTER_BANK = np.array(
    [
        [[0, 0, 0], [-0.5, 0, 0.5], [0, 0, 0]],          # d/dx
        [[0, -0.5, 0], [0, 0, 0], [0, 0.5, 0]],          # d/dy
        [[0, 0, 0], [1, -2, 1], [0, 0, 0]],              # d2/dx2
        [[0, 1, 0], [0, -2, 0], [0, 1, 0]],              # d2/dy2
        [[0.25, 0, -0.25], [0, 0, 0], [-0.25, 0, 0.25]],  # d2/dxdy
        [[0, 1, 0], [1, -4, 1], [0, 1, 0]],              # laplacian
        [[-0.5, 0, 0], [0, 0, 0], [0, 0, 0.5]],          # diagonal /
        [[0, 0, -0.5], [0, 0, 0], [0.5, 0, 0]],          # diagonal \
    ],
    dtype=np.float64,
)

N_CHANNELS = FILTER_BANK.shape[0]

_BLUR_1D = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

# zero-pad boundary contamination never exceeds 4 px per level; +1 filter
# radius, rounded up
CROP = 6


class FeatureStatsError(ValueError):
    pass


@dataclass
class LevelStats:
    mean: np.ndarray  # (C,)
    cov: np.ndarray  # (C, C)


def _correlate(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return cv2.filter2D(img, -1, kernel, borderType=cv2.BORDER_CONSTANT)


def _convolve(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return cv2.filter2D(img, -1, kernel[::-1, ::-1].copy(),
                        borderType=cv2.BORDER_CONSTANT)


def _blur(img: np.ndarray) -> np.ndarray:
    return cv2.sepFilter2D(img, -1, _BLUR_1D, _BLUR_1D,
                           borderType=cv2.BORDER_CONSTANT)


def _blur_adjoint(img: np.ndarray) -> np.ndarray:
    # symmetric kernel + zero padding: self-adjoint
    return _blur(img)


def _min_side_for_levels(levels: int) -> int:
    need = 2 * CROP + 4
    return need * (2 ** (levels - 1))


class FeatureExtractor:
    """Pyramid + filter-bank statistics with exact analytic backprop."""

    def __init__(self, levels: int = 3):
        if levels < 1:
            raise FeatureStatsError("levels must be >= 1")
        self.levels = levels

    def _check(self, image: np.ndarray) -> np.ndarray:
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 2:
            raise FeatureStatsError("expected a 2-D grayscale image")
        if min(image.shape) < 2 ** self.levels:
            raise FeatureStatsError(
                f"image side {min(image.shape)} too small for {self.levels} levels"
            )
        if min(image.shape) < _min_side_for_levels(self.levels):
            raise FeatureStatsError(
                f"image side {min(image.shape)} below minimum "
                f"{_min_side_for_levels(self.levels)} for {self.levels} levels"
            )
        return image

    def forward(self, image: np.ndarray):
        """Returns (stats per level, cache for backward)."""
        image = self._check(image)
        pyramid = [image]
        for _ in range(self.levels - 1):
            pyramid.append(_blur(pyramid[-1])[::2, ::2])
        stats: list[LevelStats] = []
        caches = []
        for lvl in pyramid:
            maps = np.stack(
                [_correlate(lvl, k) for k in FILTER_BANK]
            )
            cropped = maps[:, CROP:-CROP, CROP:-CROP]
            C, hh, ww = cropped.shape
            F = cropped.reshape(C, hh * ww).T  # N x C
            mu = F.mean(axis=0)
            Fc = F - mu
            cov = Fc.T @ Fc / F.shape[0]
            stats.append(LevelStats(mu, cov))
            caches.append((F.shape[0], Fc, (hh, ww), lvl.shape))
        return stats, (pyramid, caches)

    def stats(self, image: np.ndarray) -> list[LevelStats]:
        return self.forward(image)[0]

    def backward(self, cache, grads: list[tuple[np.ndarray, np.ndarray]]
                 ) -> np.ndarray:
        """Map per-level (dL/dmu, dL/dcov) back to dL/dimage."""
        pyramid, caches = cache
        level_grads = []
        for (N, Fc, (hh, ww), lvl_shape), (dmu, dcov) in zip(caches, grads):
            dcov_sym = 0.5 * (dcov + dcov.T)
            dFc = (2.0 / N) * (Fc @ dcov_sym)
            dF = dFc - dFc.mean(axis=0) + dmu / N
            cropped_grad = dF.T.reshape(N_CHANNELS, hh, ww)
            g = np.zeros(lvl_shape)
            for c in range(N_CHANNELS):
                emb = np.zeros(lvl_shape)
                emb[CROP:-CROP, CROP:-CROP] = cropped_grad[c]
                g += _convolve(emb, FILTER_BANK[c])
            level_grads.append(g)
        # collapse the pyramid from the deepest level up
        for k in range(self.levels - 1, 0, -1):
            up = np.zeros(pyramid[k - 1].shape)
            up[::2, ::2] = level_grads[k]
            level_grads[k - 1] += _blur_adjoint(up)
        return level_grads[0]


def _sym_sqrt(mat: np.ndarray, eps: float = 1e-12):
    w, v = np.linalg.eigh(0.5 * (mat + mat.T))
    w = np.clip(w, eps, None)
    return (v * np.sqrt(w)) @ v.T, (v / np.sqrt(w)) @ v.T


def w2_gaussian(mu1, cov1, mu2, cov2) -> float:
    """Closed-form squared L2-Wasserstein distance between Gaussians."""
    s2h, _ = _sym_sqrt(cov2)
    m = s2h @ cov1 @ s2h
    mh, _ = _sym_sqrt(m)
    d = float(np.sum((mu1 - mu2) ** 2) + np.trace(cov1) + np.trace(cov2)
              - 2.0 * np.trace(mh))
    return max(d, 0.0)


def _w2_value_grad(mu_z, cov_z, mu_r, cov_r):
    """W2^2 plus gradients with respect to (mu_z, cov_z)."""
    srh, _ = _sym_sqrt(cov_r)
    m = srh @ cov_z @ srh
    mh, mih = _sym_sqrt(m)
    value = float(np.sum((mu_z - mu_r) ** 2) + np.trace(cov_z) + np.trace(cov_r)
                  - 2.0 * np.trace(mh))
    dmu = 2.0 * (mu_z - mu_r)
    dcov = np.eye(len(mu_z)) - srh @ mih @ srh
    return max(value, 0.0), dmu, 0.5 * (dcov + dcov.T)


def aesthetic_loss(image: np.ndarray,
                   reference: "np.ndarray | list[LevelStats]",
                   levels: int = 3) -> tuple[float, np.ndarray]:
    """Sum of per-level Gaussian W2 distances and its gradient w.r.t. image.

    `reference` is either a same-geometry image or precomputed statistics
    (e.g. loaded from a .fstats file).
    """
    extractor = FeatureExtractor(levels)
    if isinstance(reference, np.ndarray):
        ref_stats = extractor.stats(reference)
    else:
        ref_stats = reference
    stats, cache = extractor.forward(image)
    if len(ref_stats) != len(stats):
        raise FeatureStatsError(
            f"reference has {len(ref_stats)} levels, expected {len(stats)}"
        )
    total = 0.0
    grads = []
    for s, r in zip(stats, ref_stats):
        if s.mean.shape != r.mean.shape:
            raise FeatureStatsError("reference channel count mismatch")
        v, dmu, dcov = _w2_value_grad(s.mean, s.cov, r.mean, r.cov)
        total += v
        grads.append((dmu, dcov))
    grad_img = extractor.backward(cache, grads)
    return total, grad_img


# ---------------------------------------------------------------------------
# .fstats file format: one UTF-8 JSON header line, then little-endian float32
# body (per layer: mean vector, then row-major covariance matrix).
# ---------------------------------------------------------------------------

FSTATS_FORMAT_VERSION = 1


def write_fstats(path, layers: list[tuple[str, np.ndarray, np.ndarray]],
                 image_hash: str = "") -> None:
    header = {
        "format_version": FSTATS_FORMAT_VERSION,
        "layers": [
            {"name": name, "channels": int(len(mu))} for name, mu, _ in layers
        ],
        "image_sha256": image_hash,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for _, mu, cov in layers:
            if cov.shape != (len(mu), len(mu)):
                raise FeatureStatsError("covariance shape mismatch")
            fh.write(np.asarray(mu, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(cov, dtype="<f4").tobytes())


def read_fstats(path) -> tuple[dict, list[LevelStats]]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FeatureStatsError(f"malformed .fstats header: {exc}") from exc
        if header.get("format_version") != FSTATS_FORMAT_VERSION:
            raise FeatureStatsError("unsupported .fstats format version")
        body = fh.read()
    expected = sum(4 * (l["channels"] + l["channels"] ** 2)
                   for l in header["layers"])
    if len(body) != expected:
        raise FeatureStatsError(
            f"body length {len(body)} does not match header ({expected})"
        )
    stats = []
    pos = 0
    for layer in header["layers"]:
        c = layer["channels"]
        mu = np.frombuffer(body, dtype="<f4", count=c, offset=pos).astype(np.float64)
        pos += 4 * c
        cov = np.frombuffer(body, dtype="<f4", count=c * c, offset=pos)
        cov = cov.astype(np.float64).reshape(c, c)
        pos += 4 * c * c
        if np.abs(cov - cov.T).max() > 1e-5:
            raise FeatureStatsError("covariance matrix not symmetric")
        stats.append(LevelStats(mu, 0.5 * (cov + cov.T)))
    return header, stats


def image_sha256(image: np.ndarray) -> str:
    arr = np.clip(np.round(np.asarray(image, dtype=np.float64)), 0, 255)
    return hashlib.sha256(arr.astype(np.uint8).tobytes()).hexdigest()
