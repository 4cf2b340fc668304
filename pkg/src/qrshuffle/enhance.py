"""Scannability enhancement: marker harmonization, the spatially dynamic
code loss, and the gradient-descent refinement loop."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import matrix as mx
from .features import FeatureExtractor, LevelStats, _w2_value_grad
from .imageops import L_MAX, GridGeometry
from .qrspec import QrSpec
from .reshuffle import Blueprint
from .scanner import count_errors, extract_modules, gaussian_kernel


@dataclass
class LossConfig:
    tau: float = 128.0
    marker_margin: float = 0.8          # lambda in the harmonization bound
    sigma_f: float = 1.5
    sigma_b: float = 3.0
    w_f: float = 1.0
    w_b: float = 15.0
    iterations: int = 300
    learning_rate: float = 0.002        # on [0,1]-normalized pixels
    aesthetic_weight: float = 1.0
    feature_levels: int = 3
    early_stop: bool = True
    early_stop_rel: float = 1e-4
    early_stop_window: int = 20

    def __post_init__(self):
        if not (self.sigma_f > 0 and self.sigma_b > 0):
            raise ValueError("sigma_f, sigma_b must be > 0")
        if self.w_f < 0 or self.w_b < 0:
            raise ValueError("w_f, w_b must be >= 0")
        if not 0.0 < self.marker_margin < 1.0:
            raise ValueError("marker margin must be in (0, 1)")
        if not 0.0 < self.tau < L_MAX:
            raise ValueError("tau must be in (0, L)")

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "marker_margin": self.marker_margin,
            "sigma_f": self.sigma_f,
            "sigma_b": self.sigma_b,
            "w_f": self.w_f,
            "w_b": self.w_b,
            "iterations": self.iterations,
            "learning_rate": self.learning_rate,
            "aesthetic_weight": self.aesthetic_weight,
            "feature_levels": self.feature_levels,
            "early_stop": self.early_stop,
        }


def harmonize_markers(image: np.ndarray, matrix: mx.ModuleMatrix,
                      markers: np.ndarray, geom: GridGeometry,
                      tau: float = 128.0, margin: float = 0.8) -> np.ndarray:
    """Clamp marker-module pixels past tau*(1 +/- margin) so locators survive
    styling.  Idempotent; non-marker pixels are untouched."""
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must be in (0, 1)")
    image = np.asarray(image, dtype=np.float64)
    out = image.copy()
    a, n = geom.module_px, geom.n
    hi = tau * (1.0 + margin)
    lo = tau * (1.0 - margin)
    marker_px = np.kron(np.asarray(markers, dtype=bool),
                        np.ones((a, a), dtype=bool))
    light_px = np.kron(matrix.values.astype(bool), np.ones((a, a), dtype=bool))
    region = out[geom.origin_y:geom.origin_y + n * a,
                 geom.origin_x:geom.origin_x + n * a]
    region[marker_px & light_px] = np.maximum(region[marker_px & light_px], hi)
    region[marker_px & ~light_px] = np.minimum(region[marker_px & ~light_px], lo)
    return np.clip(out, 0.0, L_MAX)


def enforce_quiet_zone(image: np.ndarray, geom: GridGeometry,
                       tau: float = 128.0, margin: float = 0.8) -> np.ndarray:
    """Clamp every pixel outside the code region past tau*(1 + margin).

    Decoders require a light quiet zone around the symbol; styling must not
    darken it. Idempotent; code-region pixels are untouched.
    """
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must be in (0, 1)")
    out = np.asarray(image, dtype=np.float64).copy()
    a, n = geom.module_px, geom.n
    code = np.zeros(out.shape, dtype=bool)
    code[geom.origin_y:geom.origin_y + n * a,
         geom.origin_x:geom.origin_x + n * a] = True
    out[~code] = np.maximum(out[~code], tau * (1.0 + margin))
    return np.clip(out, 0.0, L_MAX)


class CodeLoss:
    """Spatially dynamic code loss on [0,1]-normalized images.

    Per module j the Gaussian-weighted discrepancy to the blueprint is
    charged with weight w_f / w_b and kernel sigma_f / sigma_b by region:

        L_c = sum_j w(j) * avg(|Z(theta_j) - I_b(theta_j)| . G(j))

    The loss is always on: the kernel/weight pair sets the per-pixel pull
    toward the blueprint against the aesthetic gradient, so the small
    (w_f, sigma_f) pair regulates only the central region of face modules
    while the background is equalized module-wide.
    """

    def __init__(self, blueprint: Blueprint, config: LossConfig):
        self.geom = blueprint.geometry
        self.config = config
        self.n = self.geom.n
        a = self.geom.module_px
        self.target = blueprint.target_matrix.values.astype(np.float64)
        face = blueprint.regions.face
        self.face = face
        self.kernel_f = gaussian_kernel(a, config.sigma_f)
        self.kernel_b = gaussian_kernel(a, config.sigma_b)
        # per-module kernel and weight; sampling kernels stay sum-normalized
        # (weighted averages), the loss uses unit-peak kernels so w * G is
        # the per-pixel pull strength
        self.kernels = np.where(face[:, :, None, None], self.kernel_f,
                                self.kernel_b)
        self.kernels_loss = np.where(
            face[:, :, None, None],
            self.kernel_f / self.kernel_f.max(),
            self.kernel_b / self.kernel_b.max(),
        )
        self.weights = np.where(face, config.w_f, config.w_b)
        self.blueprint01 = np.asarray(blueprint.image, dtype=np.float64) / L_MAX
        self.tau01 = config.tau / L_MAX
        self._bp_patches = self._patches(self.blueprint01)

    def _patches(self, img01: np.ndarray) -> np.ndarray:
        g = self.geom
        a, n = g.module_px, g.n
        sub = img01[g.origin_y:g.origin_y + n * a, g.origin_x:g.origin_x + n * a]
        return sub.reshape(n, a, n, a).transpose(0, 2, 1, 3)

    def module_samples(self, img01: np.ndarray) -> np.ndarray:
        return np.einsum("ijkl,ijkl->ij", self._patches(img01), self.kernels)

    def active_modules(self, img01: np.ndarray) -> np.ndarray:
        """Diagnostic: modules whose soft sample misreads the target bit."""
        target = self.target.astype(bool)
        return (self.module_samples(img01) >= self.tau01) != target

    def __call__(self, img01: np.ndarray) -> tuple[float, np.ndarray]:
        zp = self._patches(img01)
        diff = zp - self._bp_patches
        d = np.einsum("ijkl,ijkl->ij", np.abs(diff), self.kernels_loss)
        contrib = self.weights * d
        value = float(contrib.sum())

        gpatch = self.weights[:, :, None, None] * np.sign(diff) \
            * self.kernels_loss
        grad = np.zeros_like(img01)
        g = self.geom
        a, n = g.module_px, g.n
        grad[g.origin_y:g.origin_y + n * a, g.origin_x:g.origin_x + n * a] = \
            gpatch.transpose(0, 2, 1, 3).reshape(n * a, n * a)
        return value, grad


@dataclass
class TraceEntry:
    iteration: int
    loss: float
    l_code: float
    l_aesthetic: float
    e: int
    e_f: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "iteration": self.iteration,
                "loss": self.loss,
                "l_code": self.l_code,
                "l_aesthetic": self.l_aesthetic,
                "e": self.e,
                "e_f": self.e_f,
            }
        )


@dataclass
class EnhanceResult:
    image: np.ndarray
    trace: list[TraceEntry] = field(repr=False)

    def final(self) -> TraceEntry:
        return self.trace[-1]


def enhance(start: np.ndarray, blueprint: Blueprint, reference: np.ndarray,
            config: LossConfig, spec: QrSpec,
            reference_stats: list[LevelStats] | None = None) -> EnhanceResult:
    """Gradient descent on the image, minimizing the code loss plus the
    aesthetic statistics loss, clamped to [0, L] each step.

    Plain (un-normalized) descent is deliberate: the per-pixel step is
    proportional to w * G, so the adaptive weight/kernel pairs directly set
    how strongly each region is pulled toward the blueprint.

    `reference` is the harmonized stage-2 image; `reference_stats` may
    replace its built-in feature statistics (e.g. from a .fstats file).
    """
    start = np.asarray(start, dtype=np.float64)
    if start.shape != blueprint.image.shape:
        raise ValueError("start and blueprint shapes differ")
    code_loss = CodeLoss(blueprint, config)
    extractor = FeatureExtractor(config.feature_levels)
    if reference_stats is None:
        reference_stats = extractor.stats(np.asarray(reference) / L_MAX)

    z = start / L_MAX
    lr = config.learning_rate
    trace: list[TraceEntry] = []

    def aesthetic(z_img):
        stats, cache = extractor.forward(z_img)
        total = 0.0
        grads = []
        for s, r in zip(stats, reference_stats):
            val, dmu, dcov = _w2_value_grad(s.mean, s.cov, r.mean, r.cov)
            total += val
            grads.append((dmu, dcov))
        return total, extractor.backward(cache, grads)

    def error_counts(z_img):
        observed = extract_modules(z_img * L_MAX, blueprint.geometry, spec,
                                   config.tau)
        rep = count_errors(observed, blueprint.target_matrix, spec,
                           blueprint.regions.face)
        return rep.e, rep.e_f

    prev_losses: list[float] = []
    for it in range(config.iterations):
        lc, gc = code_loss(z)
        la, ga = aesthetic(z)
        total = lc + config.aesthetic_weight * la
        if not np.isfinite(total):
            raise FloatingPointError(
                f"non-finite loss at iteration {it}: l_code={lc}, l_aesthetic={la}"
            )
        e, e_f = error_counts(z)
        trace.append(TraceEntry(it, total, lc, la, e, e_f))

        if config.early_stop:
            prev_losses.append(total)
            if e == 0 and len(prev_losses) > config.early_stop_window:
                window = prev_losses[-config.early_stop_window - 1:]
                base = max(abs(window[0]), 1e-12)
                if abs(window[-1] - window[0]) / base < config.early_stop_rel:
                    break

        grad = gc + config.aesthetic_weight * ga
        z = np.clip(z - lr * grad, 0.0, 1.0)

    # final state entry
    lc, gc = code_loss(z)
    la, _ = aesthetic(z)
    e, e_f = error_counts(z)
    trace.append(TraceEntry(len(trace), lc + config.aesthetic_weight * la,
                            lc, la, e, e_f))
    return EnhanceResult(z * L_MAX, trace)
