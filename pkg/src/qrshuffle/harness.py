"""Scan-robustness simulation: seeded image perturbations, the full
locate + decode path, and success-rate grids."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import cv2
import numpy as np

from .imageops import L_MAX, binarize_resolved
from .locate import LocateError, locate_finder, rectify
from .qrspec import QrSpec
from .scanner import DecodeError, decode_message, extract_modules

REPORT_SCHEMA_VERSION = 1

# the "3 second scan" analog: one decode attempt per binarization strictness
ALPHA_ATTEMPTS = (0.0, 0.1, 0.2)


@dataclass(frozen=True)
class PerturbSpec:
    scale: float = 1.0
    blur_sigma: float = 0.0
    tilt_degrees: float = 0.0
    brightness_offset: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.scale <= 1.0:
            raise ValueError("scale must be in (0, 1]")
        if not 0.0 <= self.tilt_degrees <= 60.0:
            raise ValueError("tilt_degrees must be in [0, 60]")

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "blur_sigma": self.blur_sigma,
            "tilt_degrees": self.tilt_degrees,
            "brightness_offset": self.brightness_offset,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }


def _tilt_homography(w: int, h: int, degrees: float) -> np.ndarray:
    """Homography for rotating the display plane about its vertical axis,
    viewed from a camera at distance 5x the image width."""
    theta = np.deg2rad(degrees)
    d = 5.0 * w
    corners = np.array(
        [[0, 0], [w, 0], [w, h], [0, h]], dtype=np.float64
    )
    projected = []
    for x, y in corners:
        xc, yc = x - w / 2.0, y - h / 2.0
        x3, z3 = xc * np.cos(theta), xc * np.sin(theta)
        s = d / (d + z3)
        projected.append((x3 * s + w / 2.0, yc * s + h / 2.0))
    projected = np.array(projected, dtype=np.float64)
    # shift so the warped quad stays inside the original canvas
    mins = projected.min(axis=0)
    projected -= mins
    return cv2.getPerspectiveTransform(
        corners.astype(np.float32), projected.astype(np.float32)
    )


def perturb(image: np.ndarray, spec: PerturbSpec) -> np.ndarray:
    """Perspective warp, Gaussian blur, area downscale, brightness offset and
    additive Gaussian noise, in that order; deterministic for a given seed."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape

    if spec.tilt_degrees != 0.0:
        H = _tilt_homography(w, h, spec.tilt_degrees)
        img = cv2.warpPerspective(
            img, H, (w, h), flags=cv2.INTER_LINEAR,
            borderMode=cv2.BORDER_CONSTANT, borderValue=255.0,
        )

    if spec.blur_sigma > 0.0:
        img = cv2.GaussianBlur(img, (0, 0), spec.blur_sigma)

    if spec.scale < 1.0:
        tw = max(8, int(round(w * spec.scale)))
        th = max(8, int(round(h * spec.scale)))
        img = cv2.resize(img, (tw, th), interpolation=cv2.INTER_AREA)

    if spec.brightness_offset != 0.0:
        img = img + spec.brightness_offset

    if spec.noise_sigma > 0.0:
        rng = np.random.default_rng(spec.seed)
        img = img + rng.normal(0.0, spec.noise_sigma, img.shape)

    return np.clip(img, 0.0, L_MAX)


def scan_trial(image: np.ndarray, spec: QrSpec, expected: bytes,
               alphas: tuple[float, ...] = ALPHA_ATTEMPTS) -> bool:
    """One simulated scan: binarize, locate, rectify, extract, decode.

    Retries across binarization strictness values, then once more on a 2x
    upsampled copy when the symbol is small (finder runs near one pixel per
    module defeat run-length detection otherwise); True iff some attempt
    decodes to the expected message.
    """
    gray = np.asarray(image, dtype=np.float64)
    attempts = [gray]
    if min(gray.shape) < 600:
        attempts.append(
            cv2.resize(gray, None, fx=2, fy=2, interpolation=cv2.INTER_CUBIC)
        )
    for candidate in attempts:
        for alpha in alphas:
            binary = binarize_resolved(candidate, alpha)
            try:
                found = locate_finder(binary, n_hint=spec.n)
                rectified, geom = rectify(candidate, found)
                matrix = extract_modules(rectified, geom, spec)
                decoded, _ = decode_message(matrix, spec)
            except (LocateError, DecodeError, ValueError):
                continue
            if decoded == expected:
                return True
    return False


@dataclass
class RobustnessReport:
    cells: list[dict] = field(default_factory=list)

    @property
    def total_successes(self) -> int:
        return sum(c["successes"] for c in self.cells)

    @property
    def total_trials(self) -> int:
        return sum(c["trials"] for c in self.cells)

    @property
    def aggregate_rate(self) -> float:
        return self.total_successes / max(1, self.total_trials)

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "grid": [c["spec"] for c in self.cells],
            "cells": self.cells,
            "aggregate": {
                "successes": self.total_successes,
                "trials": self.total_trials,
                "rate": self.aggregate_rate,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        """Plain-text success table, size (scale) rows x angle columns."""
        scales = sorted({c["spec"]["scale"] for c in self.cells}, reverse=True)
        tilts = sorted({c["spec"]["tilt_degrees"] for c in self.cells})
        lines = ["scale \\ tilt | " + " | ".join(f"{t:>5.0f}" for t in tilts)]
        for s in scales:
            row = []
            for t in tilts:
                sub = [
                    c for c in self.cells
                    if c["spec"]["scale"] == s and c["spec"]["tilt_degrees"] == t
                ]
                succ = sum(c["successes"] for c in sub)
                tot = sum(c["trials"] for c in sub)
                row.append(f"{100.0 * succ / max(1, tot):4.0f}%")
            lines.append(f"{s:>12.2f} | " + " | ".join(row))
        return "\n".join(lines)


def default_grid(master_seed: int = 0) -> list[PerturbSpec]:
    grid = []
    for scale in (0.3, 0.5, 1.0):
        for tilt in (0.0, 45.0):
            for blur in (0.5, 1.5):
                grid.append(
                    PerturbSpec(scale=scale, blur_sigma=blur, tilt_degrees=tilt,
                                noise_sigma=2.0, seed=master_seed)
                )
    return grid


def robustness_report(images: "np.ndarray | list[np.ndarray]", spec: QrSpec,
                      expected: "bytes | list[bytes]",
                      grid: list[PerturbSpec] | None = None,
                      trials_per_cell: int = 50,
                      master_seed: int = 0) -> RobustnessReport:
    """Success rates over a perturbation grid.

    Accepts a single image or a corpus; trials within a cell cycle through
    the corpus round-robin with per-trial seeds derived from the master seed.
    """
    if trials_per_cell < 1:
        raise ValueError("trials_per_cell must be >= 1")
    if isinstance(images, np.ndarray):
        images = [images]
    if isinstance(expected, bytes):
        expected = [expected] * len(images)
    if len(expected) != len(images):
        raise ValueError("images / expected length mismatch")
    if grid is None:
        grid = default_grid(master_seed)

    report = RobustnessReport()
    for cell_idx, cell_spec in enumerate(grid):
        successes = 0
        for t in range(trials_per_cell):
            img = images[t % len(images)]
            trial_spec = replace(
                cell_spec, seed=master_seed * 1_000_003 + cell_idx * 1009 + t
            )
            if scan_trial(perturb(img, trial_spec), spec, expected[t % len(images)]):
                successes += 1
        report.cells.append(
            {
                "spec": cell_spec.to_dict(),
                "successes": successes,
                "trials": trials_per_cell,
            }
        )
    return report
