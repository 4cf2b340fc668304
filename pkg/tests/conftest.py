"""Shared fixtures: the 20-image synthetic portrait corpus and its enhanced
outputs, used by the acceptance tests (built once per session, lazily)."""

from dataclasses import dataclass

import numpy as np
import pytest

from qrshuffle.enhance import (
    LossConfig,
    enforce_quiet_zone,
    enhance,
    harmonize_markers,
)
from qrshuffle.imageops import GridGeometry, L_MAX
from qrshuffle.qrspec import QrSpec
from qrshuffle.reshuffle import RegionSets, build_blueprint, reshuffle
from qrshuffle.scanner import count_errors, extract_modules
from qrshuffle.synth import (
    elliptical_module_mask,
    smooth_noise,
    synthetic_portrait,
    tone_shift,
)

CORPUS_SPEC = QrSpec(version=5, ec_level="H")
CORPUS_MODULE_PX = 12
CORPUS_QUIET = 4
CORPUS_SIDE = (CORPUS_SPEC.n + 2 * CORPUS_QUIET) * CORPUS_MODULE_PX
CORPUS_GEOM = GridGeometry(CORPUS_QUIET * CORPUS_MODULE_PX,
                           CORPUS_QUIET * CORPUS_MODULE_PX,
                           CORPUS_MODULE_PX, CORPUS_SPEC.n)
CORPUS_SIZE = 20

# blueprint share of the background blend, tried in order per seed so every
# image starts with an error count inside the target window
_BLEND_LADDER = (0.70, 0.66, 0.62, 0.58, 0.54, 0.50, 0.46)


@dataclass
class CorpusCase:
    seed: int
    message: bytes
    start: np.ndarray
    blueprint: object
    regions: object
    face_px: np.ndarray       # pixel mask of non-marker face modules
    code_px: np.ndarray       # pixel mask of the full code region
    e0: int
    e_f0: int
    blend_weight: float


def _module_pixel_mask(modmask: np.ndarray) -> np.ndarray:
    a, n, g = CORPUS_MODULE_PX, CORPUS_SPEC.n, CORPUS_GEOM
    px = np.zeros((CORPUS_SIDE, CORPUS_SIDE), dtype=bool)
    px[g.origin_y:g.origin_y + n * a, g.origin_x:g.origin_x + n * a] = \
        np.kron(modmask, np.ones((a, a), dtype=bool))
    return px


def build_corpus_case(seed: int) -> CorpusCase:
    """One synthetic pipeline input: blueprint-plus-textured-noise background,
    contrast-restyled portrait inside the face region, markers harmonized."""
    spec, geom = CORPUS_SPEC, CORPUS_GEOM
    message = f"https://example.com/profile/{seed:02d}".encode()
    portrait = synthetic_portrait(CORPUS_SIDE, seed)
    face = elliptical_module_mask(spec.n)
    E = extract_modules(portrait, geom, spec)
    regions = RegionSets.from_spec(spec, face)
    E_tilde, _ = reshuffle(E, message, regions, spec)
    blueprint = build_blueprint(portrait, E_tilde, regions, geom, 0.75)

    noise = 128.0 + smooth_noise((CORPUS_SIDE, CORPUS_SIDE), 9.0, 255.0,
                                 seed + 100)
    styled = tone_shift(portrait)
    # the restyle must not flip frozen face modules; revert any that moved
    E_styled = extract_modules(styled, geom, spec)
    flips = (E_styled.values != E.values) & face
    if flips.any():
        fpx = _module_pixel_mask(flips)
        styled = styled.copy()
        styled[fpx] = portrait[fpx]

    face_px = _module_pixel_mask(regions.face & ~regions.markers)
    code_px = _module_pixel_mask(np.ones((spec.n, spec.n), dtype=bool))

    def compose(bw: float):
        start = np.clip(bw * blueprint.image + (1.0 - bw) * noise, 0.0, L_MAX)
        start[face_px] = styled[face_px]
        start = harmonize_markers(start, E_tilde, regions.markers, geom)
        start = enforce_quiet_zone(start, geom)
        observed = extract_modules(start, geom, spec)
        rep = count_errors(observed, E_tilde, spec, regions.face)
        return start, rep.e, rep.e_f

    best = None
    for bw in _BLEND_LADDER:
        start, e0, e_f0 = compose(bw)
        if e_f0 == 0 and 20 <= e0 <= 55:
            best = (start, e0, e_f0, bw)
            break
        score = abs(e0 - 37) + (1000 if e_f0 else 0)
        if best is None or score < best[4]:
            best = (start, e0, e_f0, bw, score)
    start, e0, e_f0, bw = best[:4]
    return CorpusCase(seed, message, start, blueprint, regions, face_px,
                      code_px, e0, e_f0, bw)


@pytest.fixture(scope="session")
def corpus() -> list[CorpusCase]:
    return [build_corpus_case(seed) for seed in range(CORPUS_SIZE)]


@pytest.fixture(scope="session")
def enhanced_corpus(corpus):
    """Default-config enhancement of every corpus image, with timings."""
    import time

    out = []
    for case in corpus:
        t0 = time.monotonic()
        result = enhance(case.start, case.blueprint, case.start, LossConfig(),
                         CORPUS_SPEC)
        out.append((result, time.monotonic() - t0))
    return out


@pytest.fixture(scope="session")
def ablated_corpus(corpus):
    """Same runs with the regional asymmetry removed (uniform w and sigma)."""
    cfg = LossConfig(w_f=15.0, w_b=15.0, sigma_f=3.0, sigma_b=3.0)
    return [enhance(case.start, case.blueprint, case.start, cfg, CORPUS_SPEC)
            for case in corpus]
