"""Marker harmonization, the spatially dynamic code loss, and the descent loop."""

import numpy as np
import pytest

from qrshuffle import matrix as mx
from qrshuffle.enhance import (
    CodeLoss,
    EnhanceResult,
    LossConfig,
    enhance,
    harmonize_markers,
)
from qrshuffle.imageops import GridGeometry
from qrshuffle.qrspec import QrSpec
from qrshuffle.reshuffle import RegionSets, build_blueprint, reshuffle
from qrshuffle.scanner import extract_modules

SPEC = QrSpec(version=5, ec_level="H")
A = 8


def make_blueprint(seed=0, face=None, ratio=0.75):
    rng = np.random.default_rng(seed)
    geom = GridGeometry(4 * A, 4 * A, A, SPEC.n)
    source = rng.uniform(0, 255, ((SPEC.n + 8) * A,) * 2)
    regions = RegionSets.from_spec(SPEC, face)
    E = mx.function_pattern_template(SPEC)
    free = ~E.function_mask
    E.values[free] = rng.integers(0, 2, int(free.sum()))
    Et, _ = reshuffle(E, b"enhance", regions, SPEC)
    return build_blueprint(source, Et, regions, geom, ratio), source


def small_face():
    face = np.zeros((SPEC.n, SPEC.n), dtype=bool)
    face[15:21, 15:21] = True
    return face


# --- config -----------------------------------------------------------------

def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig(sigma_f=0.0)
    with pytest.raises(ValueError):
        LossConfig(w_b=-1.0)
    with pytest.raises(ValueError):
        LossConfig(marker_margin=1.0)
    with pytest.raises(ValueError):
        LossConfig(tau=0.0)
    assert LossConfig().to_dict()["w_b"] == 15.0


# --- harmonization ----------------------------------------------------------

def test_harmonize_bounds_exact():
    bp, _ = make_blueprint(1)
    rng = np.random.default_rng(2)
    img = rng.uniform(0, 255, bp.image.shape)
    out = harmonize_markers(img, bp.target_matrix, bp.regions.markers,
                            bp.geometry)
    g = bp.geometry
    marker_px = np.kron(bp.regions.markers, np.ones((A, A), dtype=bool))
    light_px = np.kron(bp.target_matrix.values.astype(bool),
                       np.ones((A, A), dtype=bool))
    region = out[g.origin_y:g.origin_y + SPEC.n * A,
                 g.origin_x:g.origin_x + SPEC.n * A]
    assert (region[marker_px & light_px] >= 128.0 * 1.8 - 1e-9).all()
    assert (region[marker_px & ~light_px] <= 128.0 * 0.2 + 1e-9).all()


def test_harmonize_idempotent_and_gentle():
    bp, _ = make_blueprint(3)
    rng = np.random.default_rng(4)
    img = rng.uniform(0, 255, bp.image.shape)
    once = harmonize_markers(img, bp.target_matrix, bp.regions.markers,
                             bp.geometry)
    twice = harmonize_markers(once, bp.target_matrix, bp.regions.markers,
                              bp.geometry)
    assert np.array_equal(once, twice)
    # non-marker pixels untouched
    g = bp.geometry
    marker_px = np.zeros(img.shape, dtype=bool)
    marker_px[g.origin_y:g.origin_y + SPEC.n * A,
              g.origin_x:g.origin_x + SPEC.n * A] = np.kron(
        bp.regions.markers, np.ones((A, A), dtype=bool))
    assert np.array_equal(once[~marker_px], img[~marker_px])


def test_harmonize_only_clamps():
    bp, _ = make_blueprint(5)
    # already-compliant pixels stay exactly where they were
    img = np.where(np.kron(bp.target_matrix.values, np.ones((A, A))) > 0,
                   250.0, 5.0)
    full = np.full(bp.image.shape, 250.0)
    g = bp.geometry
    full[g.origin_y:g.origin_y + SPEC.n * A,
         g.origin_x:g.origin_x + SPEC.n * A] = img
    out = harmonize_markers(full, bp.target_matrix, bp.regions.markers,
                            bp.geometry)
    assert np.array_equal(out, full)


def test_enforce_quiet_zone_bounds_and_idempotence():
    from qrshuffle.enhance import enforce_quiet_zone

    bp, _ = make_blueprint(19)
    rng = np.random.default_rng(20)
    img = rng.uniform(0, 255, bp.image.shape)
    out = enforce_quiet_zone(img, bp.geometry)
    g = bp.geometry
    code = np.zeros(img.shape, dtype=bool)
    code[g.origin_y:g.origin_y + SPEC.n * A,
         g.origin_x:g.origin_x + SPEC.n * A] = True
    assert (out[~code] >= 128.0 * 1.8 - 1e-9).all()
    assert np.array_equal(out[code], img[code])
    assert np.array_equal(enforce_quiet_zone(out, bp.geometry), out)
    with pytest.raises(ValueError):
        enforce_quiet_zone(img, bp.geometry, margin=1.0)


def test_harmonize_margin_validation():
    bp, _ = make_blueprint(6)
    with pytest.raises(ValueError):
        harmonize_markers(bp.image, bp.target_matrix, bp.regions.markers,
                          bp.geometry, margin=0.0)


# --- code loss --------------------------------------------------------------

def test_code_loss_zero_on_blueprint():
    bp, _ = make_blueprint(7, face=small_face())
    loss = CodeLoss(bp, LossConfig())
    value, grad = loss(bp.image / 255.0)
    assert value == 0.0
    assert not grad.any()


def test_code_loss_inactive_when_correct():
    bp, _ = make_blueprint(8)
    loss = CodeLoss(bp, LossConfig())
    # hard rendering of the target reads perfectly: no active modules
    hard = np.kron(bp.target_matrix.values.astype(np.float64) * 255.0,
                   np.ones((A, A)))
    img = np.full(bp.image.shape, 255.0)
    g = bp.geometry
    img[g.origin_y:g.origin_y + SPEC.n * A,
        g.origin_x:g.origin_x + SPEC.n * A] = hard
    assert not loss.active_modules(img / 255.0).any()


def test_code_loss_active_on_inverted_module():
    bp, _ = make_blueprint(9)
    loss = CodeLoss(bp, LossConfig())
    img = bp.image.copy()
    g = bp.geometry
    r0 = g.origin_y + 12 * A
    c0 = g.origin_x + 12 * A
    img[r0:r0 + A, c0:c0 + A] = 255.0 - img[r0:r0 + A, c0:c0 + A]
    assert not loss.active_modules(bp.image / 255.0)[12, 12]
    assert loss.active_modules(img / 255.0)[12, 12]
    value, grad = loss(img / 255.0)
    assert value > 0.0
    assert grad[r0:r0 + A, c0:c0 + A].any()
    # the loss compares against the blueprint, so the gradient is confined
    # to the one module that deviates from it
    mask = np.zeros_like(grad, dtype=bool)
    mask[r0:r0 + A, c0:c0 + A] = True
    assert not grad[~mask].any()


def test_code_loss_face_weighting():
    face = small_face()
    bp, _ = make_blueprint(10, face=face)
    cfg = LossConfig(w_f=1.0, w_b=15.0)
    loss = CodeLoss(bp, cfg)
    assert loss.weights[16, 16] == 1.0
    assert loss.weights[30, 30] == 15.0
    assert np.array_equal(loss.kernels[16, 16], loss.kernel_f)
    assert np.array_equal(loss.kernels[30, 30], loss.kernel_b)


def test_code_loss_gradient_finite_difference():
    bp, _ = make_blueprint(11, face=small_face())
    loss = CodeLoss(bp, LossConfig())
    rng = np.random.default_rng(12)
    z = rng.uniform(0.05, 0.95, bp.image.shape)
    value, grad = loss(z)
    g = bp.geometry
    # the loss is piecewise linear, so a relatively large step keeps the
    # central difference exact while avoiding cancellation in the large sum
    h = 1e-4
    checked = 0
    for _ in range(200):
        r = rng.integers(0, SPEC.n)
        c = rng.integers(0, SPEC.n)
        y = g.origin_y + r * A + int(rng.integers(0, A))
        x = g.origin_x + c * A + int(rng.integers(0, A))
        if abs(z[y, x] - loss.blueprint01[y, x]) < 1e-3:
            continue  # |.| kink: one-sided derivative
        zp = z.copy(); zp[y, x] += h
        zm = z.copy(); zm[y, x] -= h
        fd = (loss(zp)[0] - loss(zm)[0]) / (2 * h)
        assert fd == pytest.approx(grad[y, x], rel=1e-4, abs=1e-9)
        checked += 1
        if checked >= 30:
            break
    assert checked >= 30


# --- enhance loop -----------------------------------------------------------

def test_enhance_reduces_errors_and_traces():
    bp, source = make_blueprint(13, face=small_face())
    rng = np.random.default_rng(14)
    start = np.clip(0.6 * bp.image + 0.4 * rng.uniform(0, 255, bp.image.shape),
                    0, 255)
    start = harmonize_markers(start, bp.target_matrix, bp.regions.markers,
                              bp.geometry)
    cfg = LossConfig(iterations=120)
    res = enhance(start, bp, start, cfg, SPEC)
    assert isinstance(res, EnhanceResult)
    assert res.trace[0].iteration == 0
    assert res.final().e <= res.trace[0].e
    assert res.image.min() >= 0.0 and res.image.max() <= 255.0
    # extraction of the final image agrees with the trace error count
    observed = extract_modules(res.image, bp.geometry, SPEC)
    from qrshuffle.scanner import count_errors
    rep = count_errors(observed, bp.target_matrix, SPEC, bp.regions.face)
    assert rep.e == res.final().e


def test_enhance_shape_mismatch():
    bp, _ = make_blueprint(15)
    with pytest.raises(ValueError):
        enhance(np.zeros((10, 10)), bp, bp.image, LossConfig(), SPEC)


def test_enhance_keeps_clean_start_clean():
    bp, _ = make_blueprint(16)
    hard = np.kron(bp.target_matrix.values.astype(np.float64) * 255.0,
                   np.ones((A, A)))
    img = np.full(bp.image.shape, 255.0)
    g = bp.geometry
    img[g.origin_y:g.origin_y + SPEC.n * A,
        g.origin_x:g.origin_x + SPEC.n * A] = hard
    cfg = LossConfig(iterations=60)
    res = enhance(img, bp, img, cfg, SPEC)
    assert res.trace[0].e == 0
    assert res.final().e == 0


def test_enhance_early_stop_on_blueprint_start():
    # starting exactly on the blueprint, the code loss is zero and the loss
    # plateaus, so early stopping ends the run before the budget
    bp, _ = make_blueprint(18)
    cfg = LossConfig(iterations=200, aesthetic_weight=0.0)
    res = enhance(bp.image, bp, bp.image, cfg, SPEC)
    assert res.final().e == 0
    assert len(res.trace) < cfg.iterations + 1


def test_trace_entry_json_round_trip():
    import json

    bp, _ = make_blueprint(17)
    res = enhance(bp.image, bp, bp.image, LossConfig(iterations=2,
                                                     early_stop=False), SPEC)
    entry = json.loads(res.trace[0].to_json())
    assert set(entry) == {"iteration", "loss", "l_code", "l_aesthetic", "e",
                          "e_f"}
