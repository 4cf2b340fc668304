"""Module extraction, Gaussian sampling, error counting and full decode."""

import numpy as np
import pytest

from qrshuffle import matrix as mx
from qrshuffle.encode import build_matrix, render
from qrshuffle.imageops import GridGeometry
from qrshuffle.qrspec import QrSpec
from qrshuffle.scanner import (
    DecodeError,
    bit_to_block_map,
    count_errors,
    decode_message,
    extract_modules,
    gaussian_kernel,
    gaussian_sample,
    read_codewords,
)

SPEC = QrSpec(version=5, ec_level="H")


def rendered(message=b"scanner", px=12):
    m = build_matrix(message, SPEC)
    img = render(m, px, SPEC.quiet_zone)
    geom = GridGeometry(4 * px, 4 * px, px, SPEC.n)
    return m, img, geom


# --- extraction -------------------------------------------------------------

def test_extract_clean_rendering():
    m, img, geom = rendered()
    out = extract_modules(img, geom, SPEC)
    assert out == m


def test_extract_mean_thresholding():
    # one module half 255 / half 0 -> mean 127.5 < tau -> dark
    m, img, geom = rendered()
    r0 = geom.origin_y + 10 * geom.module_px
    c0 = geom.origin_x + 10 * geom.module_px
    img[r0:r0 + geom.module_px, c0:c0 + geom.module_px] = 0.0
    img[r0:r0 + geom.module_px // 2, c0:c0 + geom.module_px] = 255.0
    out = extract_modules(img, geom, SPEC)
    assert out.values[10, 10] == 0


def test_extract_custom_tau():
    m, img, geom = rendered()
    r0 = geom.origin_y + 9 * geom.module_px
    c0 = geom.origin_x + 9 * geom.module_px
    img[r0:r0 + geom.module_px, c0:c0 + geom.module_px] = 100.0
    assert extract_modules(img, geom, SPEC, tau=128.0).values[9, 9] == 0
    assert extract_modules(img, geom, SPEC, tau=90.0).values[9, 9] == 1


# --- gaussian sampling ------------------------------------------------------

def test_kernel_normalized_and_centered():
    for a in (7, 12, 16):
        for sigma in (1.5, 3.0, 50.0):
            k = gaussian_kernel(a, sigma)
            assert k.shape == (a, a)
            assert k.sum() == pytest.approx(1.0)
            assert np.array_equal(k, k.T)
            assert np.array_equal(k, k[::-1, ::-1])  # symmetric about center


def test_small_sigma_concentrates_center():
    k = gaussian_kernel(12, 1.5)
    center = k[5:7, 5:7].sum()
    assert center > 0.2
    assert k[0, 0] < 1e-4


def test_large_sigma_approaches_mean():
    k = gaussian_kernel(12, 500.0)
    assert np.allclose(k, 1.0 / 144.0, atol=1e-5)


def test_gaussian_sample_uniform_image():
    img = np.full((45 * 8, 45 * 8), 99.0)
    geom = GridGeometry(32, 32, 8, 37)
    s = gaussian_sample(img, geom, 1.5)
    assert s.shape == (37, 37)
    assert np.allclose(s, 99.0)


def test_invalid_sigma():
    with pytest.raises(ValueError):
        gaussian_kernel(8, 0.0)


# --- error counting ---------------------------------------------------------

def test_count_errors_zero_on_identical():
    m, _, _ = rendered()
    face = np.zeros((SPEC.n, SPEC.n), dtype=bool)
    rep = count_errors(m, m, SPEC, face)
    assert rep.e == 0 and rep.e_f == 0
    assert rep.per_block_errors == [0, 0, 0, 0]


def test_count_errors_marker_area_excluded():
    m, _, _ = rendered()
    damaged = m.copy()
    damaged.values[0, 0] ^= 1  # inside finder
    face = np.zeros((SPEC.n, SPEC.n), dtype=bool)
    rep = count_errors(damaged, m, SPEC, face)
    assert rep.e == 0


def test_count_errors_face_split():
    m, _, _ = rendered()
    damaged = m.copy()
    face = np.zeros((SPEC.n, SPEC.n), dtype=bool)
    face[15:20, 15:20] = True
    damaged.values[16, 16] ^= 1   # in face
    damaged.values[30, 20] ^= 1   # outside face
    rep = count_errors(damaged, m, SPEC, face)
    assert rep.e == 2
    assert rep.e_f == 1
    assert rep.error_map[16, 16] and rep.error_map[30, 20]


def test_count_errors_per_block_attribution():
    m, _, _ = rendered()
    damaged = m.copy()
    b2b = bit_to_block_map(SPEC)
    order = mx.placement_order(SPEC)
    # flip the first bit belonging to block 2
    idx = next(i for i, loc in enumerate(b2b) if loc is not None and loc[0] == 2)
    r, c = order[idx]
    damaged.values[r, c] ^= 1
    face = np.zeros((SPEC.n, SPEC.n), dtype=bool)
    rep = count_errors(damaged, m, SPEC, face)
    assert rep.per_block_errors == [0, 0, 1, 0]


def test_bit_to_block_total_coverage():
    b2b = bit_to_block_map(SPEC)
    assert len(b2b) == SPEC.total_codewords * 8 + SPEC.remainder_bits
    assert all(loc is None for loc in b2b[-SPEC.remainder_bits:])
    bytes_seen = {loc for loc in b2b if loc is not None}
    assert len(bytes_seen) == SPEC.total_codewords


# --- decode -----------------------------------------------------------------

def test_read_codewords_round_trip():
    from qrshuffle.encode import data_bitstream, bits_to_bytes, split_blocks

    message = b"read me back"
    m = build_matrix(message, SPEC)
    level, mask = mx.read_format_info(m)
    blocks = read_codewords(m, SPEC, mask)
    data = bits_to_bytes(data_bitstream(message, SPEC))
    expected = split_blocks(data, SPEC)
    assert [bytes(b) for b in blocks] == [bytes(b) for b in expected]


def test_decode_empty_message():
    m = build_matrix(b"", SPEC)
    assert decode_message(m, SPEC) == (b"", 0)


def test_decode_reports_corrections():
    m = build_matrix(b"abc", SPEC)
    order = mx.placement_order(SPEC)
    damaged = m.copy()
    for i in (0, 8):  # two distinct codeword bytes
        r, c = order[i]
        damaged.values[r, c] ^= 1
    decoded, corrected = decode_message(damaged, SPEC)
    assert decoded == b"abc"
    assert corrected == 2


def test_decode_fails_on_garbage():
    rng = np.random.default_rng(3)
    m = build_matrix(b"abc", SPEC)
    garbage = m.copy()
    free = ~m.function_mask
    garbage.values[free] = rng.integers(0, 2, int(free.sum()))
    with pytest.raises(DecodeError):
        decode_message(garbage, SPEC)


def test_decode_wrong_format_info_raises():
    m = build_matrix(b"abc", SPEC)
    damaged = m.copy()
    # destroy both format-info copies beyond the 3-error budget
    for positions in mx.format_info_positions(SPEC.n):
        for r, c in positions[:8]:
            damaged.values[r, c] ^= 1
    with pytest.raises(DecodeError):
        decode_message(damaged, SPEC)
