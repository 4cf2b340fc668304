"""Simulated decoder: module extraction, Gaussian soft sampling, error
counting and full message decode from a module matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matrix as mx
from .encode import PAD_BYTES, interleave_map
from .galois import DecodeFailure, rs_decode
from .imageops import L_MAX, GridGeometry
from .qrspec import QrSpec


class DecodeError(Exception):
    """Decode failure carrying the pipeline stage that failed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def _module_patches(gray: np.ndarray, geom: GridGeometry) -> np.ndarray:
    """View of the code region as an (n, n, a, a) patch array."""
    if not geom.covers(gray.shape):
        raise ValueError("grid geometry exceeds image bounds")
    a, n = geom.module_px, geom.n
    sub = gray[geom.origin_y:geom.origin_y + n * a,
               geom.origin_x:geom.origin_x + n * a]
    return sub.reshape(n, a, n, a).transpose(0, 2, 1, 3)


def extract_modules(gray: np.ndarray, geom: GridGeometry, spec: QrSpec,
                    tau: float = 128.0) -> mx.ModuleMatrix:
    """Threshold each module's patch mean: mean < tau -> dark (0)."""
    if not 0.0 < tau < L_MAX:
        raise ValueError("tau must lie in (0, L)")
    means = _module_patches(np.asarray(gray, dtype=np.float64), geom).mean(axis=(2, 3))
    values = (means >= tau).astype(np.uint8)
    return mx.ModuleMatrix(values, mx.function_pattern_map(spec))


def gaussian_kernel(a: int, sigma_px: float) -> np.ndarray:
    """a x a kernel centred in the module, sigma given in pixels,
    normalized to sum 1.

    Small sigma regulates only the central region of a module; large sigma
    approaches the plain patch mean.
    """
    if sigma_px <= 0:
        raise ValueError("sigma must be > 0")
    idx = np.arange(a, dtype=np.float64) - (a - 1) / 2.0
    g1 = np.exp(-(idx ** 2) / (2.0 * sigma_px ** 2))
    k = np.outer(g1, g1)
    return k / k.sum()


def gaussian_sample(gray: np.ndarray, geom: GridGeometry,
                    sigma_px: float) -> np.ndarray:
    """Gaussian-weighted module means, n x n, in the image's value range."""
    kernel = gaussian_kernel(geom.module_px, sigma_px)
    patches = _module_patches(np.asarray(gray, dtype=np.float64), geom)
    return np.einsum("ijkl,kl->ij", patches, kernel)


@dataclass
class ErrorReport:
    e: int
    e_f: int
    per_block_errors: list[int]
    error_map: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "e": self.e,
            "e_f": self.e_f,
            "per_block_errors": list(self.per_block_errors),
        }


def bit_to_block_map(spec: QrSpec) -> list[tuple[int, int] | None]:
    """Placed bit index -> (block, byte-in-block); None for remainder bits."""
    out: list[tuple[int, int] | None] = []
    for b, i in interleave_map(spec):
        out.extend([(b, i)] * 8)
    out.extend([None] * spec.remainder_bits)
    return out


def count_errors(observed: mx.ModuleMatrix, reference: mx.ModuleMatrix,
                 spec: QrSpec, face: np.ndarray | None = None) -> ErrorReport:
    """Module mismatches: e excludes finder/alignment areas, e_f is the
    face-region subset, plus byte-level error counts per RS block."""
    if observed.n != reference.n:
        raise ValueError("matrix size mismatch")
    mismatch = observed.values != reference.values
    excluded = mx.marker_area_mask(spec)
    e = int(np.count_nonzero(mismatch & ~excluded))
    if face is None:
        face = np.zeros_like(mismatch)
    e_f = int(np.count_nonzero(mismatch & np.asarray(face, dtype=bool)))

    per_block = [0] * len(spec.block_structure)
    bad_bytes: set[tuple[int, int]] = set()
    bmap = bit_to_block_map(spec)
    for bit_idx, (r, c) in enumerate(mx.placement_order(spec)):
        if mismatch[r, c] and bmap[bit_idx] is not None:
            bad_bytes.add(bmap[bit_idx])
    for b, _ in bad_bytes:
        per_block[b] += 1
    return ErrorReport(e, e_f, per_block, mismatch & ~excluded)


def read_codewords(matrix: mx.ModuleMatrix, spec: QrSpec,
                   mask_pattern: int) -> list[bytearray]:
    """Unmask and read the placed bits back into per-block byte arrays."""
    unmasked = mx.apply_mask(matrix, mask_pattern)
    rows, cols = np.asarray(mx.placement_order(spec), dtype=np.intp).T
    bits = (unmasked.values[rows, cols] == mx.DARK).astype(np.uint8)
    total = spec.total_codewords
    stream = np.packbits(bits[:8 * total])
    blocks = [bytearray(c) for c, _ in spec.block_structure]
    for byte, (b, i) in zip(stream, interleave_map(spec)):
        blocks[b][i] = int(byte)
    return blocks


def decode_message(matrix: mx.ModuleMatrix, spec: QrSpec) -> tuple[bytes, int]:
    """Full decode: format info, unmask, de-interleave, RS-correct, parse.

    Returns (message, total corrected bytes).  Raises DecodeError with a
    stage indicator on failure.
    """
    if matrix.n != spec.n:
        raise DecodeError("geometry", "matrix side does not match spec")
    try:
        ec_level, mask_pattern = mx.read_format_info(matrix)
    except mx.FormatInfoError as exc:
        raise DecodeError("format", str(exc)) from exc
    if ec_level != spec.ec_level:
        spec = QrSpec(spec.version, ec_level, spec.mask_pattern, spec.quiet_zone)

    blocks = read_codewords(matrix, spec, mask_pattern)
    data = bytearray()
    corrections = 0
    for (c, k), block in zip(spec.block_structure, blocks):
        try:
            payload, ncorr = rs_decode(bytes(block), c - k)
        except DecodeFailure as exc:
            raise DecodeError("rs", str(exc)) from exc
        data.extend(payload)
        corrections += ncorr

    bits = []
    for byte in data:
        for k in range(7, -1, -1):
            bits.append((byte >> k) & 1)

    def take(width: int) -> int:
        nonlocal pos
        if pos + width > len(bits):
            raise DecodeError("header", "bitstream truncated")
        v = 0
        for b in bits[pos:pos + width]:
            v = (v << 1) | b
        pos += width
        return v

    pos = 0
    mode = take(4)
    if mode == 0b0000:  # terminator straight away: empty symbol
        return b"", corrections
    if mode != 0b0100:
        raise DecodeError("header", f"unsupported mode {mode:04b} (byte mode only)")
    length = take(spec.length_bits)
    if length > spec.byte_capacity():
        raise DecodeError("header", "declared length exceeds capacity")
    msg = bytearray(take(8) for _ in range(length))
    return bytes(msg), corrections
