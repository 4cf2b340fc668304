"""Byte-mode QR encoding: bitstream assembly, block interleaving, matrix build."""

from __future__ import annotations

import numpy as np

from . import matrix as mx
from .galois import rs_encode
from .qrspec import QrSpec

PAD_BYTES = (0xEC, 0x11)


class CapacityError(ValueError):
    pass


def data_bitstream(message: bytes, spec: QrSpec) -> list[int]:
    """Mode + count + payload + terminator + pad, as a list of bits."""
    if len(message) > spec.byte_capacity():
        raise CapacityError(
            f"message of {len(message)} bytes exceeds capacity "
            f"{spec.byte_capacity()} for version {spec.version}-{spec.ec_level}"
        )
    bits: list[int] = []

    def put(value: int, width: int) -> None:
        for k in range(width - 1, -1, -1):
            bits.append((value >> k) & 1)

    put(0b0100, 4)  # byte mode
    put(len(message), spec.length_bits)
    for b in message:
        put(b, 8)

    capacity_bits = spec.data_codewords * 8
    put(0, min(4, capacity_bits - len(bits)))  # terminator
    while len(bits) % 8:
        bits.append(0)
    i = 0
    while len(bits) < capacity_bits:
        put(PAD_BYTES[i % 2], 8)
        i += 1
    return bits


def bits_to_bytes(bits: list[int]) -> bytes:
    out = bytearray()
    for i in range(0, len(bits), 8):
        byte = 0
        for b in bits[i:i + 8]:
            byte = (byte << 1) | b
        out.append(byte)
    return bytes(out)


def split_blocks(data: bytes, spec: QrSpec) -> list[bytes]:
    """Encode each RS block (data + parity) from the contiguous data bytes."""
    blocks = []
    pos = 0
    for c, k in spec.block_structure:
        blocks.append(rs_encode(data[pos:pos + k], c - k))
        pos += k
    if pos != len(data):
        raise ValueError("data length does not match block structure")
    return blocks


def interleave_map(spec: QrSpec) -> list[tuple[int, int]]:
    """Transmitted codeword order as (block_index, byte_index_within_block).

    Data codewords first (column-wise across blocks), then parity codewords.
    """
    order: list[tuple[int, int]] = []
    ks = [k for _, k in spec.block_structure]
    cs = [c for c, _ in spec.block_structure]
    for i in range(max(ks)):
        for b, k in enumerate(ks):
            if i < k:
                order.append((b, i))
    ec = cs[0] - ks[0]
    for i in range(ec):
        for b, k in enumerate(ks):
            order.append((b, k + i))
    return order


def interleave(blocks: list[bytes], spec: QrSpec) -> bytes:
    return bytes(blocks[b][i] for b, i in interleave_map(spec))


def codeword_bits(message: bytes, spec: QrSpec) -> list[int]:
    """Full placed bitstream: interleaved codewords + remainder zero bits."""
    data = bits_to_bytes(data_bitstream(message, spec))
    stream = interleave(split_blocks(data, spec), spec)
    bits = []
    for byte in stream:
        for k in range(7, -1, -1):
            bits.append((byte >> k) & 1)
    bits.extend([0] * spec.remainder_bits)
    return bits


def place_bits(bits: list[int], spec: QrSpec, mask_pattern: int) -> mx.ModuleMatrix:
    """Write the bitstream into a fresh matrix and apply mask + format info."""
    matrix = mx.function_pattern_template(spec)
    order = mx.placement_order(spec)
    if len(bits) != len(order):
        raise ValueError(f"expected {len(order)} bits, got {len(bits)}")
    rows, cols = np.asarray(order, dtype=np.intp).T
    matrix.values[rows, cols] = 1 - np.asarray(bits, dtype=np.uint8)
    matrix = mx.apply_mask(matrix, mask_pattern)
    mx.place_format_info(matrix, spec, mask_pattern)
    return matrix


def build_matrix(message: bytes, spec: QrSpec) -> mx.ModuleMatrix:
    """Standard-compliant matrix for a byte-mode message.

    mask_pattern None selects the pattern with the lowest penalty score.
    """
    bits = codeword_bits(message, spec)
    if spec.mask_pattern is not None:
        return place_bits(bits, spec, spec.mask_pattern)
    best = None
    for p in range(8):
        cand = place_bits(bits, spec, p)
        score = mx.penalty_score(cand)
        if best is None or score < best[0]:
            best = (score, p, cand)
    return best[2]


def render(matrix: mx.ModuleMatrix, module_px: int = 16, quiet_zone: int = 4) -> np.ndarray:
    """Rasterize a matrix to a grayscale image (0 black / 255 white)."""
    if module_px < 1:
        raise ValueError("module_px must be >= 1")
    n = matrix.n
    core = np.where(matrix.values == mx.LIGHT, 255, 0).astype(np.float64)
    core = np.kron(core, np.ones((module_px, module_px)))
    if quiet_zone:
        q = quiet_zone * module_px
        side = n * module_px + 2 * q
        img = np.full((side, side), 255.0)
        img[q:q + n * module_px, q:q + n * module_px] = core
        return img
    return core
