"""QR matrix geometry: function patterns, data placement, masks, format info.

Module value convention follows the luminance view used everywhere in this
package: 1 = light (white), 0 = dark (black).  A codeword bit of 1 is placed
as a dark module, so ``value = 1 - bit`` for unmasked data modules.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .qrspec import EC_LEVEL_BITS, QrSpec

DARK = 0
LIGHT = 1


@dataclass
class ModuleMatrix:
    """n x n module values plus a mask of function-pattern positions."""

    values: np.ndarray  # uint8, {0,1}, 1 = light
    function_mask: np.ndarray  # bool

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.uint8)
        self.function_mask = np.asarray(self.function_mask, dtype=bool)
        if self.values.shape != self.function_mask.shape:
            raise ValueError("values / function_mask shape mismatch")
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError("module matrix must be square")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "ModuleMatrix":
        return ModuleMatrix(self.values.copy(), self.function_mask.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModuleMatrix):
            return NotImplemented
        return bool(
            np.array_equal(self.values, other.values)
            and np.array_equal(self.function_mask, other.function_mask)
        )


_FINDER = np.array(
    [
        [0, 0, 0, 0, 0, 0, 0],
        [0, 1, 1, 1, 1, 1, 0],
        [0, 1, 0, 0, 0, 1, 0],
        [0, 1, 0, 0, 0, 1, 0],
        [0, 1, 0, 0, 0, 1, 0],
        [0, 1, 1, 1, 1, 1, 0],
        [0, 0, 0, 0, 0, 0, 0],
    ],
    dtype=np.uint8,
)

_ALIGNMENT = np.array(
    [
        [0, 0, 0, 0, 0],
        [0, 1, 1, 1, 0],
        [0, 1, 0, 1, 0],
        [0, 1, 1, 1, 0],
        [0, 0, 0, 0, 0],
    ],
    dtype=np.uint8,
)


def function_pattern_template(spec: QrSpec) -> ModuleMatrix:
    """Matrix with all function patterns placed and data modules light.

    function_mask covers finders+separators, timing, alignment, dark module,
    and the format/version information areas (whose values are filled later).
    """
    return _template_cached(spec.version).copy()


@lru_cache(maxsize=None)
def _template_cached(version: int) -> ModuleMatrix:
    spec = QrSpec(version, "L")
    n = spec.n
    values = np.full((n, n), LIGHT, dtype=np.uint8)
    fmask = np.zeros((n, n), dtype=bool)

    # finders + separators (8x8 regions incl. separator, clipped at borders)
    for r0, c0 in ((0, 0), (0, n - 7), (n - 7, 0)):
        values[r0:r0 + 7, c0:c0 + 7] = _FINDER
        rs, re = max(0, r0 - 1), min(n, r0 + 8)
        cs, ce = max(0, c0 - 1), min(n, c0 + 8)
        fmask[rs:re, cs:ce] = True  # separator ring is light; values already 1
    finder_zone = fmask.copy()

    # timing patterns, row/col 6
    for k in range(8, n - 8):
        bit = DARK if k % 2 == 0 else LIGHT
        values[6, k] = bit
        values[k, 6] = bit
        fmask[6, k] = True
        fmask[k, 6] = True

    # alignment patterns (skip only those overlapping a finder area; the
    # patterns centred on row/col 6 legitimately overlay the timing pattern)
    centers = spec.alignment_centers
    for r in centers:
        for c in centers:
            if finder_zone[r, c]:
                continue
            values[r - 2:r + 3, c - 2:c + 3] = _ALIGNMENT
            fmask[r - 2:r + 3, c - 2:c + 3] = True

    # dark module
    values[4 * spec.version + 9, 8] = DARK
    fmask[4 * spec.version + 9, 8] = True

    # format info areas
    for r, c in format_info_positions(n)[0] + format_info_positions(n)[1]:
        fmask[r, c] = True

    # version info areas (version >= 7)
    if spec.version >= 7:
        fmask[0:6, n - 11:n - 8] = True
        fmask[n - 11:n - 8, 0:6] = True

    return ModuleMatrix(values, fmask)


def marker_area_mask(spec: QrSpec) -> np.ndarray:
    """Boolean mask of finder (incl. separator) and alignment pattern modules.

    This is the region excluded from the error-module count; it is a strict
    subset of the full function mask (no timing/format/version/dark module).
    """
    return _marker_area_cached(spec.version).copy()


@lru_cache(maxsize=None)
def _marker_area_cached(version: int) -> np.ndarray:
    spec = QrSpec(version, "L")
    n = spec.n
    mask = np.zeros((n, n), dtype=bool)
    for r0, c0 in ((0, 0), (0, n - 7), (n - 7, 0)):
        rs, re = max(0, r0 - 1), min(n, r0 + 8)
        cs, ce = max(0, c0 - 1), min(n, c0 + 8)
        mask[rs:re, cs:ce] = True
    finder_zone = mask.copy()
    centers = spec.alignment_centers
    for r in centers:
        for c in centers:
            if finder_zone[r, c]:
                continue
            mask[r - 2:r + 3, c - 2:c + 3] = True
    return mask


def function_pattern_map(spec: QrSpec) -> np.ndarray:
    """Boolean mask of every function-pattern module (the marker index set)."""
    return function_pattern_template(spec).function_mask.copy()


def format_info_positions(n: int) -> tuple[list, list]:
    """The two 15-position format-info sequences, MSB of the format word first."""
    copy1 = (
        [(8, c) for c in (0, 1, 2, 3, 4, 5, 7)]
        + [(8, 8)]
        + [(r, 8) for r in (7, 5, 4, 3, 2, 1, 0)]
    )
    copy2 = [(n - 1 - i, 8) for i in range(7)] + [(8, n - 8 + i) for i in range(8)]
    return copy1, copy2


_FORMAT_GEN = 0b10100110111
_FORMAT_XOR = 0b101010000010010


def format_info_bits(ec_level: str, mask_pattern: int) -> int:
    """15-bit BCH-protected format word."""
    data = (EC_LEVEL_BITS[ec_level] << 3) | mask_pattern
    rem = data << 10
    for shift in range(4, -1, -1):
        if rem & (1 << (10 + shift)):
            rem ^= _FORMAT_GEN << shift
    return ((data << 10) | rem) ^ _FORMAT_XOR


_VERSION_GEN = 0b1111100100101


def version_info_bits(version: int) -> int:
    """18-bit BCH-protected version word (versions >= 7)."""
    rem = version << 12
    for shift in range(5, -1, -1):
        if rem & (1 << (12 + shift)):
            rem ^= _VERSION_GEN << shift
    return (version << 12) | rem


def place_format_info(matrix: ModuleMatrix, spec: QrSpec, mask_pattern: int) -> None:
    bits = format_info_bits(spec.ec_level, mask_pattern)
    n = matrix.n
    for positions in format_info_positions(n):
        for i, (r, c) in enumerate(positions):
            bit = (bits >> (14 - i)) & 1
            matrix.values[r, c] = DARK if bit else LIGHT
    if spec.version >= 7:
        vbits = version_info_bits(spec.version)
        for i in range(18):
            bit = (vbits >> i) & 1
            val = DARK if bit else LIGHT
            matrix.values[i // 3, n - 11 + i % 3] = val
            matrix.values[n - 11 + i % 3, i // 3] = val


def read_format_info(matrix: ModuleMatrix) -> tuple[str, int]:
    """Decode (ec_level, mask_pattern) from either format copy.

    Picks the valid format word with minimum Hamming distance over both
    copies; fails if the best distance exceeds 3 (BCH(15,5) limit).
    """
    n = matrix.n
    best = None
    for positions in format_info_positions(n):
        word = 0
        for r, c in positions:
            word = (word << 1) | (1 if matrix.values[r, c] == DARK else 0)
        for level, lbits in EC_LEVEL_BITS.items():
            for mask in range(8):
                cand = format_info_bits(level, mask)
                dist = bin(cand ^ word).count("1")
                if best is None or dist < best[0]:
                    best = (dist, level, mask)
    if best is None or best[0] > 3:
        raise FormatInfoError("format information unrecoverable")
    return best[1], best[2]


class FormatInfoError(Exception):
    pass


def mask_condition(pattern: int, row: int, col: int) -> bool:
    i, j = row, col
    if pattern == 0:
        return (i + j) % 2 == 0
    if pattern == 1:
        return i % 2 == 0
    if pattern == 2:
        return j % 3 == 0
    if pattern == 3:
        return (i + j) % 3 == 0
    if pattern == 4:
        return (i // 2 + j // 3) % 2 == 0
    if pattern == 5:
        return (i * j) % 2 + (i * j) % 3 == 0
    if pattern == 6:
        return ((i * j) % 2 + (i * j) % 3) % 2 == 0
    if pattern == 7:
        return ((i + j) % 2 + (i * j) % 3) % 2 == 0
    raise ValueError(f"mask pattern must be 0-7, got {pattern}")


def mask_matrix(pattern: int, n: int) -> np.ndarray:
    """Boolean n x n array, True where the mask toggles the module."""
    rows, cols = np.indices((n, n))
    i, j = rows, cols
    if pattern == 0:
        cond = (i + j) % 2 == 0
    elif pattern == 1:
        cond = i % 2 == 0
    elif pattern == 2:
        cond = j % 3 == 0
    elif pattern == 3:
        cond = (i + j) % 3 == 0
    elif pattern == 4:
        cond = (i // 2 + j // 3) % 2 == 0
    elif pattern == 5:
        cond = (i * j) % 2 + (i * j) % 3 == 0
    elif pattern == 6:
        cond = ((i * j) % 2 + (i * j) % 3) % 2 == 0
    elif pattern == 7:
        cond = ((i + j) % 2 + (i * j) % 3) % 2 == 0
    else:
        raise ValueError(f"mask pattern must be 0-7, got {pattern}")
    return cond


def apply_mask(matrix: ModuleMatrix, pattern: int) -> ModuleMatrix:
    """XOR the mask into all non-function modules (involution)."""
    cond = mask_matrix(pattern, matrix.n) & ~matrix.function_mask
    out = matrix.copy()
    out.values[cond] ^= 1
    return out


def placement_order(spec: QrSpec) -> list[tuple[int, int]]:
    """Zig-zag bit placement coordinates, bottom-right first, skipping
    function modules and the vertical timing column."""
    return _placement_cached(spec.version)


@lru_cache(maxsize=None)
def _placement_cached(version: int) -> list[tuple[int, int]]:
    spec = QrSpec(version, "L")
    template = function_pattern_template(spec)
    n = spec.n
    coords = []
    col = n - 1
    upward = True
    while col > 0:
        if col == 6:  # vertical timing column is skipped entirely
            col -= 1
        rows = range(n - 1, -1, -1) if upward else range(n)
        for row in rows:
            for c in (col, col - 1):
                if not template.function_mask[row, c]:
                    coords.append((row, c))
        upward = not upward
        col -= 2
    return coords


def penalty_score(matrix: ModuleMatrix) -> int:
    """Standard four-rule mask evaluation penalty (lower is better)."""
    v = matrix.values
    n = matrix.n
    score = 0

    # rule 1: runs of >= 5 same-coloured modules
    for arr in (v, v.T):
        changes = np.diff(arr.astype(np.int16), axis=1) != 0
        for row in range(n):
            idx = np.flatnonzero(changes[row])
            runs = np.diff(np.concatenate(([0], idx + 1, [n])))
            long = runs[runs >= 5]
            score += int((long - 2).sum())

    # rule 2: 2x2 blocks of one colour
    same = (v[:-1, :-1] == v[1:, :-1]) & (v[:-1, :-1] == v[:-1, 1:]) & (
        v[:-1, :-1] == v[1:, 1:]
    )
    score += 3 * int(same.sum())

    # rule 3: finder-like 1:1:3:1:1 with 4-module light margin
    # dark=0 here, so the pattern in values is 0,1,0,0,0,1,0 plus 1,1,1,1
    patt_a = np.array([0, 1, 0, 0, 0, 1, 0, 1, 1, 1, 1], dtype=np.uint8)
    patt_b = patt_a[::-1]
    for arr in (v, v.T):
        windows = np.lib.stride_tricks.sliding_window_view(arr, 11, axis=1)
        hits = np.all(windows == patt_a, axis=2) | np.all(windows == patt_b, axis=2)
        score += 40 * int(hits.sum())

    # rule 4: dark-module proportion
    dark_pct = 100.0 * np.count_nonzero(v == DARK) / (n * n)
    score += 10 * int(abs(dark_pct - 50) // 5)
    return score
