"""Region-constrained QR reshuffle: freeze face + marker modules, rebuild the
rest from a valid codeword of the target message, and synthesize the
adaptive-halftone blueprint."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import matrix as mx
from .encode import (
    bits_to_bytes,
    build_matrix,
    codeword_bits,
    data_bitstream,
    interleave,
    interleave_map,
    place_bits,
    split_blocks,
)
from .galois import rs_encode
from .imageops import GridGeometry
from .qrspec import QrSpec
from .scanner import bit_to_block_map, count_errors


@dataclass
class RegionSets:
    """Face and marker module index sets as boolean n x n masks."""

    face: np.ndarray
    markers: np.ndarray

    def __post_init__(self):
        self.face = np.asarray(self.face, dtype=bool)
        self.markers = np.asarray(self.markers, dtype=bool)
        if self.face.shape != self.markers.shape:
            raise ValueError("face / markers shape mismatch")

    @property
    def n(self) -> int:
        return self.face.shape[0]

    @property
    def frozen(self) -> np.ndarray:
        return self.face | self.markers

    @classmethod
    def from_spec(cls, spec: QrSpec, face: np.ndarray | None = None) -> "RegionSets":
        markers = mx.function_pattern_map(spec)
        if face is None:
            face = np.zeros_like(markers)
        return cls(face, markers)

    def face_indices(self) -> list[int]:
        n = self.n
        rows, cols = np.nonzero(self.face)
        return [int(r) * n + int(c) for r, c in zip(rows, cols)]


def face_mask_to_modules(mask_image: np.ndarray, geom: GridGeometry,
                         coverage: float = 1.0) -> np.ndarray:
    """Modules whose mask coverage reaches `coverage` (1.0 = fully covered)."""
    if not 0.0 < coverage <= 1.0:
        raise ValueError("coverage must be in (0, 1]")
    mask_image = np.asarray(mask_image, dtype=np.float64) / 255.0
    if not geom.covers(mask_image.shape):
        raise ValueError("grid geometry exceeds mask bounds")
    a, n = geom.module_px, geom.n
    sub = mask_image[geom.origin_y:geom.origin_y + n * a,
                     geom.origin_x:geom.origin_x + n * a]
    means = sub.reshape(n, a, n, a).mean(axis=(1, 3))
    return means >= coverage - 1e-12


@dataclass
class ReshuffleReport:
    feasible: bool
    per_block_errors_after: list[int]
    per_block_capacity: list[int]
    slack: int
    mask_pattern_chosen: int
    pad_bits_flipped: int
    frozen_modules: int

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "feasible": self.feasible,
            "per_block_errors_after": self.per_block_errors_after,
            "per_block_capacity": self.per_block_capacity,
            "slack": self.slack,
            "mask_pattern_chosen": self.mask_pattern_chosen,
            "pad_bits_flipped": self.pad_bits_flipped,
            "frozen_modules": self.frozen_modules,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class InfeasibleError(Exception):
    """Raised when frozen modules exceed some block's correction capacity."""

    def __init__(self, report: ReshuffleReport):
        worst = min(
            c - e
            for e, c in zip(report.per_block_errors_after, report.per_block_capacity)
        )
        super().__init__(
            f"reshuffle infeasible: worst block exceeds capacity by {-worst} bytes"
        )
        self.report = report


def _placement_index(spec: QrSpec) -> dict[tuple[int, int], int]:
    return {rc: i for i, rc in enumerate(mx.placement_order(spec))}


def _compose(V: mx.ModuleMatrix, E: mx.ModuleMatrix,
             regions: RegionSets) -> mx.ModuleMatrix:
    out = V.copy()
    override = regions.face & ~regions.markers
    out.values[override] = E.values[override]
    return out


def reshuffle(E: mx.ModuleMatrix, message: bytes, regions: RegionSets,
              spec: QrSpec, optimize_padding: bool = False,
              ) -> tuple[mx.ModuleMatrix, ReshuffleReport]:
    """Rebuild all non-frozen modules from a valid codeword of `message`.

    The mask pattern is chosen (over all 8) to minimize disagreement with E
    inside the face region; face modules are then frozen bit-exact.  Raises
    InfeasibleError when a block's induced byte errors exceed its capacity.
    """
    if E.n != spec.n:
        raise ValueError("matrix side does not match spec")
    if regions.n != spec.n:
        raise ValueError("region side does not match spec")

    frozen_free = regions.face & ~regions.markers
    best = None
    for p in range(8):
        V = build_matrix(message, spec.with_mask(p))
        disagree = int(np.count_nonzero((V.values != E.values) & frozen_free))
        if best is None or disagree < best[0]:
            best = (disagree, p, V)
    _, mask_chosen, V = best

    flipped = 0
    if optimize_padding:
        V, flipped = optimize_pad_bits(E, message, spec.with_mask(mask_chosen),
                                       regions)

    E_tilde = _compose(V, E, regions)
    report_errors = count_errors(E_tilde, V, spec, regions.face)
    capacities = [(c - k) // 2 for c, k in spec.block_structure]
    per_block = report_errors.per_block_errors
    feasible = all(e <= t for e, t in zip(per_block, capacities))
    report = ReshuffleReport(
        feasible=feasible,
        per_block_errors_after=per_block,
        per_block_capacity=capacities,
        slack=min(t - e for e, t in zip(per_block, capacities)),
        mask_pattern_chosen=mask_chosen,
        pad_bits_flipped=flipped,
        frozen_modules=int(np.count_nonzero(regions.frozen)),
    )
    if not feasible:
        raise InfeasibleError(report)
    return E_tilde, report


def _free_pad_bits(message: bytes, spec: QrSpec) -> list[int]:
    """Data bit indices (into the contiguous data bitstream) that belong to
    whole padding bytes and are therefore free over GF(2)."""
    used = 4 + spec.length_bits + 8 * len(message)
    used += min(4, spec.data_codewords * 8 - used)  # terminator
    first_pad_byte = (used + 7) // 8
    return list(range(8 * first_pad_byte, 8 * spec.data_codewords))


def optimize_pad_bits(E: mx.ModuleMatrix, message: bytes, spec: QrSpec,
                      regions: RegionSets) -> tuple[mx.ModuleMatrix, int]:
    """Flip padding-byte bits to maximize agreement between the codeword
    matrix and E inside the face region.

    RS parity is GF(2)-linear in the data bits, so each free bit has a fixed
    influence set of placed bits; an exact GF(2) solve is attempted first,
    falling back to greedy coordinate descent (agreement never decreases).
    Requires a fixed mask pattern on `spec`.
    """
    if spec.mask_pattern is None:
        raise ValueError("optimize_pad_bits needs a fixed mask pattern")
    free_bits = _free_pad_bits(message, spec)
    base_data = bytearray(bits_to_bytes(data_bitstream(message, spec)))
    if not free_bits:
        return build_matrix(message, spec), 0

    # byte index in contiguous data -> (block, byte-within-block)
    block_of_data_byte = []
    for b, (c, k) in enumerate(spec.block_structure):
        block_of_data_byte.extend([(b, i) for i in range(k)])
    stream_pos = {loc: s for s, loc in enumerate(interleave_map(spec))}
    placement = mx.placement_order(spec)
    pindex_of_bit = lambda loc, bit: 8 * stream_pos[loc] + bit

    # target positions: face modules outside markers that carry placed bits
    inv_place = _placement_index(spec)
    mcond = mx.mask_matrix(spec.mask_pattern, spec.n)
    targets = []  # (placed bit index, desired raw bit)
    rows, cols = np.nonzero(regions.face & ~regions.markers)
    for r, c in zip(rows, cols):
        bit_idx = inv_place.get((int(r), int(c)))
        if bit_idx is None or bit_idx >= 8 * spec.total_codewords:
            continue
        desired = (1 - int(E.values[r, c])) ^ int(mcond[r, c])
        targets.append((bit_idx, desired))
    if not targets:
        return build_matrix(message, spec), 0
    target_pos = {bit_idx: s for s, (bit_idx, _) in enumerate(targets)}

    # influence of each free data bit on the target positions
    n_targets = len(targets)
    columns = []
    for fb in free_bits:
        byte_idx, bit_in_byte = divmod(fb, 8)
        blk, byte_in_blk = block_of_data_byte[byte_idx]
        c_blk, k_blk = spec.block_structure[blk]
        unit = bytearray(k_blk)
        unit[byte_in_blk] = 1 << (7 - bit_in_byte)
        cw = rs_encode(bytes(unit), c_blk - k_blk)
        col = np.zeros(n_targets, dtype=np.uint8)
        for j, byte in enumerate(cw):
            if byte == 0:
                continue
            base = pindex_of_bit((blk, j), 0)
            for b in range(8):
                if byte & (1 << (7 - b)):
                    s = target_pos.get(base + b)
                    if s is not None:
                        col[s] ^= 1
        columns.append(col)
    A = np.array(columns, dtype=np.uint8).T  # n_targets x n_free

    # current raw bits at target positions
    cur_bits = codeword_bits(message, spec)
    b_vec = np.array(
        [cur_bits[bit_idx] ^ desired for bit_idx, desired in targets],
        dtype=np.uint8,
    )

    x = _solve_gf2_min_weight(A, b_vec)
    flipped = int(x.sum())
    if flipped == 0:
        return build_matrix(message, spec), 0

    data = bytearray(base_data)
    for fb, xv in zip(free_bits, x):
        if xv:
            byte_idx, bit_in_byte = divmod(fb, 8)
            data[byte_idx] ^= 1 << (7 - bit_in_byte)
    stream = interleave(split_blocks(bytes(data), spec), spec)
    bits = []
    for byte in stream:
        for k in range(7, -1, -1):
            bits.append((byte >> k) & 1)
    bits.extend([0] * spec.remainder_bits)
    V = place_bits(bits, spec, spec.mask_pattern)
    return V, flipped


def _solve_gf2_min_weight(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Heuristic minimizer of |b + A x| over GF(2).

    Tries an exact solution by Gaussian elimination first; otherwise greedy
    coordinate descent from x = 0 (monotone in the mismatch count).
    """
    n_rows, n_cols = A.shape
    # exact attempt
    M = np.concatenate([A.copy(), b.reshape(-1, 1).copy()], axis=1).astype(np.uint8)
    pivots = []
    r = 0
    for c in range(n_cols):
        rows_with = np.nonzero(M[r:, c])[0]
        if len(rows_with) == 0:
            continue
        pr = r + rows_with[0]
        M[[r, pr]] = M[[pr, r]]
        for rr in range(n_rows):
            if rr != r and M[rr, c]:
                M[rr] ^= M[r]
        pivots.append((r, c))
        r += 1
        if r == n_rows:
            break
    if not np.any(M[r:, -1]):  # consistent: exact solution exists
        x = np.zeros(n_cols, dtype=np.uint8)
        for pr, pc in pivots:
            x[pc] = M[pr, -1]
        return x

    # greedy fallback
    x = np.zeros(n_cols, dtype=np.uint8)
    residual = b.copy()
    improved = True
    while improved:
        improved = False
        weight = int(residual.sum())
        for c in range(n_cols):
            new_w = int((residual ^ A[:, c]).sum())
            if new_w < weight:
                residual ^= A[:, c]
                x[c] ^= 1
                weight = new_w
                improved = True
    return x


@dataclass
class Blueprint:
    """Guidance image plus the grid/bit context it encodes."""

    image: np.ndarray
    geometry: GridGeometry
    target_matrix: mx.ModuleMatrix
    regions: RegionSets
    sub_square_ratio: float


def build_blueprint(source: np.ndarray, E_tilde: mx.ModuleMatrix,
                    regions: RegionSets, geom: GridGeometry,
                    sub_square_ratio: float = 1.0 / 3.0) -> Blueprint:
    """Adaptive-halftone blueprint: source texture everywhere, hard central
    sub-squares carrying the module bits outside the face region; function
    modules rendered fully hard."""
    if not 0.0 < sub_square_ratio <= 1.0:
        raise ValueError("sub_square_ratio must be in (0, 1]")
    source = np.asarray(source, dtype=np.float64)
    if not geom.covers(source.shape):
        raise ValueError("grid geometry exceeds source bounds")
    a, n = geom.module_px, geom.n
    out = source.copy()
    s = max(1, round(sub_square_ratio * a))
    off = (a - s) // 2
    for r in range(n):
        for c in range(n):
            if regions.face[r, c] and not regions.markers[r, c]:
                continue
            y0 = geom.origin_y + r * a
            x0 = geom.origin_x + c * a
            hard = 255.0 * float(E_tilde.values[r, c])
            if regions.markers[r, c]:
                out[y0:y0 + a, x0:x0 + a] = hard
            else:
                out[y0 + off:y0 + off + s, x0 + off:x0 + off + s] = hard
    return Blueprint(out, geom, E_tilde.copy(), regions, sub_square_ratio)
