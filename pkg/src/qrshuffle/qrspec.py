"""QR symbol parameters: version geometry and error-correction block structure.

Block/capacity numbers are loaded from the shipped ``data/ec_blocks.txt``
table rather than hardcoded, so they can be audited against the standard.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

EC_LEVELS = ("L", "M", "Q", "H")

# format-info encoding of the EC level (2 bits)
EC_LEVEL_BITS = {"L": 0b01, "M": 0b00, "Q": 0b11, "H": 0b10}

# alignment pattern centre coordinates per version (1-10)
ALIGNMENT_CENTERS = {
    1: [],
    2: [6, 18],
    3: [6, 22],
    4: [6, 26],
    5: [6, 30],
    6: [6, 34],
    7: [6, 22, 38],
    8: [6, 24, 42],
    9: [6, 26, 46],
    10: [6, 28, 50],
}


def _load_block_table() -> dict[tuple[int, str], tuple[int, list[int], int]]:
    table = {}
    text = (
        importlib.resources.files("qrshuffle")
        .joinpath("data/ec_blocks.txt")
        .read_text()
    )
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        version_s, level, ec_s, blocks_s, rem_s = line.split()
        ks: list[int] = []
        for part in blocks_s.split("+"):
            count_s, k_s = part.split("x")
            ks.extend([int(k_s)] * int(count_s))
        table[(int(version_s), level)] = (int(ec_s), ks, int(rem_s))
    return table


_BLOCK_TABLE = _load_block_table()

SUPPORTED_VERSIONS = sorted({v for v, _ in _BLOCK_TABLE})


@dataclass(frozen=True)
class QrSpec:
    """Symbol version, EC level and derived geometry/block structure."""

    version: int = 5
    ec_level: str = "H"
    mask_pattern: int | None = None  # None = auto (penalty-score selection)
    quiet_zone: int = 4
    block_structure: tuple[tuple[int, int], ...] = field(init=False)
    remainder_bits: int = field(init=False)

    def __post_init__(self):
        if self.version not in SUPPORTED_VERSIONS:
            raise ValueError(
                f"version {self.version} not supported (have {SUPPORTED_VERSIONS})"
            )
        if self.ec_level not in EC_LEVELS:
            raise ValueError(f"ec_level must be one of {EC_LEVELS}")
        if self.mask_pattern is not None and not 0 <= self.mask_pattern <= 7:
            raise ValueError("mask_pattern must be 0-7 or None for auto")
        ec, ks, rem = _BLOCK_TABLE[(self.version, self.ec_level)]
        object.__setattr__(
            self, "block_structure", tuple((k + ec, k) for k in ks)
        )
        object.__setattr__(self, "remainder_bits", rem)

    @property
    def n(self) -> int:
        """Side length in modules."""
        return 4 * self.version + 17

    @property
    def total_codewords(self) -> int:
        return sum(c for c, _ in self.block_structure)

    @property
    def data_codewords(self) -> int:
        return sum(k for _, k in self.block_structure)

    @property
    def ec_per_block(self) -> int:
        c, k = self.block_structure[0]
        return c - k

    @property
    def alignment_centers(self) -> list[int]:
        return ALIGNMENT_CENTERS[self.version]

    @property
    def length_bits(self) -> int:
        """Byte-mode character-count field width."""
        return 8 if self.version <= 9 else 16

    def byte_capacity(self) -> int:
        """Maximum byte-mode payload length (mode + count header + terminator)."""
        overhead_bits = 4 + self.length_bits + 4
        return self.data_codewords - (overhead_bits + 7) // 8

    def with_mask(self, mask_pattern: int) -> "QrSpec":
        return QrSpec(self.version, self.ec_level, mask_pattern, self.quiet_zone)
