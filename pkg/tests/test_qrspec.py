"""Symbol geometry and block-table tests against ISO/IEC 18004 figures."""

import pytest

from qrshuffle.qrspec import ALIGNMENT_CENTERS, EC_LEVEL_BITS, QrSpec


def test_side_length():
    for v in range(1, 11):
        assert QrSpec(version=v).n == 4 * v + 17


def test_version5_blocks_all_levels():
    # transcribed from the standard's table 9
    expect = {
        "L": ([(134, 108)], 26),
        "M": ([(67, 43)] * 2, 24),
        "Q": ([(33, 15)] * 2 + [(34, 16)] * 2, 18),
        "H": ([(33, 11)] * 2 + [(34, 12)] * 2, 22),
    }
    for level, (blocks, ec) in expect.items():
        spec = QrSpec(version=5, ec_level=level)
        assert list(spec.block_structure) == blocks
        assert spec.ec_per_block == ec
        assert spec.total_codewords == 134


def test_total_codewords_all_versions():
    # total codeword capacity per version (table 1 of the standard)
    totals = {1: 26, 2: 44, 3: 70, 4: 100, 5: 134, 6: 172, 7: 196,
              8: 242, 9: 292, 10: 346}
    for v, total in totals.items():
        for level in "LMQH":
            assert QrSpec(version=v, ec_level=level).total_codewords == total


def test_remainder_bits():
    expect = {1: 0, 2: 7, 3: 7, 4: 7, 5: 7, 6: 7, 7: 0, 8: 0, 9: 0, 10: 0}
    for v, rem in expect.items():
        assert QrSpec(version=v).remainder_bits == rem


def test_data_capacity_consistency():
    # data bits + remainder fill the non-function area exactly
    for v in range(1, 11):
        for level in "LMQH":
            spec = QrSpec(version=v, ec_level=level)
            assert spec.data_codewords < spec.total_codewords
            assert all(c - k == spec.ec_per_block
                       for c, k in spec.block_structure)


def test_byte_capacity_version5():
    # mode (4) + length (8) + terminator leaves 44 message bytes at 5-H
    spec = QrSpec(version=5, ec_level="H")
    assert spec.data_codewords == 46
    assert spec.byte_capacity() == 44


def test_length_bits():
    assert QrSpec(version=5).length_bits == 8
    assert QrSpec(version=9).length_bits == 8
    assert QrSpec(version=10).length_bits == 16


def test_alignment_centers():
    # table E.1 of the standard
    assert list(ALIGNMENT_CENTERS[1]) == []
    assert list(ALIGNMENT_CENTERS[2]) == [6, 18]
    assert list(ALIGNMENT_CENTERS[5]) == [6, 30]
    assert list(ALIGNMENT_CENTERS[7]) == [6, 22, 38]
    assert list(ALIGNMENT_CENTERS[10]) == [6, 28, 50]


def test_ec_level_indicator_bits():
    assert EC_LEVEL_BITS == {"L": 0b01, "M": 0b00, "Q": 0b11, "H": 0b10}


def test_invalid_spec_rejected():
    with pytest.raises(ValueError):
        QrSpec(version=11)
    with pytest.raises(ValueError):
        QrSpec(version=0)
    with pytest.raises(ValueError):
        QrSpec(ec_level="X")
    with pytest.raises(ValueError):
        QrSpec(mask_pattern=8)


def test_with_mask():
    spec = QrSpec()
    forced = spec.with_mask(3)
    assert forced.mask_pattern == 3
    assert forced.version == spec.version
    assert spec.mask_pattern is None  # original untouched
