"""GF(256) arithmetic and Reed-Solomon coding over the QR primitive polynomial.

Field: GF(2^8) with primitive polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11d),
generator element alpha = 2.  Codewords use consecutive generator roots
alpha^0 .. alpha^(parity-1), matching ISO/IEC 18004.
"""

from __future__ import annotations

PRIMITIVE_POLY = 0x11D

# exp table doubled so products of two logs never need an explicit mod 255
_EXP = [0] * 512
_LOG = [0] * 256

_x = 1
for _i in range(255):
    _EXP[_i] = _x
    _LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= PRIMITIVE_POLY
for _i in range(255, 512):
    _EXP[_i] = _EXP[_i - 255]


class DecodeFailure(Exception):
    """Raised when a codeword has more errors than the code can correct."""


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return _EXP[_LOG[a] + _LOG[b]]


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return _EXP[_LOG[a] - _LOG[b] + 255]


def gf_pow(a: int, n: int) -> int:
    if a == 0:
        return 0
    return _EXP[(_LOG[a] * n) % 255]


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("zero has no inverse in GF(256)")
    return _EXP[255 - _LOG[a]]


def poly_mul(p: list[int], q: list[int]) -> list[int]:
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        la = _LOG[a]
        for j, b in enumerate(q):
            if b:
                out[i + j] ^= _EXP[la + _LOG[b]]
    return out


def poly_eval(p: list[int], x: int) -> int:
    """Evaluate polynomial (highest-degree coefficient first) at x."""
    y = 0
    for c in p:
        y = gf_mul(y, x) ^ c
    return y


def rs_generator_poly(parity: int) -> list[int]:
    """Generator polynomial prod_{i=0}^{parity-1} (x - alpha^i), degree-first."""
    g = [1]
    for i in range(parity):
        g = poly_mul(g, [1, _EXP[i]])
    return g


def rs_encode(data: bytes | list[int], parity: int) -> bytes:
    """Systematic RS encoding: returns data followed by `parity` check bytes."""
    if parity < 1:
        raise ValueError(f"parity count must be >= 1, got {parity}")
    gen = rs_generator_poly(parity)
    rem = list(data) + [0] * parity
    for i in range(len(data)):
        coef = rem[i]
        if coef == 0:
            continue
        lc = _LOG[coef]
        for j in range(1, len(gen)):
            if gen[j]:
                rem[i + j] ^= _EXP[lc + _LOG[gen[j]]]
    return bytes(data) + bytes(rem[len(data):])


def _syndromes(codeword: list[int], parity: int) -> list[int]:
    return [poly_eval(codeword, _EXP[i]) for i in range(parity)]


def _berlekamp_massey(synd: list[int]) -> list[int]:
    """Error locator polynomial, lowest-degree coefficient first."""
    cur = [1]
    prev = [1]
    L = 0
    shift = 1
    b = 1
    for n, s in enumerate(synd):
        delta = s
        for i in range(1, min(L, len(cur) - 1) + 1):
            delta ^= gf_mul(cur[i], synd[n - i])
        if delta == 0:
            shift += 1
            continue
        coef = gf_div(delta, b)
        if 2 * L <= n:
            saved = cur[:]
            if len(cur) < len(prev) + shift:
                cur = cur + [0] * (len(prev) + shift - len(cur))
            for i, c in enumerate(prev):
                cur[i + shift] ^= gf_mul(coef, c)
            L = n + 1 - L
            prev = saved
            b = delta
            shift = 1
        else:
            if len(cur) < len(prev) + shift:
                cur = cur + [0] * (len(prev) + shift - len(cur))
            for i, c in enumerate(prev):
                cur[i + shift] ^= gf_mul(coef, c)
            shift += 1
    return cur[:L + 1]


def rs_decode(codeword: bytes | list[int], parity: int) -> tuple[bytes, int]:
    """Correct up to floor(parity/2) byte errors.

    Returns (data bytes, number of corrected positions); raises DecodeFailure
    when the error pattern is uncorrectable.
    """
    if parity < 1:
        raise ValueError(f"parity count must be >= 1, got {parity}")
    cw = list(codeword)
    if len(cw) <= parity:
        raise ValueError("codeword shorter than parity length")
    synd = _syndromes(cw, parity)
    if not any(synd):
        return bytes(cw[:-parity]), 0

    locator = _berlekamp_massey(synd)
    n_errors = len(locator) - 1
    if n_errors == 0 or 2 * n_errors > parity:
        raise DecodeFailure("error count exceeds correction capacity")

    # Chien search: roots alpha^{-pos} of the locator give error positions.
    length = len(cw)
    positions = []
    for pos in range(length):
        x_inv = _EXP[(255 - pos) % 255]
        acc = 0
        for i, c in enumerate(locator):
            acc ^= gf_mul(c, gf_pow(x_inv, i))
        if acc == 0:
            positions.append(length - 1 - pos)
    if len(positions) != n_errors:
        raise DecodeFailure("error locator roots do not match error count")

    # Forney: magnitudes from the error evaluator omega = synd * locator mod x^parity.
    synd_poly = synd[:]  # low-degree first
    omega = [0] * parity
    for i in range(parity):
        acc = 0
        for j in range(min(i + 1, len(locator))):
            acc ^= gf_mul(locator[j], synd_poly[i - j])
        omega[i] = acc

    loc_deriv = [locator[i] for i in range(1, len(locator), 2)]  # formal derivative, odd terms
    for pos in positions:
        x_inv = _EXP[(255 - (length - 1 - pos)) % 255]
        num = 0
        for i, c in enumerate(omega):
            num ^= gf_mul(c, gf_pow(x_inv, i))
        den = 0
        for i, c in enumerate(loc_deriv):
            den ^= gf_mul(c, gf_pow(x_inv, 2 * i))
        if den == 0:
            raise DecodeFailure("degenerate error magnitude denominator")
        cw[pos] ^= gf_mul(gf_inv(x_inv), gf_div(num, den))

    if any(_syndromes(cw, parity)):
        raise DecodeFailure("syndromes nonzero after correction")
    return bytes(cw[:-parity]), n_errors
