"""Finder-pattern location via 1:1:3:1:1 run-length scanning, orientation
normalization, and perspective rectification onto a canonical grid."""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .imageops import GridGeometry
from .qrspec import SUPPORTED_VERSIONS, QrSpec


class LocateError(Exception):
    pass


@dataclass
class FinderResult:
    """Detected finder centres in pixel coordinates, canonical order."""

    top_left: tuple[float, float]
    top_right: tuple[float, float]
    bottom_left: tuple[float, float]
    module_px: float
    n: int

    def geometry(self) -> GridGeometry:
        """Axis-aligned geometry estimate (valid for unrotated images)."""
        a = max(3, round(self.module_px))
        ox = round(self.top_left[0] - 3.5 * self.module_px)
        oy = round(self.top_left[1] - 3.5 * self.module_px)
        return GridGeometry(ox, oy, a, self.n)


def _ratio_ok(runs, module: float) -> bool:
    expected = (1, 1, 3, 1, 1)
    for run, exp in zip(runs, expected):
        tol = 0.5 * module if exp == 1 else 1.5 * module
        if abs(run - exp * module) > max(tol, 1.0):
            return False
    return True


def _scan_line(line: np.ndarray):
    """Yield (center_offset, module_size) for 1:1:3:1:1 windows in a binary line."""
    changes = np.flatnonzero(np.diff(line.astype(np.int16)) != 0)
    bounds = np.concatenate(([0], changes + 1, [len(line)]))
    runs = np.diff(bounds)
    starts = bounds[:-1]
    vals = line[starts]
    for i in range(len(runs) - 4):
        if vals[i] != 0:  # window must start dark
            continue
        window = runs[i:i + 5]
        module = window.sum() / 7.0
        if module < 1.0:
            continue
        if _ratio_ok(window, module):
            center = starts[i] + window[0] + window[1] + window[2] / 2.0
            yield center, module


def _check_vertical(binary: np.ndarray, x: int, y: float, module: float):
    """Cross-check a horizontal candidate along its column; returns refined y."""
    col = binary[:, x]
    for cy, m in _scan_line(col):
        if abs(cy - y) <= 2.0 * module and 0.4 * module <= m <= 2.5 * module:
            return cy, m
    return None


def find_finder_centers(binary: np.ndarray) -> list[tuple[float, float, float]]:
    """All cross-validated finder-pattern candidates as (x, y, module_px)."""
    h, w = binary.shape
    raw = []
    for y in range(h):
        for cx, m in _scan_line(binary[y]):
            raw.append((cx, y, m))
    # vertical cross-check and clustering
    clusters: list[list[float]] = []  # [sum_x, sum_y, sum_m, count]
    for cx, y, m in raw:
        chk = _check_vertical(binary, int(round(cx)), y, m)
        if chk is None:
            continue
        cy, mv = chk
        mm = (m + mv) / 2.0
        for cl in clusters:
            if abs(cl[0] / cl[3] - cx) < 3 * mm and abs(cl[1] / cl[3] - cy) < 3 * mm:
                cl[0] += cx
                cl[1] += cy
                cl[2] += mm
                cl[3] += 1
                break
        else:
            clusters.append([cx, cy, mm, 1])
    out = [
        (cl[0] / cl[3], cl[1] / cl[3], cl[2] / cl[3], cl[3]) for cl in clusters
    ]
    out.sort(key=lambda t: -t[3])  # strongest support first
    return [(x, y, m) for x, y, m, _ in out]


def _order_corners(pts: list[tuple[float, float]]):
    """Return (top_left, top_right, bottom_left) with proper chirality."""
    best = None
    for k in range(3):
        a = np.array(pts[k])
        b = np.array(pts[(k + 1) % 3])
        c = np.array(pts[(k + 2) % 3])
        u, v = b - a, c - a
        cosang = abs(float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v) + 1e-12))
        if best is None or cosang < best[0]:
            best = (cosang, a, b, c)
    _, a, b, c = best
    cross = (b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0]
    if cross < 0:
        b, c = c, b
    return tuple(a), tuple(b), tuple(c)


def locate_finder(binary: np.ndarray, n_hint: int | None = None) -> FinderResult:
    """Locate three finder patterns in a binarized {0,1} image.

    Raises LocateError when fewer than three consistent candidates exist.
    """
    cands = find_finder_centers(np.asarray(binary))
    if len(cands) < 3:
        raise LocateError(f"found {len(cands)} finder candidates, need 3")
    cands = cands[:6]
    # score every candidate triple on module-size consistency plus corner
    # geometry: near-right angle at the shared corner, comparable side
    # lengths, and an implied symbol size matching a supported version
    from itertools import combinations

    sides = sorted(4 * v + 17 for v in SUPPORTED_VERSIONS)
    best = None
    for triple in combinations(cands, 3):
        ms = [t[2] for t in triple]
        mbar = sum(ms) / 3.0
        spread = (max(ms) - min(ms)) / mbar
        if spread > 0.6:
            continue
        tl, tr, bl = _order_corners([(t[0], t[1]) for t in triple])
        u = np.subtract(tr, tl)
        v = np.subtract(bl, tl)
        lu, lv = np.linalg.norm(u), np.linalg.norm(v)
        if lu < 1.0 or lv < 1.0:
            continue
        cosang = abs(float(u @ v)) / (lu * lv)
        ratio = lu / lv
        if cosang > 0.5 or not 0.5 <= ratio <= 2.0:
            continue
        n_est = (lu + lv) / 2.0 / mbar + 7.0
        target = n_hint if n_hint is not None else min(
            sides, key=lambda s: abs(s - n_est))
        score = (spread + 2.0 * cosang + abs(np.log(ratio))
                 + 2.0 * abs(n_est - target) / target)
        if best is None or score < best[0]:
            best = (score, (tl, tr, bl), mbar, n_est)
    if best is None:
        raise LocateError("no geometrically consistent finder triple")
    _, (tl, tr, bl), mbar, n_est = best
    if n_hint is not None:
        n = n_hint
    else:
        n = min(sides, key=lambda s: abs(s - n_est))
    if abs(n - n_est) > max(4.0, 0.15 * n):
        raise LocateError(f"inconsistent symbol size estimate {n_est:.1f}")
    # centre spacing is a steadier module estimate than run widths
    dist = (np.linalg.norm(np.subtract(tr, tl))
            + np.linalg.norm(np.subtract(bl, tl))) / 2.0
    return FinderResult(tl, tr, bl, dist / (n - 7.0), n)


def _affine_from_finders(result: FinderResult) -> np.ndarray:
    src = np.array(
        [[3.5, 3.5], [result.n - 3.5, 3.5], [3.5, result.n - 3.5]], dtype=np.float32
    )
    dst = np.array(
        [result.top_left, result.top_right, result.bottom_left], dtype=np.float32
    )
    return cv2.getAffineTransform(src, dst)


def _find_alignment(gray: np.ndarray, predicted: np.ndarray, module: float):
    """Template-match the bottom-right alignment pattern near its predicted
    position; returns a refined (x, y) or None."""
    a = max(2, int(round(module)))
    size = 5 * a
    tmpl = np.full((size, size), 0, dtype=np.float32)
    tmpl[a:-a, a:-a] = 255.0
    tmpl[2 * a:-2 * a, 2 * a:-2 * a] = 0.0
    half_win = int(round(3.5 * module)) + size // 2
    x0 = int(round(predicted[0])) - half_win
    y0 = int(round(predicted[1])) - half_win
    x1, y1 = x0 + 2 * half_win, y0 + 2 * half_win
    h, w = gray.shape
    x0, y0 = max(0, x0), max(0, y0)
    x1, y1 = min(w, x1), min(h, y1)
    if x1 - x0 < size + 2 or y1 - y0 < size + 2:
        return None
    window = gray[y0:y1, x0:x1].astype(np.float32)
    res = cv2.matchTemplate(window, tmpl, cv2.TM_CCOEFF_NORMED)
    _, score, _, loc = cv2.minMaxLoc(res)
    if score < 0.4:
        return None
    return (x0 + loc[0] + size / 2.0, y0 + loc[1] + size / 2.0)


def rectify(gray: np.ndarray, result: FinderResult, module_px: int = 8,
            quiet_zone: int = 4) -> tuple[np.ndarray, GridGeometry]:
    """Warp the symbol onto a canonical axis-aligned grid.

    Uses the three finder centres plus the bottom-right alignment pattern
    (parallelogram completion when no alignment pattern is found) to build
    a full homography.
    """
    n = result.n
    affine = _affine_from_finders(result)

    def apply_affine(mx_, my_):
        v = affine @ np.array([mx_, my_, 1.0])
        return np.array([v[0], v[1]])

    src_mods = [(3.5, 3.5), (n - 3.5, 3.5), (3.5, n - 3.5)]
    dst_px = [result.top_left, result.top_right, result.bottom_left]
    if n >= 25:  # version >= 2: alignment pattern at (n-6.5, n-6.5)
        predicted = apply_affine(n - 6.5, n - 6.5)
        found = _find_alignment(np.asarray(gray, dtype=np.float64), predicted,
                                result.module_px)
        fourth_mod = (n - 6.5, n - 6.5)
        fourth_px = found if found is not None else tuple(predicted)
    else:
        fourth_mod = (n - 3.5, n - 3.5)
        fourth_px = tuple(apply_affine(n - 3.5, n - 3.5))
    src_mods.append(fourth_mod)
    dst_px.append(fourth_px)

    a = module_px
    canon = np.array(
        [[(quiet_zone + mx_) * a, (quiet_zone + my_) * a] for mx_, my_ in src_mods],
        dtype=np.float32,
    )
    image_pts = np.array(dst_px, dtype=np.float32)
    H = cv2.getPerspectiveTransform(canon, image_pts)
    side = (n + 2 * quiet_zone) * a
    out = cv2.warpPerspective(
        np.asarray(gray, dtype=np.float64), H, (side, side),
        flags=cv2.INTER_LINEAR | cv2.WARP_INVERSE_MAP,
        borderMode=cv2.BORDER_CONSTANT, borderValue=255.0,
    )
    return out, GridGeometry(quiet_zone * a, quiet_zone * a, a, n)
