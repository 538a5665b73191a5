"""Independent brute-force references the fast implementations are tested
against.  Everything here is written as literally as possible: explicit
per-cell loops, no shifted-array tricks, no shared helpers from the
package under test beyond plain dataclasses.
"""

import numpy as np


def peak_label_map_oracle(a, eta, level, radius, metric):
    """Literal two-pass peak labeling.

    Pass 1: cell is a candidate iff a[i, j] >= eta * level.
    Pass 2: a candidate is a peak iff, over every in-bounds neighbour
    (i + di, j + dj) with (di, dj) != (0, 0) inside the distance-radius
    ball, it strictly exceeds neighbours that precede (0, 0) in
    lexicographic scan order and is >= neighbours that follow it.
    """
    a = np.asarray(a, dtype=np.float64)
    nt, nx = a.shape
    thr = eta * level
    labels = np.zeros((nt, nx), dtype=np.uint8)
    r = radius
    for i in range(nt):
        for j in range(nx):
            if a[i, j] < thr:
                continue
            labels[i, j] = 1
            is_peak = True
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    if di == 0 and dj == 0:
                        continue
                    if metric == "euclidean" and di * di + dj * dj > r * r:
                        continue
                    ni, nj = i + di, j + dj
                    if not (0 <= ni < nt and 0 <= nj < nx):
                        continue
                    if (di, dj) < (0, 0):
                        ok = a[i, j] > a[ni, nj]
                    else:
                        ok = a[i, j] >= a[ni, nj]
                    if not ok:
                        is_peak = False
                        break
                if not is_peak:
                    break
            if is_peak:
                labels[i, j] = 2
    return labels


def rect_overlap_oracle(a, b):
    """Plain rectangle intersection area; corners (x1, y1, x2, y2)."""
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    return ix * iy


def iou_oracle(a, b):
    inter = rect_overlap_oracle(a, b)
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def greedy_match_oracle(det_boxes, det_confs, truth_boxes, tau):
    """Greedy matching in descending confidence (ties: input order).

    Returns the matched truth index (or None) per detection, in the
    sorted order, alongside that order's detection indices.
    """
    order = sorted(range(len(det_boxes)), key=lambda k: (-det_confs[k], k))
    taken = set()
    assignment = []
    for k in order:
        best, best_v = None, tau
        for idx, tb in enumerate(truth_boxes):
            if idx in taken:
                continue
            v = iou_oracle(det_boxes[k], tb)
            if v > best_v or (v == best_v and v >= tau and best is None):
                best, best_v = idx, v
        if best is not None:
            taken.add(best)
        assignment.append(best)
    return order, assignment


def ap_oracle(hit_flags, n_truth):
    """Non-interpolated AP: sum of (delta recall) * precision."""
    ap = 0.0
    tp = 0
    prev_recall = 0.0
    for k, hit in enumerate(hit_flags):
        if hit:
            tp += 1
        recall = tp / n_truth
        precision = tp / (k + 1)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def point_in_convex_polygon(px, py, poly):
    """Vectorized membership test for a CCW convex polygon."""
    px = np.asarray(px)
    py = np.asarray(py)
    inside = np.ones(px.shape, dtype=bool)
    n = len(poly)
    for k in range(n):
        x1, y1 = poly[k]
        x2, y2 = poly[(k + 1) % n]
        cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        inside &= cross >= 0.0
    return inside


def convex_overlap_area_mc(rect, poly_ccw, rng, n_samples=200_000):
    """Monte-Carlo area of rect-polygon intersection, plus its standard
    error.  Samples uniformly over the rectangle."""
    x_min, y_min, x_max, y_max = rect
    rect_area = (x_max - x_min) * (y_max - y_min)
    px = rng.uniform(x_min, x_max, n_samples)
    py = rng.uniform(y_min, y_max, n_samples)
    frac = point_in_convex_polygon(px, py, poly_ccw).mean()
    area = frac * rect_area
    se = rect_area * np.sqrt(max(frac * (1 - frac), 1e-12) / n_samples)
    return area, se
