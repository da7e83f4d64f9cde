"""Shared fixtures and brute-force reference implementations.

The reference assigners below are plain loops over priors and gts, written
from the assignment rules rather than from the vectorized code.
"""
import itertools
import json
import math

import numpy as np
import pytest

from coassign.assigners import IGNORED, NEGATIVE, GroundTruth
from coassign.priors import build_pyramid_spec, generate_anchors, generate_points


# ---------------------------------------------------------------------------
# reference implementations
# ---------------------------------------------------------------------------

def brute_force_min_cost(cost):
    """Minimum total cost of a one-to-one assignment by full enumeration."""
    cost = np.asarray(cost, dtype=np.float64)
    rows, cols = cost.shape
    if rows >= cols:
        return min(math.fsum(cost[r, c] for c, r in enumerate(perm))
                   for perm in itertools.permutations(range(rows), cols))
    return min(math.fsum(cost[r, c] for r, c in enumerate(perm))
               for perm in itertools.permutations(range(cols), rows))


def brute_force_lex_optimum(cost):
    """Lexicographically smallest query-sorted pair list among exact optima.

    Meant for integer-valued costs, where sums compare exactly.
    """
    cost = np.asarray(cost, dtype=np.float64)
    rows, cols = cost.shape
    best = None
    if rows >= cols:
        candidates = (sorted(zip(perm, range(cols))) for perm in itertools.permutations(range(rows), cols))
    else:
        candidates = (list(zip(range(rows), perm)) for perm in itertools.permutations(range(cols), rows))
    for pairs in candidates:
        key = (math.fsum(cost[q, g] for q, g in pairs), pairs)
        if best is None or key < best:
            best = key
    return tuple(best[1])


def ref_bilinear(values, out_h, out_w):
    """Half-pixel-centred bilinear sampling with edge clamping, one output cell at a time."""
    in_h, in_w = values.shape
    out = np.empty((out_h, out_w))
    for r in range(out_h):
        sy = min(max((r + 0.5) * in_h / out_h - 0.5, 0.0), in_h - 1)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, in_h - 1)
        ty = sy - y0
        for c in range(out_w):
            sx = min(max((c + 0.5) * in_w / out_w - 0.5, 0.0), in_w - 1)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, in_w - 1)
            tx = sx - x0
            top = values[y0, x0] * (1 - tx) + values[y0, x1] * tx
            bottom = values[y1, x0] * (1 - tx) + values[y1, x1] * tx
            out[r, c] = top * (1 - ty) + bottom * ty
    return out


def ref_iou(a, b):
    iw = max(min(a[2], b[2]) - max(a[0], b[0]), 0.0)
    ih = max(min(a[3], b[3]) - max(a[1], b[1]), 0.0)
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def _strictly_inside(x, y, box):
    return x - box[0] > 0 and y - box[1] > 0 and box[2] - x > 0 and box[3] - y > 0


def ref_atss(priors, gt, k):
    n = len(priors)
    assigned = [NEGATIVE] * n
    claims = {}
    for g in range(len(gt)):
        box = gt.boxes[g]
        gcx = (box[0] + box[2]) / 2.0
        gcy = (box[1] + box[3]) / 2.0
        candidates = []
        for j in sorted(set(int(v) for v in priors.levels)):
            idx = [i for i in range(n) if priors.levels[i] == j]
            idx.sort(key=lambda i: (float(np.hypot(priors.centers[i][0] - gcx, priors.centers[i][1] - gcy)),
                                    int(priors.locations[i])))
            candidates.extend(idx[:k])
        ious = np.array([ref_iou(priors.boxes[i], box) for i in candidates])
        threshold = ious.mean() + (ious.std(ddof=1) if len(ious) > 1 else 0.0)
        for i, v in zip(candidates, ious):
            if v >= threshold and _strictly_inside(priors.centers[i][0], priors.centers[i][1], box):
                if i not in claims or v > claims[i][0]:
                    claims[i] = (v, g)
    for i, (_, g) in claims.items():
        assigned[i] = g
    return assigned


def ref_fcos(priors, gt, radius, ranges):
    assigned = [NEGATIVE] * len(priors)
    for i in range(len(priors)):
        px, py = priors.centers[i]
        stride = 2 ** (2 + int(priors.levels[i]))
        lo, hi = ranges[int(priors.levels[i]) - 1]
        best_area = None
        for g in range(len(gt)):
            b = gt.boxes[g]
            gcx = (b[0] + b[2]) / 2.0
            gcy = (b[1] + b[3]) / 2.0
            region = (max(gcx - stride * radius, b[0]), max(gcy - stride * radius, b[1]),
                      min(gcx + stride * radius, b[2]), min(gcy + stride * radius, b[3]))
            if not _strictly_inside(px, py, region):
                continue
            reach = max(px - b[0], py - b[1], b[2] - px, b[3] - py)
            if not lo < reach <= hi:
                continue
            area = (b[2] - b[0]) * (b[3] - b[1])
            if best_area is None or area < best_area:
                best_area = area
                assigned[i] = g
    return assigned


def ref_max_iou(priors, gt, pos_thr, neg_thr):
    n, num_gts = len(priors), len(gt)
    assigned = [NEGATIVE] * n
    if num_gts == 0:
        return assigned
    ious = [[ref_iou(priors.boxes[i], gt.boxes[g]) for g in range(num_gts)] for i in range(n)]
    for i in range(n):
        best_g = 0
        for g in range(1, num_gts):
            if ious[i][g] > ious[i][best_g]:
                best_g = g
        v = ious[i][best_g]
        if v > pos_thr:
            assigned[i] = best_g
        elif v >= neg_thr:
            assigned[i] = IGNORED
    rescued = {}
    for g in range(num_gts):
        best_i = 0
        for i in range(1, n):
            if ious[i][g] > ious[best_i][g]:
                best_i = i
        if ious[best_i][g] <= 0:
            continue
        if best_i not in rescued or ious[best_i][g] > ious[best_i][rescued[best_i]]:
            rescued[best_i] = g
    for i, g in rescued.items():
        assigned[i] = g
    return assigned


def assignment_codes(assignment, priors):
    """Dense per-prior codes (gt index, NEGATIVE or IGNORED) of an Assignment."""
    codes = [None] * len(priors)
    for p in assignment.pos:
        codes[priors.flat_index(p.level, p.location)] = p.gt_index
    for level, location in assignment.neg:
        codes[priors.flat_index(level, location)] = NEGATIVE
    for level, location in assignment.ignored:
        codes[priors.flat_index(level, location)] = IGNORED
    return codes


# ---------------------------------------------------------------------------
# random scenes
# ---------------------------------------------------------------------------

def random_gt(rng, image_h, image_w, max_gts=5, num_classes=3):
    boxes = []
    for _ in range(int(rng.integers(0, max_gts + 1))):
        x1 = int(rng.integers(0, image_w - 1))
        y1 = int(rng.integers(0, image_h - 1))
        x2 = int(rng.integers(x1 + 1, image_w + 1))
        y2 = int(rng.integers(y1 + 1, image_h + 1))
        boxes.append([x1, y1, x2, y2])
    labels = rng.integers(0, num_classes, size=len(boxes))
    return GroundTruth(labels=labels, boxes=np.array(boxes, dtype=np.float64).reshape(-1, 4),
                       image_h=image_h, image_w=image_w, num_classes=num_classes)


def random_small_scene(rng, kind='anchor'):
    """Image up to 64x64, 1-2 levels, at most 80 grid priors, up to 5 gts."""
    image_h = 8 * int(rng.integers(2, 9))
    image_w = 8 * int(rng.integers(2, 9))
    spec = build_pyramid_spec(image_h, image_w, int(rng.integers(1, 3)))
    priors = generate_anchors(spec) if kind == 'anchor' else generate_points(spec)
    return priors, random_gt(rng, image_h, image_w)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def atss_scene():
    """One 16x16 image, one level, gt [0, 0, 16, 16]."""
    spec = build_pyramid_spec(16, 16, 1)
    gt = GroundTruth(labels=[1], boxes=[[0.0, 0.0, 16.0, 16.0]], image_h=16, image_w=16, num_classes=3)
    return generate_anchors(spec), generate_points(spec), gt


# ---------------------------------------------------------------------------
# scene files
# ---------------------------------------------------------------------------

def scene_image(image_id, size=64, objects=(), **extra):
    record = {
        'id': image_id,
        'width': size,
        'height': size,
        'objects': [{'label': label, 'bbox': list(box)} for label, box in objects],
    }
    record.update(extra)
    return record


def synthetic_corpus(num_images, seed=0, size=64, num_classes=3):
    rng = np.random.default_rng(seed)
    images = []
    for k in range(num_images):
        objects = []
        for _ in range(int(rng.integers(0, 4))):
            x1, y1 = (float(v) for v in rng.uniform(0, size - 20, size=2))
            w, h = (float(v) for v in rng.uniform(12, 20, size=2))
            objects.append((int(rng.integers(0, num_classes)), (x1, y1, x1 + w, y1 + h)))
        images.append(scene_image(k, size=size, objects=objects))
    return {'num_classes': num_classes, 'images': images}


@pytest.fixture
def write_scene(tmp_path):
    def _write(scene, name='scenes.json'):
        path = tmp_path / name
        path.write_text(json.dumps(scene), encoding='utf-8')
        return path
    return _write
