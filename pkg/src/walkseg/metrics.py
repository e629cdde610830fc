"""Segmentation quality measures.

Region overlap is scored by intersection-over-union, both per class
(averaged over the classes that occur) and class-agnostic. Boundary
localization is scored two ways: the misclassification rate inside
narrow bands around the true label boundaries ("trimap" curves), and
precision/recall of predicted boundary strength against true boundary
pixels with greedy one-to-one matching within a pixel tolerance, which
yields a max F-score and an average precision.
"""

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.spatial import cKDTree

from .errors import InvalidInputError


def _check_pair(pred, gt):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape or pred.ndim != 2:
        raise InvalidInputError(
            f"label maps {pred.shape} and {gt.shape} must match")
    return pred, gt


def mean_iou(pred, gt, num_classes: int) -> float:
    """Mean over classes present in pred or gt of |P & G| / |P | G|."""
    pred, gt = _check_pair(pred, gt)
    scores = []
    for c in range(num_classes):
        p = pred == c
        g = gt == c
        union = np.logical_or(p, g).sum()
        if union == 0:
            continue
        scores.append(np.logical_and(p, g).sum() / union)
    if not scores:
        raise InvalidInputError("no class present in either map")
    return float(np.mean(scores))


def overall_iou(pred, gt) -> float:
    """Class-agnostic IOU pooled over all classes jointly.

    Each agreeing pixel adds one to both intersection and union; each
    disagreeing pixel adds one to two different classes' unions.
    """
    pred, gt = _check_pair(pred, gt)
    agree = int((pred == gt).sum())
    return agree / (pred.size + (pred.size - agree))


def label_boundary_mask(labels) -> np.ndarray:
    """Pixels with a 4-neighbor of a different label (both sides count)."""
    labels = np.asarray(labels)
    mask = np.zeros(labels.shape, dtype=bool)
    horizontal = labels[:, :-1] != labels[:, 1:]
    mask[:, :-1] |= horizontal
    mask[:, 1:] |= horizontal
    vertical = labels[:-1, :] != labels[1:, :]
    mask[:-1, :] |= vertical
    mask[1:, :] |= vertical
    return mask


def trimap_band(labels, width: int) -> np.ndarray:
    """Pixels whose Euclidean distance to the nearest boundary pixel of
    `labels` is below `width`. Bands nest: band(w1) is a subset of
    band(w2) whenever w1 <= w2. A uniform map has an empty band."""
    if width < 1:
        raise InvalidInputError(f"band width must be >= 1, got {width}")
    boundary = label_boundary_mask(labels)
    if not boundary.any():
        return boundary
    return distance_transform_edt(~boundary) < width


def trimap_error(pred, gt, widths):
    """Misclassification rate inside each band width around gt boundaries.

    Returns [(width, error_rate)]; an empty band scores 0.
    """
    pred, gt = _check_pair(pred, gt)
    boundary = label_boundary_mask(gt)
    wrong = pred != gt
    out = []
    if boundary.any():
        dist = distance_transform_edt(~boundary)
        for width in widths:
            band = dist < width
            count = int(band.sum())
            out.append((width, float(wrong[band].sum() / count) if count else 0.0))
    else:
        out.extend((width, 0.0) for width in widths)
    return out


def _normalize_rows(prob):
    prob = np.clip(np.asarray(prob, dtype=np.float64), 0.0, None)
    sums = prob.sum(axis=1, keepdims=True)
    sums[sums == 0.0] = 1.0
    return prob / sums


def onehot_probabilities(labels, num_classes: int) -> np.ndarray:
    """Embed a hard label map as one-hot rows, (h*w, m)."""
    flat = np.asarray(labels).ravel()
    if flat.min() < 0 or flat.max() >= num_classes:
        raise InvalidInputError("label index out of range")
    out = np.zeros((flat.size, num_classes))
    out[np.arange(flat.size), flat] = 1.0
    return out


def extract_boundary_strength(prob, shape) -> np.ndarray:
    """Per-pixel boundary strength in [0, 1] from per-pixel class scores.

    Strength at a pixel is the largest total-variation disagreement
    1 - sum_c min(p_c(i), p_c(j)) over its 4-neighbors j. Rows are clipped
    to nonnegative and renormalized first, so hard one-hot inputs give
    exactly binary strengths.
    """
    height, width = shape
    prob = _normalize_rows(prob)
    if prob.shape[0] != height * width:
        raise InvalidInputError(
            f"{prob.shape[0]} rows for a {height}x{width} grid")
    p = prob.reshape(height, width, prob.shape[1])
    strength = np.zeros((height, width))
    horizontal = 1.0 - np.minimum(p[:, :-1], p[:, 1:]).sum(axis=2)
    np.maximum(strength[:, :-1], horizontal, out=strength[:, :-1])
    np.maximum(strength[:, 1:], horizontal, out=strength[:, 1:])
    vertical = 1.0 - np.minimum(p[:-1, :], p[1:, :]).sum(axis=2)
    np.maximum(strength[:-1, :], vertical, out=strength[:-1, :])
    np.maximum(strength[1:, :], vertical, out=strength[1:, :])
    return np.clip(strength, 0.0, 1.0)


def greedy_match_boundaries(pred_points, gt_points, tolerance: float):
    """Match predicted boundary pixels to gt boundary pixels one-to-one.

    Candidate pairs within `tolerance` are accepted greedily in order of
    increasing distance (ties by prediction order, then gt index); a pair
    is taken only while both of its endpoints are unmatched. Returns a
    list of (pred_index, gt_index) pairs.
    """
    pred_points = np.asarray(pred_points, dtype=np.float64)
    gt_points = np.asarray(gt_points, dtype=np.float64)
    if len(gt_points) == 0 or len(pred_points) == 0:
        return []
    tree = cKDTree(gt_points)
    pairs_p, pairs_g, pairs_d = [], [], []
    for pi, point in enumerate(pred_points):
        candidates = tree.query_ball_point(point, tolerance)
        if not candidates:
            continue
        dists = np.linalg.norm(gt_points[candidates] - point, axis=1)
        pairs_p.extend([pi] * len(candidates))
        pairs_g.extend(candidates)
        pairs_d.extend(dists)
    if not pairs_p:
        return []
    order = np.lexsort((pairs_g, pairs_p, pairs_d))
    pred_taken = np.zeros(len(pred_points), dtype=bool)
    gt_taken = np.zeros(len(gt_points), dtype=bool)
    matches = []
    for idx in order:
        pi, gi = pairs_p[idx], pairs_g[idx]
        if not pred_taken[pi] and not gt_taken[gi]:
            pred_taken[pi] = True
            gt_taken[gi] = True
            matches.append((pi, gi))
    return matches


def boundary_pr(strength, gt_boundary, tolerance: float = 2.0,
                thresholds: int = 20):
    """Sweep thresholds over a strength map and score boundary agreement.

    At each threshold, pixels with strength >= threshold are predicted
    boundaries, matched greedily (strongest first) one-to-one to gt
    boundary pixels within `tolerance`. Returns (max F-score, average
    precision, curve) with curve rows (threshold, precision, recall).
    AP integrates precision over recall by trapezoid, extending the
    smallest-recall precision down to recall zero.
    """
    strength = np.asarray(strength, dtype=np.float64)
    gt_boundary = np.asarray(gt_boundary, dtype=bool)
    if strength.shape != gt_boundary.shape:
        raise InvalidInputError(
            f"strength {strength.shape} vs boundary {gt_boundary.shape}")
    gt_points = np.argwhere(gt_boundary)
    if len(gt_points) == 0:
        raise InvalidInputError(
            "ground truth has no boundary pixels; recall undefined")

    curve = []
    best_f = 0.0
    for level in range(thresholds, 0, -1):
        tau = level / thresholds
        mask = strength >= tau
        pred_points = np.argwhere(mask)
        if len(pred_points):
            order = np.argsort(-strength[mask], kind="stable")
            matched = len(greedy_match_boundaries(
                pred_points[order], gt_points, tolerance))
            precision = matched / len(pred_points)
            recall = matched / len(gt_points)
        else:
            precision = 0.0
            recall = 0.0
        curve.append((tau, precision, recall))
        if precision + recall > 0.0:
            best_f = max(best_f, 2 * precision * recall / (precision + recall))

    by_recall = sorted(curve, key=lambda row: row[2])
    recalls = [0.0] + [row[2] for row in by_recall]
    precisions = [by_recall[0][1]] + [row[1] for row in by_recall]
    ap = float(np.trapezoid(precisions, recalls))
    return best_f, ap, curve
