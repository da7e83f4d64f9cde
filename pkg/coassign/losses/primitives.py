"""Elementwise loss primitives with analytic gradients w.r.t. their inputs.

Every function returns ``(value, grad)`` with ``grad`` shaped like the
prediction argument. Values are summed over the trailing axis only where
noted; reduction over samples is left to the callers.
"""
from typing import Tuple

import numpy as np
from scipy.special import expit, log_expit, logsumexp, softmax

from coassign.errors import InvalidInputError
from coassign.geometry import Box, as_boxes, pairwise_giou

DEFAULT_FOCAL_CONFIG = {
    'alpha': 0.25,
    'gamma': 2.0,
}


def _finite(x, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f'{what} must be finite')
    return arr


def focal_loss(logit, label, alpha: float = DEFAULT_FOCAL_CONFIG['alpha'],
               gamma: float = DEFAULT_FOCAL_CONFIG['gamma']) -> Tuple[np.ndarray, np.ndarray]:
    """Sigmoid focal loss and its derivative w.r.t. the logit.

    ``-alpha (1-p)^gamma log p`` for label 1 and
    ``-(1-alpha) p^gamma log(1-p)`` for label 0, with ``p = sigmoid(logit)``.
    Works elementwise on arrays; scalar inputs give 0-d arrays.
    """
    x = _finite(logit, 'logit')
    y = np.broadcast_to(np.asarray(label, dtype=np.float64), x.shape)
    if not np.all((y == 0) | (y == 1)):
        raise InvalidInputError('focal loss labels must be 0 or 1')
    p = expit(x)
    log_p = log_expit(x)
    log_q = log_expit(-x)
    q = expit(-x)
    pos_value = -alpha * q ** gamma * log_p
    neg_value = -(1.0 - alpha) * p ** gamma * log_q
    pos_grad = alpha * q ** gamma * (gamma * p * log_p - q)
    neg_grad = (1.0 - alpha) * p ** gamma * (p - gamma * q * log_q)
    value = np.where(y == 1, pos_value, neg_value)
    grad = np.where(y == 1, pos_grad, neg_grad)
    return value, grad


def binary_cross_entropy(logit, target) -> Tuple[np.ndarray, np.ndarray]:
    """BCE with logits against soft targets in [0, 1]."""
    x = _finite(logit, 'logit')
    t = np.broadcast_to(np.asarray(target, dtype=np.float64), x.shape)
    if np.any(t < 0) or np.any(t > 1):
        raise InvalidInputError('BCE targets must lie in [0, 1]')
    value = -(t * log_expit(x) + (1.0 - t) * log_expit(-x))
    return value, expit(x) - t


def cross_entropy(logits, label) -> Tuple[np.ndarray, np.ndarray]:
    """Softmax cross-entropy over the last axis.

    Args:
        logits: (..., C) scores.
        label: (...) integer class indices.

    Returns:
        (...) values and (..., C) gradients.
    """
    z = _finite(logits, 'logits')
    labels = np.asarray(label, dtype=np.int64)
    if z.ndim == 0 or labels.shape != z.shape[:-1]:
        raise InvalidInputError(f'labels of shape {labels.shape} do not fit logits of shape {z.shape}')
    if labels.size and (labels.min() < 0 or labels.max() >= z.shape[-1]):
        raise InvalidInputError(f'class index outside [0, {z.shape[-1]})')
    picked = np.take_along_axis(z, labels[..., None], axis=-1)[..., 0]
    value = logsumexp(z, axis=-1) - picked
    grad = softmax(z, axis=-1)
    np.put_along_axis(grad, labels[..., None], np.take_along_axis(grad, labels[..., None], axis=-1) - 1.0,
                      axis=-1)
    return value, grad


def l1_loss(pred, target) -> Tuple[np.ndarray, np.ndarray]:
    """Absolute error summed over the last axis; subgradient 0 at equality."""
    p = _finite(pred, 'prediction')
    t = _finite(target, 'target')
    diff = p - t
    return np.abs(diff).sum(axis=-1), np.sign(diff)


def _box_rows(boxes) -> np.ndarray:
    if isinstance(boxes, Box):
        return boxes.as_array()[None]
    return np.asarray(boxes, dtype=np.float64).reshape(-1, 4)


def giou_loss(pred, gt) -> Tuple[np.ndarray, np.ndarray]:
    """``1 - GIoU`` for aligned box pairs and its gradient w.r.t. ``pred``.

    Args:
        pred: One box or (N, 4) corner boxes.
        gt: Same count of target boxes.

    Returns:
        (N,) values in [0, 2] and (N, 4) gradients; a single box gives a
        scalar and a (4,) gradient.
    """
    single = isinstance(pred, Box) or np.ndim(pred) == 1
    pred = as_boxes(_box_rows(pred), 'predicted boxes')
    gt = as_boxes(_box_rows(gt), 'target boxes')
    if len(pred) != len(gt):
        raise InvalidInputError(f'{len(pred)} predicted boxes for {len(gt)} targets')
    values = np.zeros(len(pred))
    grads = np.zeros((len(pred), 4))
    for k in range(len(pred)):
        giou, grad = pairwise_giou(pred[k:k + 1], gt[k:k + 1], return_grad=True)
        values[k] = 1.0 - giou[0, 0]
        grads[k] = -grad[0, 0]
    if single:
        return values[0], grads[0]
    return values, grads
