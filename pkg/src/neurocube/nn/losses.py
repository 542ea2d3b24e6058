"""The three training losses.

Prediction loss mixes an L1 term (robust to huge aggregates) with a
squared term (tracks the overall trend).  The reconstruction loss is
binary cross-entropy of each attribute's decoded segment against its
many-hot input, summed over the segment and over attributes.  The total is
``L_pred + lambda3 * L_ae``; reductions over a batch are means per sample.
"""

from __future__ import annotations

import numpy as np

BCE_EPS = 1e-7  # reconstructions clamped to [eps, 1 - eps] before log


def loss_pred(pred, target, lambda1: float, lambda2: float):
    """lambda1 * |pred - target| + lambda2 * (pred - target)^2, elementwise."""
    e = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return lambda1 * np.abs(e) + lambda2 * e * e


def loss_ae(reconstruction: np.ndarray, r: np.ndarray):
    """Binary cross-entropy summed over the segment.

    Accepts (width,) vectors or (n, width) batches; returns a scalar or a
    per-sample vector accordingly.
    """
    rec = np.clip(np.asarray(reconstruction, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    r = np.asarray(r, dtype=np.float64)
    ll = r * np.log(rec) + (1.0 - r) * np.log(1.0 - rec)
    return -ll.sum(axis=-1)


def loss_total(l_pred: float, l_ae: float, lambda3: float) -> float:
    return l_pred + lambda3 * l_ae
