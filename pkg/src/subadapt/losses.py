"""Margin losses for binary classification and their scalar subgradients.

All three losses act on the margin y*f of a {+1,-1} label with a real
classifier score; each is convex and nonincreasing in the margin. Inputs
may be scalars or arrays of matching shape.
"""

from __future__ import annotations

import numpy as np

from .data_model import LOSS_KINDS, ValidationError


def _checked(kind, y, f):
    if kind not in LOSS_KINDS:
        raise ValidationError(f"unknown loss kind: {kind!r}")
    scalar = np.ndim(y) == 0 and np.ndim(f) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if not np.all(np.isfinite(f)):
        raise ValidationError("non-finite classifier score")
    if not np.all(np.abs(y) == 1.0):
        raise ValidationError("label outside {+1,-1}")
    return y, f, scalar


def _sigmoid(z):
    # 1 / (1 + exp(-z)) without overflow on either tail
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_value(kind, y, f):
    """Pointwise loss: hinge max(0, 1-yf), logistic ln(1+exp(-yf)), or exp(-yf)."""
    y, f, scalar = _checked(kind, y, f)
    margin = y * f
    if kind == "hinge":
        out = np.maximum(0.0, 1.0 - margin)
    elif kind == "logistic":
        out = np.logaddexp(0.0, -margin)
    else:
        out = np.exp(-margin)
    return float(out[0]) if scalar else out


def loss_subgradient(kind, y, f):
    """d(loss)/df; the hinge kink at yf = 1 returns the subgradient 0."""
    y, f, scalar = _checked(kind, y, f)
    margin = y * f
    if kind == "hinge":
        out = np.where(margin < 1.0, -y, 0.0)
    elif kind == "logistic":
        out = -y * _sigmoid(-margin)
    else:
        out = -y * np.exp(-margin)
    return float(out[0]) if scalar else out
