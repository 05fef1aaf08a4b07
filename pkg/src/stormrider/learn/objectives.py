"""Second-order boosting objectives.

Each objective maps targets y and raw scores f to per-row gradients g and
hessians h of the training loss, the quantities the tree grower
accumulates.  The squared objective works on the identity scale; the
Tweedie deviance objective works through a log link, f = log(mu).
"""

from __future__ import annotations

import numpy as np


def validate_tweedie_power(power: float) -> float:
    power = float(power)
    if not 1.0 < power < 2.0:
        raise ValueError(f"tweedie power must lie strictly in (1, 2), got {power}")
    return power


def squared_loss(y, f):
    """Per-row squared-error loss (1/2)(f - y)^2."""
    y = np.asarray(y, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    d = f - y
    return 0.5 * d * d


def squared_grad_hess(y, f):
    """Gradient f - y and unit hessian of the squared loss."""
    y = np.asarray(y, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    return f - y, np.ones_like(f)


def tweedie_loss(y, f, power: float):
    """Tweedie deviance (up to terms constant in f) under a log link.

    L(y, f) = -y exp((1-p) f) / (1-p) + exp((2-p) f) / (2-p)
    """
    p = validate_tweedie_power(power)
    y = np.asarray(y, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    a = 1.0 - p
    b = 2.0 - p
    return -y * np.exp(a * f) / a + np.exp(b * f) / b


def tweedie_grad_hess(y, f, power: float):
    """First and second derivatives of the Tweedie deviance in f.

    g = -y exp((1-p) f) + exp((2-p) f)
    h = -(1-p) y exp((1-p) f) + (2-p) exp((2-p) f)

    For y >= 0 and p in (1, 2) the hessian is strictly positive, which
    keeps every leaf's Newton step well defined.
    """
    p = validate_tweedie_power(power)
    y = np.asarray(y, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    a = 1.0 - p
    b = 2.0 - p
    ea = np.exp(a * f)
    eb = np.exp(b * f)
    g = -y * ea + eb
    h = -a * y * ea + b * eb
    return g, h
