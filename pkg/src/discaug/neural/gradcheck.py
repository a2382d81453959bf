"""Central-difference gradient checking for the networks in ``nets``."""

from __future__ import annotations

import numpy as np


def relative_error(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))


def numeric_grads(net, idx, mask, labels, delta=1e-5, names=None):
    """Perturb every component of every parameter by +-delta, in place."""
    out = {}
    for name in names or sorted(net.params):
        theta = net.params[name]
        grad = np.zeros_like(theta)
        flat = theta.reshape(-1)
        gflat = grad.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + delta
            up = net.loss(idx, mask, labels)
            flat[j] = orig - delta
            down = net.loss(idx, mask, labels)
            flat[j] = orig
            gflat[j] = (up - down) / (2.0 * delta)
        out[name] = grad
    return out


def grad_check(net, idx, mask, labels, delta=1e-5, corrupt=None):
    """Max relative error between analytic and central-difference gradients.

    ``corrupt`` maps parameter names to a factor applied to the analytic
    gradient before comparison; it exists to show the check can fail.
    """
    _, analytic = net.loss_and_grads(idx, mask, labels)
    for name, factor in (corrupt or {}).items():
        analytic[name] = analytic[name] * factor
    numeric = numeric_grads(net, idx, mask, labels, delta)
    worst = 0.0
    for name, num in numeric.items():
        err = relative_error(analytic[name], num)
        if err.size:
            worst = max(worst, float(err.max()))
    return worst
