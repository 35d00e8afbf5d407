"""Finite-difference verification of autodiff gradients."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor, backward


def relative_error(analytic, numeric):
    denom = max(abs(analytic), abs(numeric))
    if denom < 1e-7:
        return abs(analytic - numeric)
    return abs(analytic - numeric) / denom


def check_scalar_fn(fn, tensors, h=1e-5, n_coords=20, rng=None):
    """Compare analytic gradients of scalar fn(*) against central differences.

    `fn` must be deterministic and rebuild its graph from `tensors` on every
    call. Returns the maximum relative error over sampled coordinates.
    """
    rng = rng or np.random.default_rng(0)
    with Tape() as tape:
        loss = fn()
        backward(loss, tape)
    worst = 0.0
    for t in tensors:
        if t.grad is None:
            raise AssertionError("tensor received no gradient")
        size = t.data.size
        coords = range(size) if size <= n_coords else \
            sorted(rng.choice(size, size=n_coords, replace=False))
        flat = t.data.reshape(-1)
        gflat = t.grad.reshape(-1)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            up = float(fn().data)
            flat[c] = orig - h
            down = float(fn().data)
            flat[c] = orig
            numeric = (up - down) / (2 * h)
            worst = max(worst, relative_error(float(gflat[c]), numeric))
    for t in tensors:
        t.grad = None
    return worst


def primitive_suite(seed=0):
    """Gradient-check every autodiff primitive on randomized small shapes.

    Returns [(name, max relative error)].
    """
    rng = np.random.default_rng(seed)

    def T(*shape):
        return Tensor(rng.uniform(-1, 1, size=shape), requires_grad=True)

    a34, b34 = T(3, 4), T(3, 4)
    m45 = T(4, 5)
    batch = T(2, 3, 4)
    v4, w4 = T(4), T(4)
    table = T(6, 4)
    idx = rng.integers(0, 6, size=(3, 2))

    cases = [
        ("add", [a34, b34], lambda: ad.reduce_sum(ad.add(a34, b34))),
        ("sub", [a34, b34], lambda: ad.reduce_sum(ad.mul(ad.sub(a34, b34),
                                                         ad.sub(a34, b34)))),
        ("scale", [a34], lambda: ad.reduce_sum(ad.scale(a34, 2.5))),
        ("elementwise_mul", [a34, b34], lambda: ad.reduce_sum(ad.mul(a34, b34))),
        ("matmul", [a34, m45], lambda: ad.reduce_sum(
            ad.mul(ad.matmul(a34, m45), ad.matmul(a34, m45)))),
        ("matmul_batched", [batch, m45], lambda: ad.reduce_sum(
            ad.mul(ad.matmul(batch, m45), ad.matmul(batch, m45)))),
        ("matmul_vec", [m45, v4], lambda: ad.reduce_sum(
            ad.mul(ad.matmul(v4, m45), ad.matmul(v4, m45)))),
        ("transpose", [a34], lambda: ad.reduce_sum(
            ad.mul(ad.transpose(a34), ad.transpose(a34)))),
        ("reshape", [a34], lambda: ad.reduce_sum(
            ad.mul(ad.reshape(a34, (2, 6)), ad.reshape(a34, (2, 6))))),
        ("concat", [a34, b34], lambda: ad.reduce_sum(
            ad.mul(ad.concat([a34, b34], axis=0), ad.concat([a34, b34], axis=0)))),
        ("stack", [v4, w4], lambda: ad.reduce_sum(
            ad.mul(ad.stack([v4, w4]), ad.stack([v4, w4])))),
        ("slice", [a34], lambda: ad.reduce_sum(
            ad.mul(ad.slice_(a34, (slice(0, 2), slice(1, 3))),
                   ad.slice_(a34, (slice(0, 2), slice(1, 3)))))),
        ("embedding_gather", [table], lambda: ad.reduce_sum(
            ad.mul(ad.gather(table, idx), ad.gather(table, idx)))),
        ("reduce_sum_axis", [batch], lambda: ad.reduce_sum(
            ad.mul(ad.reduce_sum(batch, axis=1), ad.reduce_sum(batch, axis=1)))),
        ("reduce_mean", [a34], lambda: ad.reduce_sum(
            ad.mul(ad.reduce_mean(a34, axis=0), ad.reduce_mean(a34, axis=0)))),
        ("reduce_min", [a34], lambda: ad.reduce_sum(
            ad.mul(ad.reduce_min(a34, axis=0), ad.reduce_min(a34, axis=0)))),
        ("minimum", [a34, b34], lambda: ad.reduce_sum(
            ad.mul(ad.minimum(a34, b34), ad.minimum(a34, b34)))),
        ("dot", [v4, w4], lambda: ad.dot(v4, w4)),
        ("softmax", [a34], lambda: ad.reduce_sum(
            ad.mul(ad.softmax(a34, axis=-1), b34))),
        ("layer_norm", [a34], lambda: ad.reduce_sum(
            ad.mul(ad.layer_norm(a34), b34))),
        ("relu", [a34], lambda: ad.reduce_sum(ad.mul(ad.relu(a34), b34))),
        ("sigmoid", [a34], lambda: ad.reduce_sum(ad.sigmoid(a34))),
        ("log_sigmoid", [a34], lambda: ad.reduce_sum(ad.log_sigmoid(a34))),
        ("softplus", [a34], lambda: ad.reduce_sum(ad.softplus(a34))),
        ("l1_distance", [a34, b34], lambda: ad.reduce_sum(
            ad.l1_distance(a34, b34))),
    ]
    pool = [a34, b34, m45, batch, v4, w4, table]
    results = []
    for name, tensors, fn in cases:
        for t in pool:
            t.grad = None
        results.append((name, check_scalar_fn(fn, tensors, rng=rng)))
    return results
