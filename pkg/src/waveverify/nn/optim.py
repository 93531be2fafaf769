"""Stochastic gradient descent with classical momentum."""

from __future__ import annotations

from .params import ParamStore


def sgd_momentum_step(store: ParamStore, lr: float, momentum: float) -> None:
    """One update: ``v <- momentum*v - lr*g; theta <- theta + v``, then zero g.

    Frozen parameters are excluded from the update entirely. Parameters are
    visited in sorted name order, so the step is deterministic.
    """
    for _, p in store.items():
        if not p.trainable:
            continue
        p.velocity *= momentum
        p.velocity -= lr * p.grad
        p.values += p.velocity
        p.grad[...] = 0.0
