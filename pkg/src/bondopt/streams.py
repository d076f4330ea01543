"""Counter-based Gaussian streams keyed by (base seed, path index, factor index).

Each stream is an independent Philox counter block, so a path's increments do
not depend on how many other paths were drawn or in which order.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np


def normal_stream(base_seed: int, path: int, factor: int, n: int) -> np.ndarray:
    bitgen = np.random.Philox(key=int(base_seed), counter=[0, 0, int(factor), int(path)])
    return np.random.Generator(bitgen).standard_normal(n)


def brownian_increments(base_seed: int, paths: Iterable[int] | int, d: int, n_steps: int, dt: float) -> np.ndarray:
    """Brownian increments of shape ``(len(paths), n_steps, d)``.

    An integer ``paths`` means ``range(paths)``.
    """
    idx = range(paths) if isinstance(paths, (int, np.integer)) else list(paths)
    out = np.empty((len(idx), n_steps, d))
    scale = np.sqrt(dt)
    for row, p in enumerate(idx):
        for i in range(d):
            out[row, :, i] = normal_stream(base_seed, p, i, n_steps)
    out *= scale
    return out


def coarsen(dW: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive groups of ``factor`` increments along the step axis."""
    n = dW.shape[-2]
    if n % factor:
        raise ValueError(f"{n} steps not divisible by {factor}")
    shape = dW.shape[:-2] + (n // factor, factor, dW.shape[-1])
    return dW.reshape(shape).sum(axis=-2)


def refinement_ladder(base_seed: int, paths, d: int, t_bar: float, coarse_steps: int, levels: int):
    """Increments of one set of Brownian paths at ``levels`` successive halvings.

    Returns a list ordered coarse to fine; level ``j`` has ``coarse_steps * 2**j``
    steps and is an exact aggregation of the finest level.
    """
    fine_steps = coarse_steps * 2 ** (levels - 1)
    fine = brownian_increments(base_seed, paths, d, fine_steps, t_bar / fine_steps)
    return [coarsen(fine, 2 ** (levels - 1 - j)) for j in range(levels)]
