"""Clustered ground-truth signals, noisy labels and training-set sampling.

Randomness
----------
All draws come from PCG64 bit generators seeded through
:class:`numpy.random.SeedSequence`. Label noise uses one substream per node,
``SeedSequence(seed, spawn_key=(node,))``, so the noise at a node does not
depend on which other nodes are labelled or in what order. Each Gaussian is
produced by inverse-CDF transform of a single raw 64-bit output ``r``::

    u = ((r >> 11) + 0.5) / 2**53,   eps = sigma * ndtri(u)

Only the PCG64 raw stream is relied upon, which numpy keeps stable across
releases, so the draws are bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import EmptyTrainingSetError, NonPositiveEtaError, SizeOutOfRangeError
from .graph import EmpiricalGraph, Partition


def _bitgen(seed, *key):
    return np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def raw_uniforms(bitgen, size) -> np.ndarray:
    """Uniforms in the open interval (0, 1) from raw PCG64 output."""
    raw = bitgen.random_raw(size)
    return ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53


def standard_normals(seed, key, size=1) -> np.ndarray:
    """``size`` standard normal draws from substream ``(seed, key)``."""
    return ndtri(raw_uniforms(_bitgen(seed, key), size))


@dataclass(frozen=True)
class ClusteredSignal:
    """Piecewise-constant signal with value ``values[l]`` on cluster ``l``."""

    partition: Partition
    values: tuple

    def __post_init__(self):
        if len(self.values) != self.partition.n_clusters:
            raise ValueError(
                f"{len(self.values)} cluster values given for {self.partition.n_clusters} clusters"
            )


def expand_signal(cs: ClusteredSignal) -> np.ndarray:
    """Graph signal ``x_i = a_C`` for the cluster ``C`` containing ``i``."""
    return np.asarray(cs.values, dtype=float)[cs.partition.labels]


@dataclass(frozen=True)
class NoiseModel:
    sigma: float
    seed: int

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")


@dataclass(frozen=True)
class LabelSet:
    """Noisy labels ``y`` observed on the training set ``nodes`` (sorted)."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.intp)
        values = np.asarray(self.values, dtype=float)
        if nodes.size == 0:
            raise EmptyTrainingSetError("training set is empty")
        if nodes.shape != values.shape:
            raise ValueError("labels must match the training set one to one")
        if len(np.unique(nodes)) != len(nodes):
            raise ValueError("training set lists a node twice")
        order = np.argsort(nodes, kind="stable")
        object.__setattr__(self, "nodes", nodes[order])
        object.__setattr__(self, "values", values[order])

    @property
    def size(self) -> int:
        return len(self.nodes)

    def as_dict(self) -> dict:
        return {int(i): float(y) for i, y in zip(self.nodes, self.values)}


def sample_labels(x_bar, nodes, noise: NoiseModel) -> LabelSet:
    """Labels ``y_i = x_bar_i + eps_i`` on ``nodes`` with ``eps_i ~ N(0, sigma^2)``."""
    nodes = np.unique(np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes, dtype=np.intp))
    if nodes.size == 0:
        raise EmptyTrainingSetError("training set is empty")
    x_bar = np.asarray(x_bar, dtype=float)
    y = x_bar[nodes].copy()
    if noise.sigma > 0:
        eps = np.array([standard_normals(noise.seed, i)[0] for i in nodes])
        y += noise.sigma * eps
    return LabelSet(nodes, y)


def sample_training_set(g: EmpiricalGraph, size: int, seed: int) -> np.ndarray:
    """Uniform random node subset of the given size, sorted.

    Each node gets a raw 64-bit key from one PCG64 stream; the ``size``
    smallest keys win.
    """
    if not 1 <= size <= g.n_nodes:
        raise SizeOutOfRangeError(f"training set size {size} outside 1..{g.n_nodes}")
    keys = _bitgen(seed).random_raw(g.n_nodes)
    return np.sort(np.argsort(keys, kind="stable")[:size])


def gaussian_tail_bound(eta: float, sigma: float, weights, n: int) -> float:
    """Bound on ``P(|y - E y| >= eta)`` for ``y = (1/n) sum_i w_i y_i``.

    ``min(1, 2 exp(-n^2 eta^2 / (2 sigma^2 sum w_i^2)))``.
    """
    if not eta > 0:
        raise NonPositiveEtaError(f"eta must be positive, got {eta}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise ValueError("weights must be nonempty")
    if math.isinf(eta):
        return 0.0
    sw2 = float(np.sum(w**2))
    return min(1.0, 2.0 * math.exp(-(n**2) * eta**2 / (2 * sigma**2 * sw2)))
