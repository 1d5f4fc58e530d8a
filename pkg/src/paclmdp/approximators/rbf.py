"""Normalized Gaussian radial basis function model on a uniform grid.

Each basis integrates to one over R^n, so the weight vector doubles as the
basis-mass distribution: integral of the model equals sum(weights).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from . import ZQuery


@dataclass
class RbfZApproximator:
    centers: np.ndarray  # (K, n)
    inv_bw2: np.ndarray  # (n,) 1 / bandwidth^2
    norm_const: float
    weights: np.ndarray  # (K,), the trainable parameters
    grid_ranges: np.ndarray  # (n, 2), kept for serialization
    grid_counts: tuple
    bandwidth_factor: float

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def n_params(self) -> int:
        return self.weights.shape[0]

    @property
    def params(self) -> np.ndarray:
        return self.weights

    def value(self, x: np.ndarray) -> float:
        val, _, _ = _kernels.rbf_eval(
            self.centers, self.inv_bw2, self.norm_const, self.weights, x, False
        )
        return val

    def query(self, x: np.ndarray, need_input_grad: bool = False) -> ZQuery:
        val, feats, grad_x = _kernels.rbf_eval(
            self.centers, self.inv_bw2, self.norm_const, self.weights, x, need_input_grad
        )
        return ZQuery(val, feats, grad_x)

    def clone(self) -> "RbfZApproximator":
        return RbfZApproximator(
            self.centers,
            self.inv_bw2,
            self.norm_const,
            self.weights.copy(),
            self.grid_ranges,
            self.grid_counts,
            self.bandwidth_factor,
        )


def build_rbf_grid(
    ranges,
    counts,
    total_mass: float = 1.0,
    bandwidth_factor: float = 0.7,
) -> RbfZApproximator:
    """Uniform grid of normalized Gaussians over per-dimension ranges.

    ``counts`` gives the number of centers per dimension (>= 2 each); the
    bandwidth is ``bandwidth_factor`` times the grid spacing per dimension.
    Weights start uniform at ``total_mass / n_centers``.
    """
    ranges = np.asarray(ranges, dtype=float)
    counts = tuple(int(c) for c in np.atleast_1d(counts))
    if ranges.ndim != 2 or ranges.shape[1] != 2 or ranges.shape[0] != len(counts):
        raise ValueError("ranges must be (n, 2) with one count per dimension")
    if any(c < 2 for c in counts):
        raise ValueError("need at least two centers per dimension")
    if np.any(ranges[:, 0] >= ranges[:, 1]):
        raise ValueError("each range must have low < high")
    if not (total_mass > 0.0):
        raise ValueError("total_mass must be positive")

    axes = [np.linspace(lo, hi, c) for (lo, hi), c in zip(ranges, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=1)
    spacing = (ranges[:, 1] - ranges[:, 0]) / (np.array(counts) - 1.0)
    bw = bandwidth_factor * spacing
    norm_const = float(np.prod(1.0 / (math.sqrt(2.0 * math.pi) * bw)))
    k = centers.shape[0]
    weights = np.full(k, total_mass / k)
    return RbfZApproximator(
        np.ascontiguousarray(centers),
        1.0 / (bw * bw),
        norm_const,
        weights,
        ranges,
        counts,
        bandwidth_factor,
    )
