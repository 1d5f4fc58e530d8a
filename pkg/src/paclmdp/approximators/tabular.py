"""Tabular Z model over a fixed set of support states.

Queries snap to the nearest support state: the parameter gradient is the
corresponding indicator vector and the input gradient is zero (the model is
piecewise constant).  Used with discretized chains and as the zero-bandwidth
limit of the RBF grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ZQuery


@dataclass
class TabularZApproximator:
    states: np.ndarray  # (K, n) support points
    values: np.ndarray  # (K,), the trainable parameters

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def n_params(self) -> int:
        return self.values.shape[0]

    @property
    def params(self) -> np.ndarray:
        return self.values

    def state_index(self, x: np.ndarray) -> int:
        d = self.states - x[None, :]
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def value(self, x: np.ndarray) -> float:
        return float(self.values[self.state_index(x)])

    def query(self, x: np.ndarray, need_input_grad: bool = False) -> ZQuery:
        i = self.state_index(x)
        grad = np.zeros(self.n_params)
        grad[i] = 1.0
        grad_input = np.zeros(self.dim) if need_input_grad else None
        return ZQuery(float(self.values[i]), grad, grad_input)

    def clone(self) -> "TabularZApproximator":
        return TabularZApproximator(self.states, self.values.copy())

    @classmethod
    def uniform(cls, states: np.ndarray, total_mass: float = 1.0) -> "TabularZApproximator":
        """Uniform initial mass; 1-D input is taken as K scalar states."""
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        k = states.shape[0]
        if not (total_mass > 0.0):
            raise ValueError("total_mass must be positive")
        return cls(states, np.full(k, total_mass / k))
