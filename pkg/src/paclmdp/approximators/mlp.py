"""ReLU multilayer perceptron with a positive squashed output.

The network maps an affinely [0,1]-normalized state through ReLU hidden
layers to a scalar a, and outputs exp(-tanh(a)) or exp(-softplus(a)).
Gradients are hand-derived in the kernel backends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from . import ZQuery

_OUT_ACTS = {"tanh": 0, "softplus": 1}


@dataclass
class MlpZApproximator:
    layer_sizes: tuple
    out_act: str
    params: np.ndarray  # flat, per layer: weight rows then bias
    input_low: np.ndarray
    input_high: np.ndarray

    def __post_init__(self):
        if self.out_act not in _OUT_ACTS:
            raise ValueError(f"out_act must be one of {sorted(_OUT_ACTS)}")
        expected = n_mlp_params(self.layer_sizes)
        if self.params.shape != (expected,):
            raise ValueError(f"params must have shape ({expected},)")
        self._sizes = np.asarray(self.layer_sizes, dtype=np.int64)
        self._act_code = _OUT_ACTS[self.out_act]
        self._span = self.input_high - self.input_low
        if np.any(self._span <= 0.0):
            raise ValueError("input range must have low < high per dimension")

    @property
    def dim(self) -> int:
        return int(self.layer_sizes[0])

    @property
    def n_params(self) -> int:
        return self.params.shape[0]

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.input_low) / self._span

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return self.input_low + z * self._span

    def value(self, x: np.ndarray) -> float:
        val, _, _ = _kernels.mlp_eval(
            self.params, self._sizes, self.normalize(x), self._act_code, False, False
        )
        return val

    def query(self, x: np.ndarray, need_input_grad: bool = False) -> ZQuery:
        val, pgrad, xgrad = _kernels.mlp_eval(
            self.params, self._sizes, self.normalize(x), self._act_code, True, need_input_grad
        )
        if need_input_grad:
            xgrad = xgrad / self._span
        return ZQuery(val, pgrad, xgrad)

    def clone(self) -> "MlpZApproximator":
        return MlpZApproximator(
            self.layer_sizes, self.out_act, self.params.copy(), self.input_low, self.input_high
        )

    @classmethod
    def create(
        cls,
        input_range,
        hidden=(200, 200, 50),
        out_act: str = "softplus",
        rng: np.random.Generator | None = None,
    ) -> "MlpZApproximator":
        """Fan-in scaled uniform weight init, zero biases."""
        if rng is None:
            rng = np.random.default_rng()
        input_range = np.asarray(input_range, dtype=float)
        dim = input_range.shape[0]
        sizes = (dim, *hidden, 1)
        params = np.empty(n_mlp_params(sizes))
        off = 0
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(n_in)
            params[off : off + n_in * n_out] = rng.uniform(-bound, bound, n_in * n_out)
            off += n_in * n_out
            params[off : off + n_out] = 0.0
            off += n_out
        return cls(sizes, out_act, params, input_range[:, 0].copy(), input_range[:, 1].copy())


def n_mlp_params(sizes) -> int:
    return int(sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:])))
