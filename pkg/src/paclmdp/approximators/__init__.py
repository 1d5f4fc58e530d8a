"""Positive scalar function approximators for Z = exp(-V).

All approximators expose a flat ``params`` vector, a fast ``value(x)``, and a
``query(x)`` returning the value with parameter and input gradients.  The
value function and its gradient come from ``v_and_grad``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNDERFLOW_FLOOR = 1e-300


class ZUnderflowError(ArithmeticError):
    """The approximated Z value underflowed; -log Z is not representable."""


@dataclass(frozen=True)
class ZQuery:
    """One evaluation: value, d value / d params, d value / d x."""

    value: float
    grad_params: np.ndarray
    grad_input: np.ndarray | None


def v_and_grad(approx, x: np.ndarray) -> tuple[float, np.ndarray]:
    """V = -log Z and its state gradient -grad_x Z / Z.

    Raises ZUnderflowError when Z(x) <= 1e-300.
    """
    q = approx.query(x, need_input_grad=True)
    if q.value <= UNDERFLOW_FLOOR:
        raise ZUnderflowError(f"Z underflow ({q.value!r}) at state {x!r}")
    return -float(np.log(q.value)), -q.grad_input / q.value


from .mlp import MlpZApproximator  # noqa: E402
from .rbf import RbfZApproximator, build_rbf_grid  # noqa: E402
from .snapshot import load_snapshot, save_snapshot  # noqa: E402
from .tabular import TabularZApproximator  # noqa: E402

__all__ = [
    "MlpZApproximator",
    "RbfZApproximator",
    "TabularZApproximator",
    "ZQuery",
    "ZUnderflowError",
    "build_rbf_grid",
    "load_snapshot",
    "save_snapshot",
    "v_and_grad",
]
