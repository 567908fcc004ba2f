"""
Adam Optimizer
==============

Functional adam_step over NetworkParams with an explicit AdamState.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..exceptions import OptimizerError, ParameterError
from .params import NetworkParams

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moments per parameter name, step count and hyper-parameters"""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr < 0:
            raise ParameterError(f"learning rate must be >= 0, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ParameterError(f"Adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")


def adam_step(params: NetworkParams, grads: NetworkParams, state: AdamState) -> NetworkParams:
    """
    One bias-corrected Adam update

    Returns the new parameters; state is advanced in place.

    Raises:
        OptimizerError: a gradient entry is NaN or Inf (nothing is modified)
    """
    params.check_compatible(grads)
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            logger.error(f"Rejected Adam step {state.step + 1}: non-finite gradient for {name!r}")
            raise OptimizerError(f"non-finite gradient for parameter {name!r}")

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    updated = NetworkParams()
    for name, value in params.items():
        grad = grads[name]
        m = state.m.get(name, np.zeros_like(value))
        v = state.v.get(name, np.zeros_like(value))
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.m[name], state.v[name] = m, v
        m_hat = m / correction1
        v_hat = v / correction2
        updated[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return updated
