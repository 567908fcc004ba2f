"""
Finite-Difference Gradient Checking
===================================

Compares Graph.backward against central differences, entry by entry.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from ..core import Rng
from .graph import Gradients, Graph
from .params import NetworkParams

logger = logging.getLogger(__name__)

MAX_DENSE_ENTRIES = 10_000
RELATIVE_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    max_rel_error: float
    tol: float
    errors: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol

    def worst(self) -> Optional[str]:
        return max(self.errors, key=self.errors.get) if self.errors else None


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), RELATIVE_FLOOR)
    return np.abs(analytic - numeric) / scale


def _loss(graph: Graph, loss_node: int, bindings, params) -> float:
    graph.forward(bindings, params)
    return float(graph.value(loss_node))


def grad_check(
    graph: Graph,
    loss_node: int,
    bindings: Mapping[str, np.ndarray],
    params: Optional[NetworkParams] = None,
    eps: float = 1e-3,
    tol: float = 1e-4,
    wrt_inputs: Sequence[str] = (),
    analytic: Optional[Gradients] = None,
    max_entries: int = MAX_DENSE_ENTRIES,
) -> GradCheckReport:
    """
    Check analytic gradients of a scalar loss node

    analytic overrides the gradients computed by backward (used to confirm
    that a corrupted gradient fails). When more than max_entries scalars
    are requested, a fixed random subset of each tensor is checked.
    """
    params = params.copy() if params is not None else NetworkParams()
    bindings = {name: np.array(value, dtype=np.float64) for name, value in bindings.items()}
    if analytic is None:
        graph.forward(bindings, params)
        analytic = graph.backward(loss_node, wrt_inputs)

    targets = [('param', name, params[name]) for name in params]
    targets += [('input', name, bindings[name]) for name in wrt_inputs]
    total = sum(array.size for _, _, array in targets)
    rng = Rng(0)
    if total > max_entries:
        logger.warning(f"Gradient check over {total} entries, sampling {max_entries}")

    report = GradCheckReport(max_rel_error=0.0, tol=tol)
    for kind, name, array in targets:
        expected = analytic.params[name] if kind == 'param' else analytic.inputs[name]
        flat = array.reshape(-1)
        indices = np.arange(flat.size)
        if total > max_entries:
            quota = max(1, int(round(max_entries * flat.size / total)))
            indices = np.sort(rng.choice(indices, size=min(quota, flat.size), replace=False))

        worst = 0.0
        for i in indices:
            original = flat[i]
            flat[i] = original + eps
            plus = _loss(graph, loss_node, bindings, params)
            flat[i] = original - eps
            minus = _loss(graph, loss_node, bindings, params)
            flat[i] = original
            numeric = (plus - minus) / (2.0 * eps)
            worst = max(worst, float(relative_error(np.asarray(expected).reshape(-1)[i], numeric)))
        report.errors[f"{kind}:{name}"] = worst
        report.max_rel_error = max(report.max_rel_error, worst)

    # leave the graph holding the unperturbed forward pass
    graph.forward(bindings, params)
    status = "passed" if report.passed else "FAILED"
    logger.debug(f"Gradient check {status}: max relative error {report.max_rel_error:.3e} (worst {report.worst()})")
    return report
