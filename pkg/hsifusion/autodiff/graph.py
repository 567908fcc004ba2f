"""
Static Computation Graph
========================

Nodes are appended in topological order: inputs and parameters are
leaves, every other node applies an Op to earlier nodes. forward()
evaluates all nodes and keeps their values and caches; backward()
propagates a scalar loss gradient to parameters and requested inputs.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import GraphError, ShapeError
from .ops import Op, check_arity
from .params import NetworkParams

logger = logging.getLogger(__name__)

INPUT = 'input'
PARAMETER = 'parameter'
APPLY = 'apply'


@dataclass
class Node:
    index: int
    kind: str
    name: Optional[str] = None
    shape: Optional[Tuple[int, ...]] = None
    op: Optional[Op] = None
    parents: Tuple[int, ...] = ()


@dataclass
class Gradients:
    params: NetworkParams
    inputs: Dict[str, np.ndarray] = field(default_factory=dict)


class Graph:
    """Static DAG of ops; one forward/backward at a time per instance"""

    def __init__(self, name: str = 'graph'):
        self.name = name
        self.nodes: List[Node] = []
        self._inputs: Dict[str, int] = {}
        self._params: Dict[str, int] = {}
        self._outputs: Dict[str, int] = {}
        self._values: Optional[List[np.ndarray]] = None
        self._caches: Optional[List[object]] = None

    # -- construction -----------------------------------------------------

    def _add(self, node: Node) -> int:
        self.nodes.append(node)
        return node.index

    def input(self, name: str, shape: Optional[Tuple[int, ...]] = None) -> int:
        if name in self._inputs or name in self._params:
            raise GraphError(f"duplicate leaf name {name!r}")
        index = self._add(Node(len(self.nodes), INPUT, name=name, shape=tuple(shape) if shape else None))
        self._inputs[name] = index
        return index

    def parameter(self, name: str, shape: Tuple[int, ...]) -> int:
        if name in self._inputs or name in self._params:
            raise GraphError(f"duplicate leaf name {name!r}")
        index = self._add(Node(len(self.nodes), PARAMETER, name=name, shape=tuple(shape)))
        self._params[name] = index
        return index

    def apply(self, op: Op, *parents: int) -> int:
        check_arity(op, parents)
        for parent in parents:
            if not 0 <= parent < len(self.nodes):
                raise GraphError(f"{op.name}: parent {parent} does not precede the node")
        return self._add(Node(len(self.nodes), APPLY, op=op, parents=tuple(parents)))

    def mark_output(self, name: str, node: int):
        self._outputs[name] = node

    @property
    def input_names(self) -> List[str]:
        return list(self._inputs)

    @property
    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: self.nodes[i].shape for name, i in self._params.items()}

    def output_node(self, name: str) -> int:
        return self._outputs[name]

    # -- evaluation -------------------------------------------------------

    def forward(
        self,
        bindings: Mapping[str, np.ndarray],
        params: Optional[NetworkParams] = None
    ) -> Dict[str, np.ndarray]:
        """
        Evaluate every node

        Raises:
            GraphError: unbound input or missing parameter
            ShapeError: bound value or op output has an inconsistent shape
        """
        params = params if params is not None else NetworkParams()
        values: List[np.ndarray] = []
        caches: List[object] = []
        self._values, self._caches = None, None

        for node in self.nodes:
            if node.kind == INPUT:
                if node.name not in bindings:
                    raise GraphError(f"input {node.name!r} is not bound")
                value = np.asarray(bindings[node.name], dtype=np.float64)
                if node.shape is not None and value.shape != node.shape:
                    raise ShapeError(f"input {node.name!r} expects shape {node.shape}, got {value.shape}")
                values.append(value)
                caches.append(None)
            elif node.kind == PARAMETER:
                if node.name not in params:
                    raise GraphError(f"parameter {node.name!r} is missing")
                value = params[node.name]
                if value.shape != node.shape:
                    raise ShapeError(f"parameter {node.name!r} expects shape {node.shape}, got {value.shape}")
                values.append(value)
                caches.append(None)
            else:
                parent_values = [values[p] for p in node.parents]
                try:
                    value, cache = node.op.forward(*parent_values)
                except ShapeError as e:
                    raise ShapeError(f"node {node.index} ({node.op.name}): {e}") from e
                except ValueError as e:
                    shapes = [v.shape for v in parent_values]
                    raise ShapeError(f"node {node.index} ({node.op.name}) with inputs {shapes}: {e}") from e
                values.append(value)
                caches.append(cache)

        self._values, self._caches = values, caches
        return {name: values[index] for name, index in self._outputs.items()}

    def value(self, node: int) -> np.ndarray:
        if self._values is None:
            raise GraphError("forward has not run")
        return self._values[node]

    def backward(self, loss_node: int, wrt_inputs: Sequence[str] = ()) -> Gradients:
        """
        Gradient of a scalar node w.r.t. every parameter and the named inputs

        Parameters the loss does not depend on get zero gradients.
        """
        if self._values is None:
            raise GraphError("backward called before forward")
        loss = self._values[loss_node]
        if np.size(loss) != 1:
            raise GraphError(f"loss node {loss_node} is not scalar (shape {np.shape(loss)})")
        for name in wrt_inputs:
            if name not in self._inputs:
                raise GraphError(f"unknown input {name!r}")

        grads: Dict[int, np.ndarray] = {loss_node: np.ones_like(loss)}
        for node in reversed(self.nodes[:loss_node + 1]):
            if node.kind != APPLY:
                continue
            grad = grads.pop(node.index, None)
            if grad is None:
                continue
            parent_grads = node.op.backward(grad, self._caches[node.index])
            for parent, parent_grad in zip(node.parents, parent_grads):
                if parent in grads:
                    grads[parent] = grads[parent] + parent_grad
                else:
                    grads[parent] = parent_grad

        param_grads = NetworkParams()
        for name, index in self._params.items():
            param_grads[name] = grads.get(index, np.zeros(self.nodes[index].shape))
        input_grads = {
            name: grads.get(self._inputs[name], np.zeros_like(self._values[self._inputs[name]]))
            for name in wrt_inputs
        }
        return Gradients(param_grads, input_grads)

    def __repr__(self) -> str:
        return (
            f"Graph({self.name!r}, {len(self.nodes)} nodes, "
            f"{len(self._inputs)} inputs, {len(self._params)} parameters)"
        )
