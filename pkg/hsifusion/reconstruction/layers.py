"""
Layer builder shared by the backbone and reconstruction networks
"""

from collections import OrderedDict
from typing import Dict, Tuple

import numpy as np

from ..autodiff import BandMix, Conv2d, Dense, Graph, LeakyReLU, NetworkParams, kaiming_uniform
from ..core import Rng


class NetworkBuilder:
    """Adds parameterized layers to a Graph and remembers how to initialize them"""

    def __init__(self, graph: Graph, prefix: str):
        self.graph = graph
        self.prefix = prefix
        # name -> (shape, fan_in); fan_in 0 marks a zero-initialized bias
        self.specs: Dict[str, Tuple[Tuple[int, ...], int]] = OrderedDict()

    def _param(self, name: str, shape: Tuple[int, ...], fan_in: int) -> int:
        full = f"{self.prefix}.{name}"
        self.specs[full] = (tuple(shape), fan_in)
        return self.graph.parameter(full, shape)

    def conv(self, x: int, name: str, c_in: int, c_out: int, size: int = 3) -> int:
        weight = self._param(f"{name}.weight", (c_out, c_in, size, size), c_in * size * size)
        bias = self._param(f"{name}.bias", (c_out,), 0)
        return self.graph.apply(Conv2d(), x, weight, bias)

    def band_mix(self, x: int, name: str, c_in: int, c_out: int) -> int:
        weight = self._param(f"{name}.weight", (c_out, c_in), c_in)
        bias = self._param(f"{name}.bias", (c_out,), 0)
        return self.graph.apply(BandMix(), x, weight, bias)

    def dense(self, v: int, name: str, n_in: int, n_out: int) -> int:
        weight = self._param(f"{name}.weight", (n_out, n_in), n_in)
        bias = self._param(f"{name}.bias", (n_out,), 0)
        return self.graph.apply(Dense(), v, weight, bias)

    def leaky(self, x: int) -> int:
        return self.graph.apply(LeakyReLU(), x)

    def init_params(self, rng: Rng) -> NetworkParams:
        """Kaiming-uniform weights, zero biases, drawn in layer order"""
        params = NetworkParams()
        for name, (shape, fan_in) in self.specs.items():
            params[name] = kaiming_uniform(shape, fan_in, rng) if fan_in else np.zeros(shape)
        return params
