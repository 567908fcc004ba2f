"""
Backbone Fusion Network
=======================

F(X, Y; theta_f): bilinear upsampling of X to the MSI grid, concatenation
with Y, `depth` 3x3 conv blocks with leaky ReLU, a final conv back to B
bands and a residual add of the upsampled X. Trained on simulated
(Z, X, Y) triples with an l1 loss; produces the rough estimate Z_hat.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import AdamState, Add, Concat, Graph, MAELoss, NetworkParams, UpsampleBilinear, adam_step
from ..core import HsiCube, Rng
from ..exceptions import ParameterError, ShapeError
from .layers import NetworkBuilder

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BackboneConfig:
    width: int = 32
    depth: int = 4
    kernel_size: int = 3
    upsample: str = 'bilinear'

    def __post_init__(self):
        if self.width < 1 or self.depth < 1:
            raise ParameterError(f"backbone width and depth must be >= 1, got {self.width}, {self.depth}")
        if self.upsample != 'bilinear':
            raise ParameterError(f"unsupported upsample mode {self.upsample!r}")


class TrainingSample(NamedTuple):
    z: HsiCube
    x: HsiCube
    y: HsiCube


class TrainingResult(NamedTuple):
    params: NetworkParams
    losses: List[float]


class FusionBackbone:
    """Graph construction and evaluation of F for fixed band counts"""

    PREFIX = 'backbone'

    def __init__(self, cfg: BackboneConfig, bands: int, msi_bands: int):
        self.cfg = cfg
        self.bands = bands
        self.msi_bands = msi_bands
        self._graphs: Dict[int, Tuple[Graph, Dict[str, int]]] = {}

    def build(self, scale: int) -> Tuple[Graph, Dict[str, int], NetworkBuilder]:
        cfg = self.cfg
        graph = Graph(f"backbone-x{scale}")
        builder = NetworkBuilder(graph, self.PREFIX)
        x = graph.input('x')
        y = graph.input('y')
        target = graph.input('z_true')

        up = graph.apply(UpsampleBilinear(scale), x)
        h = graph.apply(Concat(2), up, y)
        channels = self.bands + self.msi_bands
        for i in range(cfg.depth):
            h = builder.leaky(builder.conv(h, f"conv{i}", channels, cfg.width, cfg.kernel_size))
            channels = cfg.width
        out = builder.conv(h, 'out', channels, self.bands, cfg.kernel_size)
        z = graph.apply(Add(), out, up)
        loss = graph.apply(MAELoss(), z, target)
        graph.mark_output('z', z)
        graph.mark_output('loss', loss)
        return graph, {'z': z, 'loss': loss, 'up': up}, builder

    def graph(self, scale: int) -> Tuple[Graph, Dict[str, int]]:
        if scale not in self._graphs:
            graph, nodes, _ = self.build(scale)
            self._graphs[scale] = (graph, nodes)
        return self._graphs[scale]

    def init_params(self, rng: Rng) -> NetworkParams:
        _, _, builder = self.build(1)
        params = builder.init_params(rng)
        logger.debug(f"Backbone initialized: {params.count} parameters")
        return params

    def _scale(self, x: HsiCube, y: HsiCube) -> int:
        if x.bands != self.bands or y.bands != self.msi_bands:
            raise ShapeError(f"backbone expects {self.bands}/{self.msi_bands} bands, got {x.bands}/{y.bands}")
        if y.height % x.height or y.width % x.width or y.height // x.height != y.width // x.width:
            raise ShapeError(f"Y{y.shape} is not an integer upscaling of X{x.shape}")
        return y.height // x.height

    def forward(self, x: HsiCube, y: HsiCube, params: NetworkParams) -> HsiCube:
        scale = self._scale(x, y)
        graph, _ = self.graph(scale)
        dummy = np.zeros((self.bands, y.height, y.width))
        outputs = graph.forward({'x': x.data, 'y': y.data, 'z_true': dummy}, params)
        return HsiCube(outputs['z'], x.value_range)

    def loss_and_grads(self, sample: TrainingSample, params: NetworkParams) -> Tuple[float, NetworkParams]:
        scale = self._scale(sample.x, sample.y)
        if sample.z.shape != (self.bands, sample.y.height, sample.y.width):
            raise ShapeError(f"target Z{sample.z.shape} does not match Y{sample.y.shape}")
        graph, nodes = self.graph(scale)
        outputs = graph.forward({'x': sample.x.data, 'y': sample.y.data, 'z_true': sample.z.data}, params)
        grads = graph.backward(nodes['loss'])
        return float(outputs['loss']), grads.params


def backbone_forward(x: HsiCube, y: HsiCube, theta_f: NetworkParams, cfg: Optional[BackboneConfig] = None) -> HsiCube:
    """Z_hat = F(X, Y; theta_f)"""
    return FusionBackbone(cfg or BackboneConfig(), x.bands, y.bands).forward(x, y, theta_f)


def train_backbone(
    dataset: Sequence[TrainingSample],
    cfg: BackboneConfig,
    epochs: int,
    lr: float = 1e-4,
    rng: Optional[Rng] = None,
    theta_init: Optional[NetworkParams] = None,
    batch_size: int = 6,
    decay: float = 0.7,
    decay_every: int = 10,
) -> TrainingResult:
    """
    Minimize the mean l1 error ||Z - F(X, Y)|| over the dataset with Adam

    Mini-batches average their gradients; the learning rate is multiplied by
    decay every decay_every epochs (decay_every=0 disables the schedule).
    Returns the final parameters and the mean training loss of every epoch.

    Raises:
        ParameterError: empty dataset or invalid schedule
    """
    if not dataset:
        raise ParameterError("cannot train the backbone on an empty dataset")
    if epochs < 1 or batch_size < 1:
        raise ParameterError(f"epochs and batch_size must be >= 1, got {epochs}, {batch_size}")
    rng = rng or Rng(0)
    bands, msi_bands = dataset[0].z.bands, dataset[0].y.bands
    network = FusionBackbone(cfg, bands, msi_bands)
    params = theta_init.copy() if theta_init is not None else network.init_params(rng.derive(1))
    state = AdamState(lr=lr)
    order_rng = rng.derive(2)

    losses: List[float] = []
    for epoch in range(1, epochs + 1):
        if decay_every and epoch > 1 and (epoch - 1) % decay_every == 0:
            state.lr *= decay
        order = order_rng.permutation(len(dataset))
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            batch = [dataset[i] for i in order[start:start + batch_size]]
            total = params.zeros_like()
            for sample in batch:
                loss, grads = network.loss_and_grads(sample, params)
                epoch_losses.append(loss)
                total = total.add_scaled(grads, 1.0 / len(batch))
            params = adam_step(params, total, state)
        losses.append(float(np.mean(epoch_losses)))
        if epoch == 1 or epoch % 10 == 0 or epoch == epochs:
            logger.info(f"Backbone epoch {epoch}/{epochs}: l1 loss {losses[-1]:.6f} (lr {state.lr:.2e})")

    return TrainingResult(params, losses)
