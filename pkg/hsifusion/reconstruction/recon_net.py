"""
Guided Reconstruction Network
=============================

G(Z_hat, k, P; theta_g). Two branches read Z_hat:

- spatial: a stack of `branch_depth` 3x3 convs; the first is modulated per
  channel by an embedding of flattened k
- spectral: a stack of `branch_depth` 1x1 band mixings; the first is modulated
  per channel by an embedding of flattened P

Their features are concatenated, fused by `fusion_depth` convs and mapped
back to B bands; Z_hat is added as a residual. With guidance disabled the
modulation is skipped and k, P only enter through the data terms.

Graphs can carry a loss head:
- 'none': network output only
- 'fidelity': l1(Phi G, X) + l1(Psi G, Y) with separate Phi / Psi operator inputs
- 'supervised': l1(G, Z_true)
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..autodiff import (
    Add,
    Concat,
    Graph,
    MAELoss,
    NetworkParams,
    Reshape,
    ScaleShift,
    SpatialDegradeOp,
    SpectralDegradeOp,
)
from ..core import BlurKernel, HsiCube, Rng, SrfMatrix
from ..exceptions import ParameterError, ShapeError
from .layers import NetworkBuilder

logger = logging.getLogger(__name__)

OBJECTIVES = ('none', 'fidelity', 'supervised')


@dataclass(frozen=True)
class ReconNetConfig:
    spatial_width: int = 32
    spectral_width: int = 32
    fusion_depth: int = 2
    branch_depth: int = 1
    kernel_embed: int = 16
    srf_embed: int = 16
    kernel_support: int = 7
    guidance: bool = True

    def __post_init__(self):
        widths = (
            self.spatial_width, self.spectral_width, self.fusion_depth, self.branch_depth,
            self.kernel_embed, self.srf_embed,
        )
        if min(widths) < 1:
            raise ParameterError(f"reconstruction network widths must be >= 1, got {widths}")
        if self.kernel_support < 1 or self.kernel_support % 2 == 0:
            raise ParameterError(f"kernel_support must be odd, got {self.kernel_support}")


class ReconNet:
    """Builds and evaluates G for fixed band counts"""

    PREFIX = 'recon'

    def __init__(self, cfg: ReconNetConfig, bands: int, msi_bands: int):
        self.cfg = cfg
        self.bands = bands
        self.msi_bands = msi_bands
        self._graphs: Dict[Tuple[int, str], Tuple[Graph, Dict[str, int]]] = {}

    def _guidance(self, builder: NetworkBuilder, source: int, name: str, length: int, embed: int, channels: int):
        graph = builder.graph
        flat = graph.apply(Reshape((length,)), source)
        hidden = builder.leaky(builder.dense(flat, f"{name}.embed", length, embed))
        gamma = builder.dense(hidden, f"{name}.gamma", embed, channels)
        beta = builder.dense(hidden, f"{name}.beta", embed, channels)
        return gamma, beta

    def build(self, scale: int = 1, objective: str = 'none') -> Tuple[Graph, Dict[str, int], NetworkBuilder]:
        if objective not in OBJECTIVES:
            raise ParameterError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
        cfg = self.cfg
        support = cfg.kernel_support
        graph = Graph(f"recon-{objective}-x{scale}")
        builder = NetworkBuilder(graph, self.PREFIX)

        z_hat = graph.input('z_hat')
        kernel = graph.input('kernel', (support, support))
        srf = graph.input('srf', (self.msi_bands, self.bands))

        spatial = builder.conv(z_hat, 'spatial.conv', self.bands, cfg.spatial_width)
        spectral = builder.band_mix(z_hat, 'spectral.mix', self.bands, cfg.spectral_width)
        if cfg.guidance:
            gamma, beta = self._guidance(
                builder, kernel, 'spatial.guide', support * support, cfg.kernel_embed, cfg.spatial_width
            )
            spatial = graph.apply(ScaleShift(), spatial, gamma, beta)
            gamma, beta = self._guidance(
                builder, srf, 'spectral.guide', self.msi_bands * self.bands, cfg.srf_embed, cfg.spectral_width
            )
            spectral = graph.apply(ScaleShift(), spectral, gamma, beta)
        spatial = builder.leaky(spatial)
        spectral = builder.leaky(spectral)
        for i in range(1, cfg.branch_depth):
            spatial = builder.leaky(builder.conv(spatial, f"spatial.conv{i}", cfg.spatial_width, cfg.spatial_width))
            spectral = builder.leaky(
                builder.band_mix(spectral, f"spectral.mix{i}", cfg.spectral_width, cfg.spectral_width)
            )

        h = graph.apply(Concat(2), spatial, spectral)
        channels = cfg.spatial_width + cfg.spectral_width
        for i in range(cfg.fusion_depth):
            h = builder.leaky(builder.conv(h, f"fusion{i}", channels, cfg.spatial_width))
            channels = cfg.spatial_width
        out = builder.conv(h, 'out', channels, self.bands)
        z = graph.apply(Add(), out, z_hat)
        graph.mark_output('z', z)
        nodes = {'z': z}

        if objective == 'fidelity':
            x = graph.input('x')
            y = graph.input('y')
            phi_kernel = graph.input('phi_kernel')
            psi_srf = graph.input('psi_srf', (self.msi_bands, self.bands))
            fit_x = graph.apply(MAELoss(), graph.apply(SpatialDegradeOp(scale), z, phi_kernel), x)
            fit_y = graph.apply(MAELoss(), graph.apply(SpectralDegradeOp(), z, psi_srf), y)
            nodes['loss'] = graph.apply(Add(), fit_x, fit_y)
        elif objective == 'supervised':
            target = graph.input('z_true')
            nodes['loss'] = graph.apply(MAELoss(), z, target)
        if 'loss' in nodes:
            graph.mark_output('loss', nodes['loss'])
        return graph, nodes, builder

    def graph(self, scale: int = 1, objective: str = 'none') -> Tuple[Graph, Dict[str, int]]:
        key = (scale, objective)
        if key not in self._graphs:
            graph, nodes, _ = self.build(scale, objective)
            self._graphs[key] = (graph, nodes)
        return self._graphs[key]

    def init_params(self, rng: Rng) -> NetworkParams:
        _, _, builder = self.build()
        params = builder.init_params(rng)
        logger.debug(f"Reconstruction network initialized: {params.count} parameters")
        return params

    def guidance_arrays(self, k: BlurKernel, p: SrfMatrix) -> Tuple[np.ndarray, np.ndarray]:
        if p.weights.shape != (self.msi_bands, self.bands):
            raise ShapeError(f"SRF {p.weights.shape} does not match network bands {(self.msi_bands, self.bands)}")
        return k.fit_support(self.cfg.kernel_support).weights, p.weights

    def bindings(
        self,
        z_hat: HsiCube,
        k: BlurKernel,
        p: SrfMatrix,
        x: Optional[HsiCube] = None,
        y: Optional[HsiCube] = None,
        z_true: Optional[HsiCube] = None,
    ) -> Dict[str, np.ndarray]:
        if z_hat.bands != self.bands:
            raise ShapeError(f"network expects {self.bands} bands, Z_hat has {z_hat.bands}")
        kernel, srf = self.guidance_arrays(k, p)
        bound = {'z_hat': z_hat.data, 'kernel': kernel, 'srf': srf}
        if x is not None and y is not None:
            bound.update({'x': x.data, 'y': y.data, 'phi_kernel': k.weights, 'psi_srf': p.weights})
        if z_true is not None:
            bound['z_true'] = z_true.data
        return bound

    def forward(self, z_hat: HsiCube, k: BlurKernel, p: SrfMatrix, params: NetworkParams) -> HsiCube:
        graph, _ = self.graph()
        outputs = graph.forward(self.bindings(z_hat, k, p), params)
        return HsiCube(outputs['z'], z_hat.value_range)


def recon_forward(
    z_hat: HsiCube,
    k: BlurKernel,
    p: SrfMatrix,
    theta_g: NetworkParams,
    cfg: Optional[ReconNetConfig] = None
) -> HsiCube:
    """Z = G(Z_hat, k, P; theta_g)"""
    return ReconNet(cfg or ReconNetConfig(), z_hat.bands, p.out_bands).forward(z_hat, k, p, theta_g)
