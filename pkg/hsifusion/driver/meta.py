"""
Meta-Learning Pre-training of the Reconstruction Network
========================================================

Tasks are simulated scenes with randomly drawn Gaussian kernels and
perturbed SRFs. Each task's pixels are split into a support crop (left half,
the inner-loop loss) and a query crop (right half, the meta loss).

maml_pretrain runs first-order MAML with one inner step:

    theta' = theta - alpha * grad L_support(theta)
    theta <- Adam(theta, mean over tasks of grad L_query(theta'))

alpha is halved every `alpha_halving` epochs. multitask_pretrain is the same
loop without the inner step.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import AdamState, NetworkParams, adam_step
from ..config import config
from ..core import BlurKernel, HsiCube, Rng, SrfMatrix, bicubic_upsample
from ..degeneration import (
    DegenerationConfig,
    DegenerationRanges,
    GaussianSpec,
    sample_degeneration,
    simulate_pair,
    spatial_degrade,
)
from ..exceptions import ParameterError, ShapeError
from ..reconstruction.backbone import BackboneConfig, backbone_forward
from ..reconstruction.recon_net import ReconNet, ReconNetConfig

logger = logging.getLogger(__name__)

TASK_OBJECTIVES = ('supervised', 'fidelity')


@dataclass(frozen=True)
class MetaConfig:
    alpha: float = 1e-3
    epochs: int = 100
    tasks_per_batch: int = 4
    first_order: bool = True
    outer_lr: float = 1e-3
    alpha_halving: int = 10
    objective: str = 'supervised'
    workers: int = 1

    def __post_init__(self):
        if self.alpha < 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if self.epochs < 1 or self.tasks_per_batch < 1:
            raise ParameterError("epochs and tasks_per_batch must be >= 1")
        if not self.first_order:
            raise ParameterError("only first-order MAML is supported")
        if self.objective not in TASK_OBJECTIVES:
            raise ParameterError(f"objective must be one of {TASK_OBJECTIVES}, got {self.objective!r}")

    def alpha_at(self, epoch: int) -> float:
        """Task-level rate for a 1-based epoch"""
        if not self.alpha_halving:
            return self.alpha
        return self.alpha * 0.5 ** ((epoch - 1) // self.alpha_halving)


class CropBox(NamedTuple):
    """Half-open HR pixel rectangle [row0, row1) x [col0, col1)"""
    row0: int
    row1: int
    col0: int
    col1: int

    def intersects(self, other: 'CropBox') -> bool:
        return (
            self.row0 < other.row1 and other.row0 < self.row1
            and self.col0 < other.col1 and other.col0 < self.col1
        )


class TaskView(NamedTuple):
    x: HsiCube
    y: HsiCube
    z: HsiCube
    z_hat: HsiCube


class MetaTask(NamedTuple):
    x: HsiCube
    y: HsiCube
    z: HsiCube
    z_hat: HsiCube
    k: BlurKernel
    p: SrfMatrix
    kernel_spec: GaussianSpec
    c: float
    scale: int
    support: CropBox
    query: CropBox

    def view(self, box: CropBox, reblur: bool = False) -> TaskView:
        """
        Crop every cube to box

        Sliced X pixels near the crop edge were blurred with neighbours outside
        the crop. With reblur the clean part of X is recomputed from the cropped
        Z, so X matches Phi applied to the crop; the task's noise is kept.
        """
        s = self.scale
        rows, cols = slice(box.row0, box.row1), slice(box.col0, box.col1)
        lr_rows, lr_cols = slice(box.row0 // s, box.row1 // s), slice(box.col0 // s, box.col1 // s)
        x = self.x.data[:, lr_rows, lr_cols]
        if reblur:
            z_crop = HsiCube(self.z.data[:, rows, cols])
            clean = spatial_degrade(self.z, self.k, s).data[:, lr_rows, lr_cols]
            x = x - clean + spatial_degrade(z_crop, self.k, s).data
        return TaskView(
            HsiCube(x),
            HsiCube(self.y.data[:, rows, cols]),
            HsiCube(self.z.data[:, rows, cols]),
            HsiCube(self.z_hat.data[:, rows, cols]),
        )


class MetaResult(NamedTuple):
    params: NetworkParams
    losses: List[float]


def split_support_query(height: int, width: int, s: int, min_width: int = 1) -> Tuple[CropBox, CropBox]:
    """Left / right halves aligned to the scale factor"""
    half = (width // (2 * s)) * s
    if half < max(s, min_width):
        raise ShapeError(f"cube of width {width} is too small to split into two crops of >= {max(s, min_width)} px")
    return CropBox(0, height, 0, half), CropBox(0, height, half, 2 * half)


def make_meta_tasks(
    hr_cubes: Sequence[HsiCube],
    ranges: DegenerationRanges,
    count: int,
    rng: Rng,
    scale: int,
    srf_base: SrfMatrix,
    snr_hsi_db: float = float('inf'),
    snr_msi_db: float = float('inf'),
    theta_f: Optional[NetworkParams] = None,
    backbone_cfg: Optional[BackboneConfig] = None,
) -> List[MetaTask]:
    """
    Simulate count tasks; task i depends only on (rng seed, i)

    Z_hat is the backbone output when theta_f is given, otherwise the
    bicubic upsampling of X.
    """
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    if not hr_cubes:
        raise ParameterError("no HR cubes to build tasks from")

    tasks = []
    for i in range(count):
        task_rng = rng.derive(i)
        z = hr_cubes[int(task_rng.integers(0, len(hr_cubes)))]
        spec, c = sample_degeneration(ranges, task_rng)
        support, query = split_support_query(z.height, z.width, scale, min_width=spec.size)
        cfg = DegenerationConfig(
            scale=scale, kernel_spec=spec, srf_base=srf_base, srf_perturb_c=c,
            snr_hsi_db=snr_hsi_db, snr_msi_db=snr_msi_db,
        )
        x, y, k, p = simulate_pair(z, cfg, task_rng)
        if theta_f is not None:
            z_hat = backbone_forward(x, y, theta_f, backbone_cfg)
        else:
            z_hat = bicubic_upsample(x, scale)
        tasks.append(MetaTask(x, y, z, z_hat, k, p, spec, c, scale, support, query))
    logger.info(f"✓ Built {count} meta tasks from {len(hr_cubes)} scenes")
    return tasks


def task_loss_and_grads(
    network: ReconNet, task: MetaTask, box: CropBox, params: NetworkParams, objective: str
) -> Tuple[float, NetworkParams]:
    view = task.view(box, reblur=objective == 'fidelity')
    if objective == 'supervised':
        graph, nodes = network.graph(1, 'supervised')
        bound = network.bindings(view.z_hat, task.k, task.p, z_true=view.z)
    else:
        graph, nodes = network.graph(task.scale, 'fidelity')
        bound = network.bindings(view.z_hat, task.k, task.p, x=view.x, y=view.y)
    outputs = graph.forward(bound, params)
    grads = graph.backward(nodes['loss'])
    return float(outputs['loss']), grads.params


def _task_meta_gradient(
    network: ReconNet, task: MetaTask, params: NetworkParams, alpha: Optional[float], objective: str
) -> Tuple[float, NetworkParams]:
    """Query loss and gradient after one inner step (alpha=None skips the inner step)"""
    if alpha is None:
        return task_loss_and_grads(network, task, task.query, params, objective)
    _, support_grads = task_loss_and_grads(network, task, task.support, params, objective)
    adapted = params.add_scaled(support_grads, -alpha)
    return task_loss_and_grads(network, task, task.query, adapted, objective)


def _pretrain(
    tasks: Sequence[MetaTask],
    theta_init: NetworkParams,
    cfg: MetaConfig,
    recon_cfg: ReconNetConfig,
    rng: Rng,
    inner_step: bool,
) -> MetaResult:
    if not tasks:
        raise ParameterError("meta-training needs at least one task")
    if len(tasks) < 2:
        logger.warning("Meta-training on a single task")
    bands, msi_bands = tasks[0].z.bands, tasks[0].y.bands
    network = ReconNet(recon_cfg, bands, msi_bands)
    params = theta_init.copy()
    state = AdamState(lr=cfg.outer_lr)
    order_rng = rng.derive(0)
    workers = max(1, cfg.workers)
    label = 'MAML' if inner_step else 'Multi-task'

    losses: List[float] = []
    for epoch in range(1, cfg.epochs + 1):
        alpha = cfg.alpha_at(epoch) if inner_step else None
        order = order_rng.permutation(len(tasks))
        epoch_losses: List[float] = []
        for start in range(0, len(order), cfg.tasks_per_batch):
            batch = [tasks[i] for i in order[start:start + cfg.tasks_per_batch]]
            if workers > 1:
                # one network (and graph) per task; results come back in batch order
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(
                        lambda task: _task_meta_gradient(
                            ReconNet(recon_cfg, bands, msi_bands), task, params, alpha, cfg.objective
                        ),
                        batch,
                    ))
            else:
                results = [_task_meta_gradient(network, task, params, alpha, cfg.objective) for task in batch]

            meta_grad = params.zeros_like()
            for loss, grads in results:
                epoch_losses.append(loss)
                meta_grad = meta_grad.add_scaled(grads, 1.0 / len(results))
            params = adam_step(params, meta_grad, state)

        losses.append(float(np.mean(epoch_losses)))
        if epoch == 1 or epoch % 10 == 0 or epoch == cfg.epochs:
            alpha_text = f", alpha {alpha:.2e}" if alpha is not None else ""
            logger.info(f"{label} epoch {epoch}/{cfg.epochs}: query loss {losses[-1]:.6f}{alpha_text}")
    return MetaResult(params, losses)


def maml_pretrain(
    tasks: Sequence[MetaTask],
    theta_g_init: NetworkParams,
    cfg: MetaConfig,
    recon_cfg: Optional[ReconNetConfig] = None,
    rng: Optional[Rng] = None,
) -> MetaResult:
    """
    First-order MAML meta-initialization of theta_g

    losses[e] is the mean query loss (after adaptation) of epoch e.

    Raises:
        OptimizerError: non-finite meta-gradient
    """
    cfg = cfg if cfg.workers > 1 else _with_default_workers(cfg)
    return _pretrain(tasks, theta_g_init, cfg, recon_cfg or ReconNetConfig(), rng or Rng(0), inner_step=True)


def multitask_pretrain(
    tasks: Sequence[MetaTask],
    theta_g_init: NetworkParams,
    cfg: MetaConfig,
    recon_cfg: Optional[ReconNetConfig] = None,
    rng: Optional[Rng] = None,
) -> MetaResult:
    """Plain multi-task training on the query losses (MAML without adaptation)"""
    cfg = cfg if cfg.workers > 1 else _with_default_workers(cfg)
    return _pretrain(tasks, theta_g_init, cfg, recon_cfg or ReconNetConfig(), rng or Rng(0), inner_step=False)


def _with_default_workers(cfg: MetaConfig) -> MetaConfig:
    if config.WORKERS > 1:
        return replace(cfg, workers=config.WORKERS)
    return cfg
