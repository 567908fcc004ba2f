"""
Deep-Image-Prior Optimization of the Reconstruction Network
===========================================================

Per-scene optimization of theta_g only:

    min_theta ||X - Phi(G(Z_hat, k, P; theta))||_1 + ||Y - Psi(G(...))||_1

with Adam, keeping the best-loss iterate.
"""

import logging
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from ..autodiff import AdamState, NetworkParams, adam_step
from ..core import BlurKernel, HsiCube, SrfMatrix
from ..exceptions import OptimizerError, ParameterError, ShapeError, SolverError
from ..metrics import psnr
from .recon_net import ReconNet, ReconNetConfig

logger = logging.getLogger(__name__)

# callback(iteration, z, loss) -> True to stop early
DipCallback = Callable[[int, np.ndarray, float], bool]


class DipResult(NamedTuple):
    z: HsiCube
    params: NetworkParams
    losses: List[float]
    best_loss: float


def dip_optimize(
    x: HsiCube,
    y: HsiCube,
    k: BlurKernel,
    p: SrfMatrix,
    s: int,
    z_hat: HsiCube,
    theta_g_init: NetworkParams,
    iters: int,
    lr: float = 1e-3,
    cfg: Optional[ReconNetConfig] = None,
    state: Optional[AdamState] = None,
    callback: Optional[DipCallback] = None,
    network: Optional[ReconNet] = None,
) -> DipResult:
    """
    Optimize theta_g for iters Adam steps from theta_g_init

    losses[t] is the fidelity loss of the parameters before step t (plus one
    final entry after the last step). The returned Z and parameters are the
    best-loss pair seen. An AdamState may be passed to carry moments across
    calls; lr then overrides its rate.

    Raises:
        SolverError: non-finite loss or gradient (trace holds the losses so far)
    """
    if iters < 0:
        raise ParameterError(f"iters must be >= 0, got {iters}")
    if x.height * s != y.height or x.width * s != y.width:
        raise ShapeError(f"X{x.shape} and Y{y.shape} are inconsistent at scale {s}")
    if z_hat.shape != (x.bands, y.height, y.width):
        raise ShapeError(f"Z_hat{z_hat.shape} does not match the observations")

    network = network or ReconNet(cfg or ReconNetConfig(), x.bands, y.bands)
    graph, nodes = network.graph(s, 'fidelity')
    bound = network.bindings(z_hat, k, p, x=x, y=y)
    state = state if state is not None else AdamState(lr=lr)
    state.lr = lr

    params = theta_g_init.copy()
    losses: List[float] = []
    best_loss, best_z, best_params = np.inf, None, params

    for t in range(iters + 1):
        outputs = graph.forward(bound, params)
        loss = float(outputs['loss'])
        if not np.isfinite(loss):
            logger.error(f"DIP loss became non-finite at iteration {t}")
            raise SolverError(f"DIP loss became non-finite at iteration {t}", losses + [loss])
        losses.append(loss)
        if loss < best_loss:
            best_loss, best_z, best_params = loss, outputs['z'].copy(), params
        if callback is not None and callback(t, outputs['z'], loss):
            logger.debug(f"DIP stopped by callback at iteration {t}")
            break
        if t == iters:
            break
        grads = graph.backward(nodes['loss'])
        try:
            params = adam_step(params, grads.params, state)
        except OptimizerError as e:
            raise SolverError(f"DIP step {t} rejected: {e}", losses) from e

    logger.debug(f"DIP: {iters} iterations, loss {losses[0]:.6f} -> best {best_loss:.6f}")
    return DipResult(HsiCube(best_z, z_hat.value_range), best_params, losses, best_loss)


def iterations_to_threshold(
    x: HsiCube,
    y: HsiCube,
    k: BlurKernel,
    p: SrfMatrix,
    s: int,
    z_hat: HsiCube,
    theta_g_init: NetworkParams,
    z_true: HsiCube,
    threshold_db: float,
    max_iters: int,
    lr: float = 1e-3,
    cfg: Optional[ReconNetConfig] = None,
) -> Optional[int]:
    """First DIP iteration whose network output reaches threshold_db PSNR, or None"""
    reached: List[int] = []

    def probe(t: int, z: np.ndarray, loss: float) -> bool:
        if psnr(z_true, HsiCube(z)) >= threshold_db:
            reached.append(t)
            return True
        return False

    dip_optimize(x, y, k, p, s, z_hat, theta_g_init, max_iters, lr=lr, cfg=cfg, callback=probe)
    return reached[0] if reached else None
