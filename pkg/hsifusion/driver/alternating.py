"""
Blind Fusion Driver
===================

Runs the test-time optimization after the backbone produced Z_hat:

- alternating: per outer iteration, a kernel step, an SRF step and a block
  of DIP steps, each warm-started from the previous outer iteration
- separate: k and P estimated once from Z_hat with the whole budget, then
  the whole DIP budget with those operators fixed
- joint: one loop in which every step updates k, P and theta_g from the
  summed l1 fidelity loss

Every mode spends outer_iters * inner_iters steps on each of k, P and theta_g.
"""

import logging
from dataclasses import replace
from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..autodiff import AdamState, NetworkParams, adam_step
from ..core import BlurKernel, HsiCube, SrfMatrix
from ..degeneration import GaussianSpec, gaussian_kernel
from ..estimation import EstimationConfig, estimate_kernel_step, estimate_srf_step, project_kernel, project_srf
from ..exceptions import FusionException, ShapeError, SolverError
from ..metrics import evaluate
from ..reconstruction.backbone import BackboneConfig, backbone_forward
from ..reconstruction.dip import dip_optimize
from ..reconstruction.map import data_residuals
from ..reconstruction.recon_net import ReconNet, ReconNetConfig
from .schedule import Mode, Schedule
from .trace import GroundTruth, RunTrace, TraceRecord, kernel_error, srf_error

logger = logging.getLogger(__name__)

INIT_KERNEL_SIGMA = 1.0


class FusionResult(NamedTuple):
    z: HsiCube
    k: BlurKernel
    p: SrfMatrix
    trace: RunTrace
    theta_g: NetworkParams


def default_inits(kernel_support: int, srf_base: SrfMatrix) -> Tuple[BlurKernel, SrfMatrix]:
    """Degeneration starting point when nothing better is known: a mild Gaussian and the base SRF"""
    return gaussian_kernel(GaussianSpec(size=kernel_support, sigma=INIT_KERNEL_SIGMA)), srf_base


def _record(
    trace: RunTrace, outer: int,
    x: HsiCube, y: HsiCube, s: int, z: HsiCube, k: BlurKernel, p: SrfMatrix,
    truth: Optional[GroundTruth]
):
    residual_x, residual_y = data_residuals(x, y, k, p, s, z)
    record = TraceRecord(outer, residual_x, residual_y, kernel=k.weights.copy())
    if truth is not None:
        if truth.k is not None:
            record.kernel_error = kernel_error(k, truth.k)
        if truth.p is not None:
            record.srf_error = srf_error(p, truth.p)
        if truth.z is not None:
            record.metrics = evaluate(truth.z, z)
    trace.append(record)
    psnr_text = f", PSNR {record.metrics.psnr:.2f} dB" if record.metrics is not None else ""
    logger.info(
        f"[{trace.mode}] outer {outer}: residuals {residual_x:.4e} / {residual_y:.4e}{psnr_text}"
    )


def run_alternating(
    x: HsiCube,
    y: HsiCube,
    s: int,
    theta_f: Optional[NetworkParams],
    theta_g_init: NetworkParams,
    k_init: BlurKernel,
    p_init: SrfMatrix,
    schedule: Schedule,
    mode=Mode.ALTERNATING,
    backbone_cfg: Optional[BackboneConfig] = None,
    recon_cfg: Optional[ReconNetConfig] = None,
    estimation: Optional[EstimationConfig] = None,
    truth: Optional[GroundTruth] = None,
    z_hat: Optional[HsiCube] = None,
) -> FusionResult:
    """
    Blind fusion of an LR HSI X and an HR MSI Y

    Z_hat comes from the frozen backbone theta_f unless given explicitly.
    k_init must have the reconstruction network's guidance support.

    Raises:
        SolverError: a sub-solver failed; .trace holds the RunTrace so far
    """
    mode = Mode.parse(mode)
    recon_cfg = recon_cfg or ReconNetConfig(kernel_support=k_init.size)
    if k_init.size != recon_cfg.kernel_support:
        raise ShapeError(f"k_init size {k_init.size} differs from the guidance support {recon_cfg.kernel_support}")
    estimation = replace(estimation or EstimationConfig(), inner_iters=schedule.inner_iters)

    if z_hat is None:
        if theta_f is None:
            raise ShapeError("either theta_f or z_hat must be given")
        z_hat = backbone_forward(x, y, theta_f, backbone_cfg)
    network = ReconNet(recon_cfg, x.bands, y.bands)
    trace = RunTrace(mode=mode.value)
    logger.info(
        f"Blind fusion ({mode.value}): X{x.shape} Y{y.shape} s={s}, "
        f"{schedule.outer_iters}x{schedule.inner_iters} iterations"
    )

    try:
        if mode is Mode.ALTERNATING:
            result = _alternating(x, y, s, z_hat, theta_g_init, k_init, p_init, schedule, network, estimation, truth, trace)
        elif mode is Mode.SEPARATE:
            result = _separate(x, y, s, z_hat, theta_g_init, k_init, p_init, schedule, network, estimation, truth, trace)
        else:
            result = _joint(x, y, s, z_hat, theta_g_init, k_init, p_init, schedule, network, truth, trace)
    except SolverError as e:
        logger.error(f"Blind fusion aborted after {len(trace)} outer iterations: {e}")
        raise SolverError(f"{mode.value} run aborted: {e}", trace) from e
    except FusionException:
        logger.error(f"Blind fusion aborted after {len(trace)} outer iterations")
        raise
    return result


def _alternating(x, y, s, z_hat, theta, k, p, schedule, network, estimation, truth, trace) -> FusionResult:
    z = z_hat
    state = AdamState(lr=schedule.lr_reconstruction)
    for outer in range(1, schedule.outer_iters + 1):
        k = estimate_kernel_step(x, z, s, k, estimation)
        trace.count('kernel', schedule.inner_iters)
        p = estimate_srf_step(y, z, p, estimation)
        trace.count('srf', schedule.inner_iters)
        dip = dip_optimize(
            x, y, k, p, s, z_hat, theta, schedule.inner_iters,
            lr=schedule.lr_reconstruction, state=state, network=network,
        )
        trace.count('reconstruction', schedule.inner_iters)
        z, theta = dip.z, dip.params
        _record(trace, outer, x, y, s, z, k, p, truth)
    return FusionResult(z, k, p, trace, theta)


def _separate(x, y, s, z_hat, theta, k, p, schedule, network, estimation, truth, trace) -> FusionResult:
    total = schedule.total_budget
    full = replace(estimation, inner_iters=total)
    k = estimate_kernel_step(x, z_hat, s, k, full)
    trace.count('kernel', total)
    p = estimate_srf_step(y, z_hat, p, full)
    trace.count('srf', total)

    state = AdamState(lr=schedule.lr_reconstruction)
    z = z_hat
    for outer in range(1, schedule.outer_iters + 1):
        dip = dip_optimize(
            x, y, k, p, s, z_hat, theta, schedule.inner_iters,
            lr=schedule.lr_reconstruction, state=state, network=network,
        )
        trace.count('reconstruction', schedule.inner_iters)
        z, theta = dip.z, dip.params
        _record(trace, outer, x, y, s, z, k, p, truth)
    return FusionResult(z, k, p, trace, theta)


def _joint(x, y, s, z_hat, theta, k, p, schedule, network, truth, trace) -> FusionResult:
    graph, nodes = network.graph(s, 'fidelity')
    net_state = AdamState(lr=schedule.lr_reconstruction)
    op_state = AdamState(lr=schedule.lr_degeneration)
    theta = theta.copy()
    best_loss, best = np.inf, None

    def evaluate_state():
        nonlocal best_loss, best
        outputs = graph.forward(network.bindings(z_hat, k, p, x=x, y=y), theta)
        loss = float(outputs['loss'])
        if not np.isfinite(loss):
            raise SolverError("joint loss became non-finite", [best_loss, loss])
        if loss < best_loss:
            best_loss, best = loss, (HsiCube(outputs['z'], z_hat.value_range), k, p, theta)
        return outputs

    for outer in range(1, schedule.outer_iters + 1):
        for _ in range(schedule.inner_iters):
            evaluate_state()
            grads = graph.backward(nodes['loss'], wrt_inputs=('kernel', 'phi_kernel', 'srf', 'psi_srf'))
            operators = NetworkParams({'kernel': k.weights, 'srf': p.weights})
            op_grads = NetworkParams({
                'kernel': grads.inputs['kernel'] + grads.inputs['phi_kernel'],
                'srf': grads.inputs['srf'] + grads.inputs['psi_srf'],
            })
            theta = adam_step(theta, grads.params, net_state)
            operators = adam_step(operators, op_grads, op_state)
            k = project_kernel(operators['kernel'])
            p = project_srf(operators['srf'])
            trace.count('kernel', 1)
            trace.count('srf', 1)
            trace.count('reconstruction', 1)

        outputs = evaluate_state()
        _record(trace, outer, x, y, s, HsiCube(outputs['z'], z_hat.value_range), k, p, truth)

    z_best, k_best, p_best, theta_best = best
    return FusionResult(z_best, k_best, p_best, trace, theta_best)
