"""
Tests for the blind fusion driver, its schedules and the run trace
"""

import numpy as np
import pandas as pd
import pytest

from hsifusion.core import BlurKernel, Rng, SrfMatrix, bicubic_upsample
from hsifusion.driver import (
    GroundTruth,
    Mode,
    RunTrace,
    Schedule,
    TraceRecord,
    default_inits,
    kernel_error,
    run_alternating,
    srf_error,
)
from hsifusion.estimation import EstimationConfig
from hsifusion.exceptions import ParameterError, ShapeError, SolverError
from hsifusion.reconstruction import BackboneConfig, FusionBackbone, ReconNet, ReconNetConfig

TINY_RECON = ReconNetConfig(
    spatial_width=4, spectral_width=3, fusion_depth=1, kernel_embed=3, srf_embed=3, kernel_support=3
)
SHORT = Schedule(outer_iters=2, inner_iters=3, lr_degeneration=1e-3, lr_reconstruction=1e-3)


def _theta(seed=0, zero_output=False):
    params = ReconNet(TINY_RECON, 4, 2).init_params(Rng(seed))
    if zero_output:
        for name in ('recon.out.weight', 'recon.out.bias'):
            params[name] = np.zeros_like(params[name])
    return params


def _run(problem, mode, schedule=SHORT, **kwargs):
    z, x, y, k, p = problem
    k0, p0 = default_inits(3, p)
    options = dict(recon_cfg=TINY_RECON, z_hat=bicubic_upsample(x, 2), truth=GroundTruth(z, k, p))
    options.update(kwargs)
    return run_alternating(x, y, 2, None, _theta(), k0, p0, schedule, mode=mode, **options)


class TestModes:

    @pytest.mark.parametrize('mode', list(Mode))
    def test_equal_budget(self, problem, mode):
        result = _run(problem, mode)
        assert result.trace.steps == SHORT.budget()
        assert len(result.trace) == SHORT.outer_iters
        assert result.z.shape == problem[0].shape

    @pytest.mark.parametrize('mode', list(Mode))
    def test_fixed_point_at_truth(self, problem, mode):
        z, x, y, k, p = problem
        estimation = EstimationConfig(eta=0.0, xi=0.0)
        result = run_alternating(
            x, y, 2, None, _theta(1, zero_output=True), k, p, SHORT, mode=mode,
            recon_cfg=TINY_RECON, estimation=estimation, z_hat=z,
        )
        assert np.allclose(result.z.data, z.data, atol=1e-10)
        assert np.allclose(result.k.weights, k.weights, atol=1e-10)
        assert np.allclose(result.p.weights, p.weights, atol=1e-8)

    def test_alternating_residuals_at_truth(self, problem):
        z, x, y, k, p = problem
        result = run_alternating(
            x, y, 2, None, _theta(1, zero_output=True), k, p, SHORT,
            recon_cfg=TINY_RECON, estimation=EstimationConfig(eta=0.0, xi=0.0), z_hat=z,
        )
        assert max(result.trace.residual_sums()) < 1e-10

    def test_alternating_residuals_do_not_grow(self, problem):
        schedule = Schedule(outer_iters=4, inner_iters=5, lr_degeneration=1e-3, lr_reconstruction=1e-3)
        sums = _run(problem, Mode.ALTERNATING, schedule).trace.residual_sums()
        assert sums[-1] <= 1.1 * sums[0]

    def test_records_carry_ground_truth_errors(self, problem):
        trace = _run(problem, 'joint').trace
        record = trace.records[-1]
        assert record.kernel_error is not None and record.kernel_error >= 0
        assert record.srf_error is not None
        assert record.metrics is not None and np.isfinite(record.metrics.ssim)
        assert trace.kernel_at(1).shape == (3, 3)
        assert trace.kernel_at(99) is None

    def test_backbone_produces_z_hat(self, problem):
        z, x, y, k, p = problem
        backbone = BackboneConfig(width=4, depth=1)
        theta_f = FusionBackbone(backbone, 4, 2).init_params(Rng(3))
        k0, p0 = default_inits(3, p)
        result = run_alternating(
            x, y, 2, theta_f, _theta(), k0, p0, SHORT, mode='separate',
            backbone_cfg=backbone, recon_cfg=TINY_RECON,
        )
        assert result.z.shape == z.shape

    def test_deterministic(self, problem, tmp_path):
        first = _run(problem, Mode.ALTERNATING).trace.to_csv(tmp_path / 'a.csv')
        second = _run(problem, Mode.ALTERNATING).trace.to_csv(tmp_path / 'b.csv')
        assert first.read_bytes() == second.read_bytes()


class TestDriverErrors:

    def test_kernel_support_must_match_network(self, problem):
        z, x, y, k, p = problem
        with pytest.raises(ShapeError):
            run_alternating(x, y, 2, None, _theta(), BlurKernel.uniform(5), p, SHORT, recon_cfg=TINY_RECON, z_hat=z)

    def test_needs_backbone_or_z_hat(self, problem):
        z, x, y, k, p = problem
        with pytest.raises(ShapeError):
            run_alternating(x, y, 2, None, _theta(), k, p, SHORT, recon_cfg=TINY_RECON)

    def test_solver_failure_carries_partial_trace(self, problem):
        schedule = Schedule(outer_iters=2, inner_iters=8)
        with pytest.raises(SolverError) as info:
            _run(problem, Mode.ALTERNATING, schedule, estimation=EstimationConfig(solver='gd', lr=100.0))
        assert isinstance(info.value.trace, RunTrace)
        assert len(info.value.trace) == 0

    def test_unknown_mode(self):
        with pytest.raises(ParameterError):
            Mode.parse('sequential')
        assert Mode.parse('Joint') is Mode.JOINT


class TestSchedule:

    def test_budget(self):
        assert Schedule(outer_iters=20, inner_iters=20).budget() == {
            'kernel': 400, 'srf': 400, 'reconstruction': 400,
        }

    @pytest.mark.parametrize('kwargs', [{'outer_iters': 0}, {'inner_iters': 0}, {'lr_reconstruction': 0.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            Schedule(**kwargs)


class TestTrace:

    def test_kernel_error_pads_supports(self):
        assert kernel_error(BlurKernel.delta(3), BlurKernel.delta(5)) == 0.0
        assert kernel_error(BlurKernel.uniform(3), BlurKernel.delta(3)) == pytest.approx(np.sqrt(8 / 81 + (8 / 9) ** 2))

    def test_srf_error(self):
        p = SrfMatrix(np.array([[0.5, 0.5]]))
        q = SrfMatrix(np.array([[1.0, 0.0]]))
        assert srf_error(p, q) == pytest.approx(np.sqrt(0.5))

    def test_csv_columns(self, problem, tmp_path):
        path = _run(problem, Mode.SEPARATE).trace.to_csv(tmp_path / 'trace.csv')
        frame = pd.read_csv(path)
        assert list(frame.columns) == [
            'outer_iter', 'residual_x', 'residual_y', 'kernel_error', 'srf_error', 'rmse', 'psnr', 'sam', 'ssim'
        ]
        assert list(frame['outer_iter']) == [1, 2]

    def test_summary_without_records(self):
        summary = RunTrace(mode='joint').summary()
        assert summary['outer_iterations'] == 0
        assert summary['metrics'] is None

    def test_summary(self):
        trace = RunTrace(mode='alternating')
        trace.append(TraceRecord(1, 0.5, 0.25))
        trace.count('kernel', 10)
        summary = trace.summary()
        assert summary['final_residual_x'] == 0.5
        assert summary['steps']['kernel'] == 10
