"""
End-to-end oracles on desk-scale synthetic scenes

All cases here take minutes; deselect them with: pytest -m "not slow"
"""

from dataclasses import replace

import numpy as np
import pytest

from hsifusion.analysis import AblationAnalyzer, AblationSettings
from hsifusion.core import HsiCube, Rng, bicubic_upsample
from hsifusion.data import crop_patches, synthetic_scene
from hsifusion.degeneration import (
    DegenerationConfig,
    DegenerationRanges,
    MotionSpec,
    gaussian_srf,
    sample_degeneration,
    simulate_pair,
)
from hsifusion.driver import (
    MetaConfig,
    Mode,
    Schedule,
    default_inits,
    make_meta_tasks,
    maml_pretrain,
    run_alternating,
)
from hsifusion.estimation import EstimationConfig
from hsifusion.metrics import psnr
from hsifusion.reconstruction import (
    BackboneConfig,
    ReconNet,
    ReconNetConfig,
    TrainingSample,
    backbone_forward,
    dip_optimize,
    train_backbone,
)

pytestmark = pytest.mark.slow

SCALE = 4
MOTION = MotionSpec(length=7, angle=0.6, thickness=1.0)


def _scenes(count, bands, size, seed):
    root = Rng(seed)
    return [synthetic_scene(bands, size, size, root.derive(i)) for i in range(count)]


def _ablation(snr):
    scenes = _scenes(3, 16, 64, seed=2024)
    degeneration = DegenerationConfig(
        scale=SCALE, kernel_spec=MOTION, srf_base=gaussian_srf(4, 16), srf_perturb_c=0.02,
        snr_hsi_db=snr, snr_msi_db=snr,
    )
    settings = AblationSettings(
        schedule=Schedule(outer_iters=40, inner_iters=10),
        recon_cfg=ReconNetConfig(spatial_width=16, spectral_width=16, kernel_support=7),
        estimation=EstimationConfig(eta=1e-6, xi=1e-6),
    )
    return AblationAnalyzer(scenes, degeneration, settings, seed=7)


def test_alternating_beats_joint_beats_separate():
    table = _ablation(40.0).optimization_manners().set_index('Method')
    assert table.loc['Alternating', 'PSNR'] - table.loc['Joint', 'PSNR'] >= 0.3
    assert table.loc['Joint', 'PSNR'] - table.loc['Separate', 'PSNR'] >= 0.3


def test_kernel_error_shrinks_over_outer_iterations():
    analyzer = _ablation(float('inf'))
    for problem in analyzer.problems():
        k_init, p_init = default_inits(7, analyzer.degeneration.srf_base)
        result = run_alternating(
            problem.x, problem.y, SCALE, None, analyzer.random_init(), k_init, p_init,
            analyzer.settings.schedule, mode=Mode.ALTERNATING,
            recon_cfg=analyzer.settings.recon_cfg, estimation=analyzer.settings.estimation,
            truth=problem.truth, z_hat=problem.z_hat,
        )
        errors = [result.trace.records[t - 1].kernel_error for t in (10, 20, 30, 40)]
        assert all(later <= earlier for earlier, later in zip(errors, errors[1:])), errors


def test_meta_initialization_adapts_faster():
    recon_cfg = ReconNetConfig(
        spatial_width=8, spectral_width=8, fusion_depth=1, kernel_embed=8, srf_embed=8, kernel_support=7
    )
    srf_base = gaussian_srf(3, 8)
    ranges = DegenerationRanges()
    training = make_meta_tasks(_scenes(4, 8, 32, seed=1), ranges, 16, Rng(2), 2, srf_base)
    held_out = make_meta_tasks(_scenes(5, 8, 32, seed=3), ranges, 5, Rng(4), 2, srf_base)

    network = ReconNet(recon_cfg, 8, 3)
    theta_meta = maml_pretrain(
        training, network.init_params(Rng(5)), MetaConfig(epochs=60, tasks_per_batch=4, outer_lr=1e-3),
        recon_cfg, Rng(6),
    ).params

    def trajectory(task, theta):
        curve = []
        dip_optimize(
            task.x, task.y, task.k, task.p, 2, task.z_hat, theta, 400, network=network,
            callback=lambda t, z, loss: curve.append(psnr(task.z, HsiCube(z))) and False,
        )
        return np.array(curve)

    def first_reaching(curve, threshold):
        hits = np.flatnonzero(curve >= threshold)
        return int(hits[0]) if hits.size else len(curve)

    random_iters, meta_iters = [], []
    for task in held_out:
        curves = [trajectory(task, network.init_params(Rng(100 + seed))) for seed in range(5)]
        threshold = float(np.median([curve[-1] for curve in curves])) - 0.5
        random_iters.extend(first_reaching(curve, threshold) for curve in curves)
        meta_iters.append(first_reaching(trajectory(task, theta_meta), threshold))

    assert np.median(meta_iters) <= 0.7 * np.median(random_iters)


def test_backbone_beats_bicubic_on_a_held_out_scene():
    cfg = BackboneConfig(width=16, depth=2)
    srf_base = gaussian_srf(3, 8)
    ranges = DegenerationRanges()
    simulation = Rng(9)

    def sample(z, i):
        rng = simulation.derive(i)
        spec, c = sample_degeneration(ranges, rng)
        degeneration = DegenerationConfig(scale=2, kernel_spec=spec, srf_base=srf_base, srf_perturb_c=c)
        x, y, _, _ = simulate_pair(z, degeneration, rng)
        return TrainingSample(z, x, y)

    patches = [patch for scene in _scenes(3, 8, 64, seed=11) for patch in crop_patches(scene, 32, 16)]
    dataset = [sample(z, i) for i, z in enumerate(patches)]
    theta_f = train_backbone(dataset, cfg, epochs=30, lr=1e-3, rng=Rng(12)).params

    test = sample(_scenes(1, 8, 32, seed=13)[0], len(dataset))
    fused = backbone_forward(test.x, test.y, theta_f, cfg)
    assert psnr(test.z, fused) > psnr(test.z, bicubic_upsample(test.x, 2))


def test_noise_study_prefers_cleaner_observations():
    analyzer = _ablation(40.0)
    analyzer.settings = replace(analyzer.settings, schedule=Schedule(outer_iters=10, inner_iters=10))
    table = analyzer.noise_levels((30.0, 40.0))
    assert table.loc[1, 'PSNR'] > table.loc[0, 'PSNR']
