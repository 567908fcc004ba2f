"""
hsifusion command line
======================

    python -m hsifusion <command> [--config FILE] [--seed N] [--output DIR] ...

Commands:
    synth-scene        write a synthetic HR cube
    simulate           HR cube -> (X, Y, k_true, P_true)
    pretrain-backbone  supervised training of the fusion backbone F
    meta-pretrain      MAML initialization of the reconstruction network G
    fuse               blind fusion of (X, Y)
    ablate             side-by-side comparison of fusion variants
    sweep              outer / inner iteration split study
    evaluate           metrics between two cubes
    export             PPM figures, text matrices and spectral curves

Every command writes <command>_summary.json into the output directory with
the full experiment configuration and the seed. Exit status is 2 when the
pipeline rejects its inputs or a solver fails.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .autodiff import NetworkParams
from .config import ExperimentConfig, config, load_experiment_config
from .core import HsiCube, Rng, SrfMatrix, bicubic_upsample
from .degeneration import (
    DegenerationConfig,
    DegenerationRanges,
    gaussian_srf,
    sample_degeneration,
    simulate_pair,
)
from .exceptions import FusionException, ParameterError, ShapeError
from .metrics import MetricReport, evaluate

logger = logging.getLogger(__name__)

EXIT_FAILURE = 2

# child streams of the root seed
SCENE_STREAM = 0
SIMULATION_STREAM = 1
TRAINING_STREAM = 2
INIT_STREAM = 3
TASK_STREAM = 4
META_STREAM = 5


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _experiment(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {'seed': args.seed, 'output_dir': args.output}
    for key in ('input', 'backbone_checkpoint', 'recon_checkpoint', 'mode'):
        overrides[key] = getattr(args, key, None)
    return load_experiment_config(args.config, overrides)


def _output_dir(experiment: ExperimentConfig) -> Path:
    return config.output_dir(experiment.output_dir)


def _write_summary(out: Path, command: str, experiment: ExperimentConfig, payload: Dict[str, Any]) -> Path:
    summary = {
        'command': command,
        'seed': experiment.seed,
        'config': experiment.model_dump(),
        **payload,
    }
    path = out / f"{command.replace('-', '_')}_summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=str) + '\n', encoding='utf-8')
    logger.info(f"✓ Summary written to {path}")
    return path


def _srf_base(experiment: ExperimentConfig, bands: int) -> SrfMatrix:
    from .data import load_srf

    if experiment.srf_path:
        srf = load_srf(experiment.srf_path)
        if srf.in_bands != bands:
            raise ShapeError(f"SRF file covers {srf.in_bands} bands, cube has {bands}")
        return srf
    return gaussian_srf(experiment.msi_bands, bands)


def _degeneration(experiment: ExperimentConfig, bands: int, kernel_spec=None, c=None) -> DegenerationConfig:
    return DegenerationConfig(
        scale=experiment.scale,
        kernel_spec=kernel_spec if kernel_spec is not None else experiment.kernel_spec(),
        srf_base=_srf_base(experiment, bands),
        srf_perturb_c=c if c is not None else experiment.srf_c,
        snr_hsi_db=experiment.snr_hsi,
        snr_msi_db=experiment.snr_msi,
    )


def _scenes(args: argparse.Namespace, experiment: ExperimentConfig, rng: Rng) -> List[HsiCube]:
    """HR cubes from --input files, or synthetic scenes when none are given"""
    from .data import load_cube, synthetic_scene

    paths = list(getattr(args, 'inputs', None) or [])
    if not paths and experiment.input:
        paths = [experiment.input]
    if paths:
        return [load_cube(path) for path in paths]
    count = getattr(args, 'scenes', 1)
    logger.info(f"No input cube given, generating {count} synthetic scene(s)")
    return [
        synthetic_scene(args.bands, args.height, args.width, rng.derive(i))
        for i in range(count)
    ]


def _recon_cfg(experiment: ExperimentConfig):
    from .reconstruction.recon_net import ReconNetConfig

    return ReconNetConfig(
        spatial_width=experiment.spatial_width,
        spectral_width=experiment.spectral_width,
        fusion_depth=experiment.fusion_depth,
        branch_depth=experiment.branch_depth,
        kernel_support=experiment.kernel_support,
        guidance=experiment.guidance,
    )


def _backbone_cfg(experiment: ExperimentConfig):
    from .reconstruction.backbone import BackboneConfig

    return BackboneConfig(width=experiment.backbone_width, depth=experiment.backbone_depth)


def _load_params(path: Optional[str]) -> Optional[NetworkParams]:
    from .data import load_checkpoint

    return load_checkpoint(path) if path else None


def _parse_pixels(values: Sequence[str]) -> List[tuple]:
    pixels = []
    for value in values:
        try:
            row, col = (int(part) for part in value.split(','))
        except ValueError:
            raise ParameterError(f"pixel must be 'row,col', got {value!r}") from None
        pixels.append((row, col))
    return pixels


def _parse_splits(values: Sequence[str]) -> List[tuple]:
    splits = []
    for value in values:
        try:
            outer, inner = (int(part) for part in value.lower().split('x'))
        except ValueError:
            raise ParameterError(f"split must be '<outer>x<inner>', got {value!r}") from None
        splits.append((outer, inner))
    return splits


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth_scene(args: argparse.Namespace) -> int:
    from .data import save_cube, synthetic_scene

    experiment = _experiment(args)
    out = _output_dir(experiment)
    rng = Rng(experiment.seed).derive(SCENE_STREAM)
    scene = synthetic_scene(args.bands, args.height, args.width, rng, materials=args.materials)
    path = save_cube(scene, out / 'scene.hsic')
    _write_summary(out, 'synth-scene', experiment, {'scene': str(path), 'shape': list(scene.shape)})
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    from .data import save_cube, save_matrix

    experiment = _experiment(args)
    out = _output_dir(experiment)
    root = Rng(experiment.seed)
    z = _scenes(args, experiment, root.derive(SCENE_STREAM))[0]
    degeneration = _degeneration(experiment, z.bands)
    x, y, k_true, p_true = simulate_pair(z, degeneration, root.derive(SIMULATION_STREAM))

    files = {
        'z': save_cube(z, out / 'z_true.hsic'),
        'x': save_cube(x, out / 'x.hsic'),
        'y': save_cube(y, out / 'y.hsic'),
        'k_true': save_matrix(k_true.weights, out / 'k_true.txt'),
        'p_true': save_matrix(p_true.weights, out / 'p_true.txt'),
    }
    _write_summary(out, 'simulate', experiment, {
        'files': {name: str(path) for name, path in files.items()},
        'x_shape': list(x.shape),
        'y_shape': list(y.shape),
        'kernel_size': k_true.size,
    })
    return 0


def cmd_pretrain_backbone(args: argparse.Namespace) -> int:
    from .data import crop_patches, save_checkpoint
    from .reconstruction.backbone import TrainingSample, train_backbone

    experiment = _experiment(args)
    out = _output_dir(experiment)
    root = Rng(experiment.seed)
    scenes = _scenes(args, experiment, root.derive(SCENE_STREAM))
    patches = [patch for scene in scenes for patch in crop_patches(scene, args.patch, args.stride)]

    ranges = DegenerationRanges()
    simulation = root.derive(SIMULATION_STREAM)
    dataset = []
    for i, z in enumerate(patches):
        rng = simulation.derive(i)
        spec, c = sample_degeneration(ranges, rng)
        x, y, _, _ = simulate_pair(z, _degeneration(experiment, z.bands, spec, c), rng)
        dataset.append(TrainingSample(z, x, y))
    logger.info(f"Backbone dataset: {len(dataset)} patches of {args.patch}px")

    result = train_backbone(
        dataset, _backbone_cfg(experiment), args.epochs, lr=args.lr,
        rng=root.derive(TRAINING_STREAM), batch_size=args.batch_size,
    )
    path = save_checkpoint(result.params, out / 'backbone.hspw')
    _write_summary(out, 'pretrain-backbone', experiment, {
        'checkpoint': str(path),
        'patches': len(dataset),
        'epochs': args.epochs,
        'losses': result.losses,
    })
    return 0


def cmd_meta_pretrain(args: argparse.Namespace) -> int:
    from .data import save_checkpoint
    from .driver.meta import MetaConfig, make_meta_tasks, maml_pretrain, multitask_pretrain
    from .reconstruction.recon_net import ReconNet

    experiment = _experiment(args)
    out = _output_dir(experiment)
    root = Rng(experiment.seed)
    scenes = _scenes(args, experiment, root.derive(SCENE_STREAM))
    srf_base = _srf_base(experiment, scenes[0].bands)
    theta_f = _load_params(experiment.backbone_checkpoint)

    tasks = make_meta_tasks(
        scenes, DegenerationRanges(), args.tasks, root.derive(TASK_STREAM), experiment.scale, srf_base,
        snr_hsi_db=experiment.snr_hsi, snr_msi_db=experiment.snr_msi,
        theta_f=theta_f, backbone_cfg=_backbone_cfg(experiment),
    )
    recon_cfg = _recon_cfg(experiment)
    theta_init = ReconNet(recon_cfg, scenes[0].bands, srf_base.out_bands).init_params(root.derive(INIT_STREAM))
    meta_cfg = MetaConfig(
        alpha=args.alpha, epochs=args.epochs, tasks_per_batch=args.tasks_per_batch,
        outer_lr=args.outer_lr, objective=args.objective,
    )
    pretrain = multitask_pretrain if args.multitask else maml_pretrain
    result = pretrain(tasks, theta_init, meta_cfg, recon_cfg, root.derive(META_STREAM))
    path = save_checkpoint(result.params, out / 'recon_meta.hspw')
    _write_summary(out, 'meta-pretrain', experiment, {
        'checkpoint': str(path),
        'tasks': len(tasks),
        'method': 'multitask' if args.multitask else 'maml',
        'meta': asdict(meta_cfg),
        'losses': result.losses,
    })
    return 0


def cmd_fuse(args: argparse.Namespace) -> int:
    from .core import BlurKernel
    from .data import load_cube, load_matrix, load_srf, save_cube, save_matrix
    from .driver.alternating import default_inits, run_alternating
    from .driver.trace import GroundTruth
    from .estimation import EstimationConfig
    from .reconstruction.backbone import backbone_forward
    from .reconstruction.recon_net import ReconNet

    experiment = _experiment(args)
    out = _output_dir(experiment)
    root = Rng(experiment.seed)
    x, y = load_cube(args.x), load_cube(args.y)
    s = experiment.scale
    if (y.height, y.width) != (x.height * s, x.width * s):
        raise ShapeError(f"Y {y.shape} is not X {x.shape} upscaled by {s}")

    srf_base = _srf_base(experiment, x.bands)
    if srf_base.out_bands != y.bands:
        raise ShapeError(f"SRF gives {srf_base.out_bands} MSI bands, Y has {y.bands}")
    recon_cfg = _recon_cfg(experiment)
    backbone_cfg = _backbone_cfg(experiment)

    theta_f = _load_params(experiment.backbone_checkpoint)
    if theta_f is not None:
        z_hat = backbone_forward(x, y, theta_f, backbone_cfg)
    else:
        logger.warning("No backbone checkpoint, starting from the bicubic upsampling of X")
        z_hat = bicubic_upsample(x, s)
    theta_g = _load_params(experiment.recon_checkpoint)
    if theta_g is None:
        theta_g = ReconNet(recon_cfg, x.bands, y.bands).init_params(root.derive(INIT_STREAM))

    truth = GroundTruth(
        z=load_cube(args.truth) if args.truth else None,
        k=BlurKernel(load_matrix(args.k_true)) if args.k_true else None,
        p=load_srf(args.p_true) if args.p_true else None,
    )
    k_init, p_init = default_inits(experiment.kernel_support, srf_base)

    result = run_alternating(
        x, y, s, None, theta_g, k_init, p_init, experiment.schedule(),
        mode=experiment.mode, recon_cfg=recon_cfg,
        estimation=EstimationConfig(eta=experiment.eta, xi=experiment.xi, inner_iters=experiment.inner_iters),
        truth=truth, z_hat=z_hat,
    )

    files = {
        'z': save_cube(result.z, out / 'z.hsic'),
        'k': save_matrix(result.k.weights, out / 'k.txt'),
        'p': save_matrix(result.p.weights, out / 'p.txt'),
        'trace': result.trace.to_csv(out / 'trace.csv'),
    }
    _write_summary(out, 'fuse', experiment, {
        'files': {name: str(path) for name, path in files.items()},
        'trace': result.trace.summary(),
    })
    return 0


def _ablation(args: argparse.Namespace, experiment: ExperimentConfig, settings_schedule=None):
    from .analysis import AblationAnalyzer, AblationSettings
    from .estimation import EstimationConfig

    root = Rng(experiment.seed)
    scenes = _scenes(args, experiment, root.derive(SCENE_STREAM))
    settings = AblationSettings(
        schedule=settings_schedule or experiment.schedule(),
        recon_cfg=_recon_cfg(experiment),
        estimation=EstimationConfig(eta=experiment.eta, xi=experiment.xi),
        regularizer=experiment.regularizer_spec(),
        workers=config.WORKERS,
    )
    return AblationAnalyzer(
        scenes, _degeneration(experiment, scenes[0].bands), settings,
        seed=experiment.seed,
        theta_f=_load_params(experiment.backbone_checkpoint),
        backbone_cfg=_backbone_cfg(experiment),
    )


def cmd_ablate(args: argparse.Namespace) -> int:
    experiment = _experiment(args)
    out = _output_dir(experiment)
    analyzer = _ablation(args, experiment)

    studies = ['manners', 'guidance', 'meta', 'noise', 'map'] if args.study == 'all' else [args.study]
    if args.study == 'all' and experiment.recon_checkpoint is None:
        logger.warning("No --recon-checkpoint, skipping the meta initialization study")
        studies.remove('meta')
    for study in studies:
        if study == 'manners':
            analyzer.optimization_manners(_load_params(experiment.recon_checkpoint))
        elif study == 'guidance':
            analyzer.guidance()
        elif study == 'meta':
            theta_meta = _load_params(experiment.recon_checkpoint)
            if theta_meta is None:
                raise ParameterError("the meta study needs --recon-checkpoint (a meta-pretrained network)")
            analyzer.meta_initialization(theta_meta)
        elif study == 'noise':
            analyzer.noise_levels()
        elif study == 'map':
            analyzer.map_baseline()

    paths = analyzer.save(out)
    logger.info(analyzer.generate_comparison_report())
    _write_summary(out, 'ablate', experiment, {
        'files': [str(p) for p in paths],
        'results': {name: df.to_dict(orient='records') for name, df in analyzer.results.items()},
    })
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    experiment = _experiment(args)
    out = _output_dir(experiment)
    analyzer = _ablation(args, experiment)
    splits = _parse_splits(args.splits)
    totals = {outer * inner for outer, inner in splits}
    if len(totals) > 1:
        logger.warning(f"Splits do not share one total budget: {sorted(totals)}")
    df = analyzer.budget_split(splits)
    paths = analyzer.save(out)
    _write_summary(out, 'sweep', experiment, {
        'files': [str(p) for p in paths],
        'results': df.to_dict(orient='records'),
    })
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    from .data import load_cube

    experiment = _experiment(args)
    out = _output_dir(experiment)
    report: MetricReport = evaluate(load_cube(args.reference), load_cube(args.estimate))
    path = out / 'metrics.csv'
    path.write_text(f"{MetricReport.csv_header()}\n{report.to_csv_row()}\n", encoding='utf-8')
    logger.info(f"RMSE {report.rmse:.4f}  PSNR {report.psnr:.2f} dB  SAM {report.sam:.2f}  SSIM {report.ssim:.4f}")
    _write_summary(out, 'evaluate', experiment, {'metrics': report.as_dict(), 'file': str(path)})
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    from .core import BlurKernel
    from .data import (
        export_error_map,
        export_kernel,
        export_pseudocolor,
        export_spectral_curves,
        export_srf,
        load_cube,
        load_matrix,
        load_srf,
    )

    experiment = _experiment(args)
    out = _output_dir(experiment)
    files: Dict[str, Any] = {}

    cube = load_cube(args.cube) if args.cube else None
    reference = load_cube(args.reference) if args.reference else None
    if cube is not None and args.bands:
        files['pseudocolor'] = export_pseudocolor(cube, tuple(args.bands), out / 'pseudocolor.ppm')
    if cube is not None and reference is not None:
        files['error_map'] = export_error_map(reference, cube, out / 'error_map.ppm', vmax=args.vmax)
        if args.pixels:
            files['spectra'] = export_spectral_curves(reference, cube, _parse_pixels(args.pixels), out / 'spectra.csv')
    if args.kernel:
        files['kernel'] = export_kernel(BlurKernel(load_matrix(args.kernel)), out / 'kernel.ppm')
    if args.srf:
        files['srf'] = export_srf(load_srf(args.srf), out / 'srf.ppm')
    if not files:
        raise ParameterError("nothing to export: give --cube with --bands, --reference, --kernel or --srf")

    _write_summary(out, 'export', experiment, {'files': {name: str(value) for name, value in files.items()}})
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common(parser: argparse.ArgumentParser):
    parser.add_argument('--config', help='key=value experiment file')
    parser.add_argument('--seed', type=int, help='root seed (overrides the config file)')
    parser.add_argument('--output', help=f'output directory (default {config.OUTPUT_DIR})')


def _scene_args(parser: argparse.ArgumentParser, scenes: int = 1):
    parser.add_argument('--input', dest='inputs', nargs='*', help='HR cube file(s); synthetic scenes if omitted')
    parser.add_argument('--scenes', type=int, default=scenes, help='number of synthetic scenes')
    parser.add_argument('--bands', type=int, default=16)
    parser.add_argument('--height', type=int, default=64)
    parser.add_argument('--width', type=int, default=64)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='hsifusion', description='Blind hyperspectral / multispectral fusion')
    parser.add_argument('--log-level', default=None, help=f'logging level (default {config.LOG_LEVEL})')
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('synth-scene', help='write a synthetic HR cube')
    _common(p)
    p.add_argument('--bands', type=int, default=16)
    p.add_argument('--height', type=int, default=64)
    p.add_argument('--width', type=int, default=64)
    p.add_argument('--materials', type=int, default=6)
    p.set_defaults(func=cmd_synth_scene)

    p = commands.add_parser('simulate', help='HR cube -> X, Y, k_true, P_true')
    _common(p)
    _scene_args(p)
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser('pretrain-backbone', help='train the fusion backbone on simulated patches')
    _common(p)
    _scene_args(p, scenes=2)
    p.add_argument('--patch', type=int, default=32)
    p.add_argument('--stride', type=int, default=16)
    p.add_argument('--epochs', type=int, default=20)
    p.add_argument('--lr', type=float, default=1e-4)
    p.add_argument('--batch-size', type=int, default=6)
    p.set_defaults(func=cmd_pretrain_backbone)

    p = commands.add_parser('meta-pretrain', help='MAML initialization of the reconstruction network')
    _common(p)
    _scene_args(p, scenes=2)
    p.add_argument('--backbone-checkpoint', dest='backbone_checkpoint', help='backbone weights for Z_hat')
    p.add_argument('--tasks', type=int, default=8)
    p.add_argument('--epochs', type=int, default=100)
    p.add_argument('--alpha', type=float, default=1e-3)
    p.add_argument('--outer-lr', type=float, default=1e-3)
    p.add_argument('--tasks-per-batch', type=int, default=4)
    p.add_argument('--objective', choices=('supervised', 'fidelity'), default='supervised')
    p.add_argument('--multitask', action='store_true', help='plain multi-task training instead of MAML')
    p.set_defaults(func=cmd_meta_pretrain)

    p = commands.add_parser('fuse', help='blind fusion of an LR HSI and an HR MSI')
    _common(p)
    p.add_argument('--x', required=True, help='LR HSI cube')
    p.add_argument('--y', required=True, help='HR MSI cube')
    p.add_argument('--mode', choices=('separate', 'joint', 'alternating'))
    p.add_argument('--backbone-checkpoint', dest='backbone_checkpoint')
    p.add_argument('--recon-checkpoint', dest='recon_checkpoint')
    p.add_argument('--truth', help='reference HR cube for the trace metrics')
    p.add_argument('--k-true', dest='k_true', help='reference kernel (text matrix)')
    p.add_argument('--p-true', dest='p_true', help='reference SRF (text matrix)')
    p.set_defaults(func=cmd_fuse)

    p = commands.add_parser('ablate', help='compare fusion variants on simulated scenes (one CSV per study)')
    _common(p)
    _scene_args(p, scenes=3)
    p.add_argument('--study', choices=('manners', 'guidance', 'meta', 'noise', 'map', 'all'), default='manners')
    p.add_argument('--backbone-checkpoint', dest='backbone_checkpoint')
    p.add_argument('--recon-checkpoint', dest='recon_checkpoint')
    p.set_defaults(func=cmd_ablate)

    p = commands.add_parser('sweep', help='split a fixed budget between outer and inner iterations')
    _common(p)
    _scene_args(p)
    p.add_argument('--splits', nargs='+', default=['40x10', '20x20', '10x40', '100x4'])
    p.add_argument('--backbone-checkpoint', dest='backbone_checkpoint')
    p.set_defaults(func=cmd_sweep)

    p = commands.add_parser('evaluate', help='RMSE / PSNR / SAM / SSIM between two cubes')
    _common(p)
    p.add_argument('--reference', required=True)
    p.add_argument('--estimate', required=True)
    p.set_defaults(func=cmd_evaluate)

    p = commands.add_parser('export', help='PPM figures, text matrices and spectral curves')
    _common(p)
    p.add_argument('--cube', help='cube to render')
    p.add_argument('--bands', type=int, nargs=3, metavar=('R', 'G', 'B'), help='pseudocolor band triplet')
    p.add_argument('--reference', help='reference cube for the error map and spectra')
    p.add_argument('--vmax', type=float, default=0.1, help='error at the top of the color scale')
    p.add_argument('--pixels', nargs='*', help="'row,col' pixels for spectral curves")
    p.add_argument('--kernel', help='kernel text matrix')
    p.add_argument('--srf', help='SRF text matrix')
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or config.LOG_LEVEL).upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        return args.func(args)
    except (FusionException, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
