"""
Ablation Studies
================

Runs the blind fusion pipeline on the same simulated scenes while changing
one ingredient at a time:

- optimization manner (separate / joint / alternating)
- kernel and SRF guidance in the reconstruction network
- meta-learned vs random initialization of theta_g
- split of a fixed iteration budget between outer and inner iterations
- observation noise level
- two-step MAP baseline (estimate k and P from the rough estimate, then
  reconstruct in pixel space)

Every study averages the final metrics over the scenes and returns a
DataFrame, also kept in `self.results` under the study name.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..autodiff import NetworkParams
from ..core import BlurKernel, HsiCube, Rng, SrfMatrix, bicubic_upsample
from ..degeneration import DegenerationConfig, simulate_pair
from ..driver.alternating import default_inits, run_alternating
from ..driver.schedule import Mode, Schedule
from ..driver.trace import GroundTruth
from ..estimation import EstimationConfig, estimate_kernel_step, estimate_srf_step
from ..exceptions import ParameterError
from ..metrics import MetricReport, evaluate
from ..reconstruction.backbone import BackboneConfig, backbone_forward
from ..reconstruction.map import Regularizer, map_reconstruct
from ..reconstruction.recon_net import ReconNet, ReconNetConfig

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ['RMSE', 'PSNR', 'SAM', 'SSIM']
MANNER_LABELS = {
    Mode.SEPARATE: 'Separate',
    Mode.JOINT: 'Joint',
    Mode.ALTERNATING: 'Alternating',
}
NOISE_LEVELS = (30.0, 35.0, 40.0)
BUDGET_SPLITS = ((40, 10), (20, 20), (10, 40), (100, 4))


class FusionProblem(NamedTuple):
    """One simulated scene, ready for blind fusion"""
    x: HsiCube
    y: HsiCube
    scale: int
    z_hat: HsiCube
    truth: GroundTruth


def prepare_problem(
    z: HsiCube,
    degeneration: DegenerationConfig,
    rng: Rng,
    theta_f: Optional[NetworkParams] = None,
    backbone_cfg: Optional[BackboneConfig] = None,
) -> FusionProblem:
    x, y, k_true, p_true = simulate_pair(z, degeneration, rng)
    if theta_f is not None:
        z_hat = backbone_forward(x, y, theta_f, backbone_cfg)
    else:
        z_hat = bicubic_upsample(x, degeneration.scale)
    return FusionProblem(x, y, degeneration.scale, z_hat, GroundTruth(z, k_true, p_true))


def _mean_report(reports: Sequence[MetricReport]) -> Dict[str, float]:
    return {
        'RMSE': float(np.mean([r.rmse for r in reports])),
        'PSNR': float(np.mean([r.psnr for r in reports])),
        'SAM': float(np.mean([r.sam for r in reports])),
        'SSIM': float(np.mean([r.ssim for r in reports])),
    }


@dataclass
class AblationSettings:
    schedule: Schedule = field(default_factory=Schedule)
    recon_cfg: ReconNetConfig = field(default_factory=ReconNetConfig)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    regularizer: Regularizer = field(default_factory=Regularizer)
    map_iters: int = 100
    workers: int = 1


class AblationAnalyzer:
    """
    Compare variants of the blind fusion pipeline on shared scenes

    Scenes are simulated once per noise level with rng streams derived from
    the root seed, so every variant sees identical observations.
    """

    def __init__(
        self,
        scenes: Sequence[HsiCube],
        degeneration: DegenerationConfig,
        settings: Optional[AblationSettings] = None,
        seed: int = 0,
        theta_f: Optional[NetworkParams] = None,
        backbone_cfg: Optional[BackboneConfig] = None,
    ):
        if not scenes:
            raise ParameterError("ablation needs at least one scene")
        self.scenes = list(scenes)
        self.degeneration = degeneration
        self.settings = settings or AblationSettings()
        self.rng = Rng(seed)
        self.theta_f = theta_f
        self.backbone_cfg = backbone_cfg
        self.results: Dict[str, pd.DataFrame] = {}
        self._problems: Dict[Tuple[float, float], List[FusionProblem]] = {}

    @property
    def bands(self) -> int:
        return self.scenes[0].bands

    @property
    def msi_bands(self) -> int:
        return self.degeneration.srf_base.out_bands

    def problems(self, degeneration: Optional[DegenerationConfig] = None) -> List[FusionProblem]:
        degeneration = degeneration or self.degeneration
        key = (degeneration.snr_hsi_db, degeneration.snr_msi_db)
        if key not in self._problems:
            self._problems[key] = [
                prepare_problem(z, degeneration, self.rng.derive(i), self.theta_f, self.backbone_cfg)
                for i, z in enumerate(self.scenes)
            ]
        return self._problems[key]

    def random_init(self, recon_cfg: Optional[ReconNetConfig] = None) -> NetworkParams:
        """theta_g drawn from a fixed child stream; identical for every variant with the same config"""
        recon_cfg = recon_cfg or self.settings.recon_cfg
        return ReconNet(recon_cfg, self.bands, self.msi_bands).init_params(self.rng.derive(10_000))

    def _inits(self, recon_cfg: ReconNetConfig) -> Tuple[BlurKernel, SrfMatrix]:
        return default_inits(recon_cfg.kernel_support, self.degeneration.srf_base)

    def _run(
        self,
        problems: Sequence[FusionProblem],
        mode: Mode,
        theta_g: Optional[NetworkParams] = None,
        recon_cfg: Optional[ReconNetConfig] = None,
        schedule: Optional[Schedule] = None,
    ) -> Dict[str, float]:
        recon_cfg = recon_cfg or self.settings.recon_cfg
        schedule = schedule or self.settings.schedule
        theta_g = theta_g if theta_g is not None else self.random_init(recon_cfg)
        k_init, p_init = self._inits(recon_cfg)

        reports = []
        for problem in problems:
            result = run_alternating(
                problem.x, problem.y, problem.scale, None, theta_g, k_init, p_init, schedule,
                mode=mode, recon_cfg=recon_cfg, estimation=self.settings.estimation,
                truth=problem.truth, z_hat=problem.z_hat,
            )
            reports.append(result.trace.records[-1].metrics)
        return _mean_report(reports)

    def optimization_manners(self, theta_g: Optional[NetworkParams] = None) -> pd.DataFrame:
        """Separate vs joint vs alternating; columns exactly Method, RMSE, PSNR, SAM, SSIM"""
        problems = self.problems()
        modes = list(MANNER_LABELS)
        if self.settings.workers > 1:
            with ThreadPoolExecutor(max_workers=self.settings.workers) as pool:
                scores = list(pool.map(lambda mode: self._run(problems, mode, theta_g), modes))
        else:
            scores = [self._run(problems, mode, theta_g) for mode in modes]

        rows = [{'Method': MANNER_LABELS[mode], **score} for mode, score in zip(modes, scores)]
        df = pd.DataFrame(rows, columns=['Method'] + METRIC_COLUMNS)
        self.results['optimization_manners'] = df
        logger.info("✓ Optimization manner study complete")
        return df

    def guidance(self) -> pd.DataFrame:
        """Reconstruction network with and without the kernel / SRF guidance branches"""
        problems = self.problems()
        rows = []
        for label, enabled in (('Basic', False), ('Guided', True)):
            recon_cfg = replace(self.settings.recon_cfg, guidance=enabled)
            score = self._run(problems, Mode.ALTERNATING, recon_cfg=recon_cfg)
            rows.append({'Method': label, **score})
        df = pd.DataFrame(rows, columns=['Method'] + METRIC_COLUMNS)
        self.results['guidance'] = df
        return df

    def meta_initialization(self, theta_meta: NetworkParams) -> pd.DataFrame:
        """Random vs meta-learned theta_g; theta_meta must match settings.recon_cfg"""
        problems = self.problems()
        rows = [
            {'Method': 'Random init', **self._run(problems, Mode.ALTERNATING)},
            {'Method': 'Meta init', **self._run(problems, Mode.ALTERNATING, theta_g=theta_meta)},
        ]
        df = pd.DataFrame(rows, columns=['Method'] + METRIC_COLUMNS)
        self.results['meta_initialization'] = df
        return df

    def budget_split(self, splits: Sequence[Tuple[int, int]] = BUDGET_SPLITS) -> pd.DataFrame:
        """Alternating mode under different (outer, inner) splits"""
        problems = self.problems()
        rows = []
        for outer, inner in splits:
            schedule = replace(self.settings.schedule, outer_iters=outer, inner_iters=inner)
            score = self._run(problems, Mode.ALTERNATING, schedule=schedule)
            rows.append({'I_out': outer, 'I_in': inner, 'Budget': outer * inner, **score})
        df = pd.DataFrame(rows, columns=['I_out', 'I_in', 'Budget'] + METRIC_COLUMNS)
        self.results['budget_split'] = df
        return df

    def noise_levels(self, levels: Sequence[float] = NOISE_LEVELS) -> pd.DataFrame:
        """Alternating mode with both observations at each SNR"""
        rows = []
        for snr in levels:
            degeneration = replace(self.degeneration, snr_hsi_db=snr, snr_msi_db=snr)
            score = self._run(self.problems(degeneration), Mode.ALTERNATING)
            rows.append({'SNR': snr, **score})
        df = pd.DataFrame(rows, columns=['SNR'] + METRIC_COLUMNS)
        self.results['noise_levels'] = df
        return df

    def map_baseline(self) -> pd.DataFrame:
        """
        Pixel-space MAP reconstructions next to the bicubic starting point

        'Two-step MAP' estimates k and P once from the rough estimate and then
        solves the MAP problem with them; 'MAP (true k, P)' is the non-blind bound.
        """
        settings = self.settings
        k_init, p_init = self._inits(settings.recon_cfg)
        rows: Dict[str, List[MetricReport]] = {'Bicubic': [], 'Two-step MAP': [], 'MAP (true k, P)': []}
        for problem in self.problems():
            x, y, s, z_hat, truth = problem
            k = estimate_kernel_step(x, z_hat, s, k_init, settings.estimation)
            p = estimate_srf_step(y, z_hat, p_init, settings.estimation)
            rows['Bicubic'].append(evaluate(truth.z, bicubic_upsample(x, s)))
            rows['Two-step MAP'].append(
                evaluate(truth.z, map_reconstruct(x, y, k, p, s, settings.regularizer, settings.map_iters))
            )
            rows['MAP (true k, P)'].append(
                evaluate(truth.z, map_reconstruct(x, y, truth.k, truth.p, s, settings.regularizer, settings.map_iters))
            )

        df = pd.DataFrame(
            [{'Method': label, **_mean_report(reports)} for label, reports in rows.items()],
            columns=['Method'] + METRIC_COLUMNS,
        )
        self.results['map_baseline'] = df
        return df

    def generate_comparison_report(self) -> str:
        """Plain-text side-by-side view of every study run so far"""
        report = ""
        for name, df in self.results.items():
            report += f"\n{'=' * 70}\n"
            report += f"STUDY: {name.replace('_', ' ').title()}\n"
            report += f"{'=' * 70}\n\n"
            report += df.to_string(index=False, float_format=lambda v: f"{v:.4f}")
            report += "\n\n"
            if 'PSNR' in df.columns and len(df) > 1:
                report += f"PSNR spread: {df['PSNR'].max() - df['PSNR'].min():.2f} dB\n"
        return report

    def save(self, directory) -> List[Path]:
        """One CSV per study"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, df in self.results.items():
            path = directory / f"{name}.csv"
            df.to_csv(path, index=False, float_format='%.4f', lineterminator='\n')
            paths.append(path)
        return paths
