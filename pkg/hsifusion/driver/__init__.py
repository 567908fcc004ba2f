"""
Orchestration: blind fusion modes, run traces and meta pre-training
"""

from .alternating import FusionResult, default_inits, run_alternating
from .meta import (
    CropBox,
    MetaConfig,
    MetaResult,
    MetaTask,
    make_meta_tasks,
    maml_pretrain,
    multitask_pretrain,
    split_support_query,
)
from .schedule import Mode, Schedule
from .trace import GroundTruth, RunTrace, TraceRecord, kernel_error, srf_error

__all__ = [
    'Mode', 'Schedule', 'RunTrace', 'TraceRecord', 'GroundTruth', 'kernel_error', 'srf_error',
    'FusionResult', 'default_inits', 'run_alternating',
    'MetaConfig', 'MetaTask', 'MetaResult', 'CropBox', 'make_meta_tasks', 'maml_pretrain',
    'multitask_pretrain', 'split_support_query',
]
