"""
Comparative studies over the blind fusion pipeline
"""

from .ablation import AblationAnalyzer, AblationSettings, FusionProblem, prepare_problem

__all__ = ['AblationAnalyzer', 'AblationSettings', 'FusionProblem', 'prepare_problem']
