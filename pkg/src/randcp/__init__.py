"""Likelihood-ratio change-point detection for exponential-family series."""

from __future__ import annotations

__version__ = "0.1.0"

from randcp.asymptotics import (
    gumbel_critical_value,
    gumbel_norming,
    gumbel_pvalue,
    sample_argmax_what,
    sup_bridge_critical_value,
)
from randcp.core import DetectionReport, detect, max_statistic, prefix_stats, sn_path
from randcp.errors import DegenerateMomentError, DegenerateSeriesError, InvalidInputError, RandcpError
from randcp.experiments import ExperimentSpec, Pipeline, run_experiment
from randcp.expfam import ExpFamilyModel
from randcp.mc import EmpiricalDist, MonteCarloConfig
from randcp.nonparam import NonparamReport, nonparam_test
from randcp.simgen import ItoConfig, LocationLaw, SimConfig, gen_amoc_normal, gen_ito_path

__all__ = [
    "DegenerateMomentError",
    "DegenerateSeriesError",
    "DetectionReport",
    "EmpiricalDist",
    "ExpFamilyModel",
    "ExperimentSpec",
    "InvalidInputError",
    "ItoConfig",
    "LocationLaw",
    "MonteCarloConfig",
    "NonparamReport",
    "Pipeline",
    "RandcpError",
    "SimConfig",
    "__version__",
    "detect",
    "gen_amoc_normal",
    "gen_ito_path",
    "gumbel_critical_value",
    "gumbel_norming",
    "gumbel_pvalue",
    "max_statistic",
    "nonparam_test",
    "prefix_stats",
    "sample_argmax_what",
    "sn_path",
    "sup_bridge_critical_value",
]
