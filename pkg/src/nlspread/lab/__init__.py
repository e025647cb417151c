"""Experiment orchestration, configuration, file output and the command line."""

from .config import LabConfig, parse_config
from .experiments import (
    RunSummary,
    acceleration_check,
    dichotomy_scan,
    measure_speeds,
    mu_tilde_formula,
    vanishing_mu_bound,
)
from .io import write_outputs

__all__ = [
    "LabConfig",
    "RunSummary",
    "acceleration_check",
    "dichotomy_scan",
    "measure_speeds",
    "mu_tilde_formula",
    "parse_config",
    "vanishing_mu_bound",
    "write_outputs",
]
