"""Configuration-driven experiment runner and exporters."""

from .config import CaseConfig, load_config, loads_config, parse_config
from .runner import (CaseResult, SuiteResult, build_mesh, build_model, export_outputs, resolve_bcs,
                     run_case, run_convergence_suite)

__all__ = ["CaseConfig", "CaseResult", "SuiteResult", "build_mesh", "build_model", "export_outputs",
           "load_config", "loads_config", "parse_config", "resolve_bcs", "run_case",
           "run_convergence_suite"]
