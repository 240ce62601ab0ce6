"""Occupation-measure mean-field control solved by Frank-Wolfe over trajectory mixtures."""
from .scenario import ScenarioConfig, load_scenario
from .solver import RunResult, fcfw_run, fw_run, run

__all__ = ["ScenarioConfig", "load_scenario", "RunResult", "fcfw_run", "fw_run", "run"]
__version__ = "0.1.0"
