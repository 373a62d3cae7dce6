"""Linear and quadratic panel statistics under weak factor structure.

Simulation, plug-in variance, asymptotic-t and wild-bootstrap inference,
two-step estimators and the Monte Carlo studies built on them.
"""

from .dgp import (
    FactorPanel,
    PanelData,
    SimConfig,
    TheoreticalMoments,
    independence_diagnostics,
    simulate_panel,
    theoretical_targets,
    tune_c_omega,
)
from .errors import (
    ArgumentError,
    ConfigError,
    DegenerateRegressorError,
    DegenerateVarianceError,
    ExperimentError,
    FactorCLTError,
)
from .experiments import ExperimentConfig, run_distribution_study, run_size_power_study, variance_check
from .inference import run_bootstrap, test_asymptotic, test_bootstrap
from .stats import variance_estimate, xi_sample

__version__ = "0.1.0"
