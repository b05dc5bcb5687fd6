"""Delay-induced oscillations in two coupled Wilson-Cowan pairs.

Typical use::

    from coupledwc import preset, equilibrium, physical_critical_delays
    net = preset("wang-baseline")
    physical_critical_delays(net).first_T_ms   # ~3.949 ms
"""
from .equilibrium import Equilibrium, SolverOpts, alpha_beta, coefficients, equilibrium, find_equilibria
from .exceptions import ConfigError, NumericalError
from .model import Kernel, KernelKind, NetworkSpec, Scheme, load_config, make_network, preset, save_config
from .simulate import classify_longterm, convolution_oracle, simulate_dirac, simulate_weak_gamma
from .spectrum import Band, band_classify, dominant_frequency, onset_frequency
from .stability import (
    classify_region,
    critical_delays,
    dirac_critical_delays,
    gamma_critical_window,
    gamma_zone_classify,
    physical_critical_delays,
    stable_at_delay,
)
from .sweep import SweepAxis, SweepConfig, export_grid, run_sweep

__version__ = "0.1.0"
