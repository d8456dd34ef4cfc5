"""
Simulation and verification toolkit for moderate deviations of covariance
estimators in near-unit-root AR(1) models.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version('unitrootmdp')
except PackageNotFoundError:
    __version__ = '0.0.0'

from .ar1 import simulate, simulate_many
from .blocking import check_abcd, choose_p, decompose, maximal_bound, truncate
from .config import ExperimentConfig, configure, load_config
from .estimators import empirical_covariance, ls_estimate, theoretical_covariance, yw_estimate
from .exceptions import UnitRootMDPError
from .mdpcore import RateFunction, Schedule, make_schedule, make_schedule_from_points
from .models import NoiseModel, SamplePath, SchedulePoint, StatisticKind, UWindow
from .montecarlo import MonteCarloEngine
from .noise import verify_integrability
from .umoments import EnumerationOracle, verification_sweep

__all__ = [
    'simulate',
    'simulate_many',
    'check_abcd',
    'choose_p',
    'decompose',
    'maximal_bound',
    'truncate',
    'ExperimentConfig',
    'configure',
    'load_config',
    'empirical_covariance',
    'ls_estimate',
    'theoretical_covariance',
    'yw_estimate',
    'UnitRootMDPError',
    'RateFunction',
    'Schedule',
    'make_schedule',
    'make_schedule_from_points',
    'NoiseModel',
    'SamplePath',
    'SchedulePoint',
    'StatisticKind',
    'UWindow',
    'MonteCarloEngine',
    'verify_integrability',
    'EnumerationOracle',
    'verification_sweep',
]
