"""Radar-inertial odometry with online IMU-radar time-offset estimation."""

from .config import RunConfig
from .estimator import RadarInertialFilter
from .pipeline import evaluate, montecarlo, run_filter, run_trial
from .simulator import Trajectory, simulate

__version__ = "0.1.0"

__all__ = [
    "RadarInertialFilter",
    "RunConfig",
    "Trajectory",
    "evaluate",
    "montecarlo",
    "run_filter",
    "run_trial",
    "simulate",
]
