"""Multi-site SISO FMCW radar simulation, positioning and tracking."""

__version__ = "0.1.0"

from .config import load_config, parse_config
from .geometry import RoomBounds, synthesize_velocity_lstsq, synthesize_velocity_thales, trilaterate
from .montecarlo import ExperimentConfig, ScenarioConfig, SweepAxis, run_sweep, run_trial
from .scenario import TrajectorySpec, WaveformParams, default_radars, make_trajectory
from .signal import NoiseModel, measurement_channel
from .tracking import EkfTuning, VsaParams, track_ekf_baseline, track_trilateration, track_vsa, vsa_estimate
