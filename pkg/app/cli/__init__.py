from .experiment import ExperimentConfig, load_experiment_config, write_experiment_config
from .main import build_parser, main
from .profiles import PROFILES, Profile

__all__ = [
    'ExperimentConfig',
    'load_experiment_config',
    'write_experiment_config',
    'build_parser',
    'main',
    'PROFILES',
    'Profile',
]
