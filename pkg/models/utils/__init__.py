from .errors import ConfigurationError, DataError
from .validation import build_config

__all__ = ['ConfigurationError', 'DataError', 'build_config']
