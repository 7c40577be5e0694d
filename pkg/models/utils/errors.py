class ConfigurationError(ValueError):
    """Shapes, hyper-parameters or config keys that cannot describe a valid run."""


class DataError(ValueError):
    """Inputs on disk or in memory that violate the dataset / file-format contracts."""
