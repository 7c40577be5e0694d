from typing import Any, TypeVar

from pydantic import BaseModel, ValidationError

from .errors import ConfigurationError

ModelT = TypeVar('ModelT', bound=BaseModel)


def build_config(model_cls: type[ModelT], data: dict[str, Any] | None = None, **overrides: Any) -> ModelT:
    """Validates ``data`` into ``model_cls``; pydantic failures surface as ConfigurationError."""
    payload = {**(data or {}), **overrides}
    try:
        return model_cls.model_validate(payload)
    except ValidationError as e:
        raise ConfigurationError(f'Invalid {model_cls.__name__}: {e}') from e
