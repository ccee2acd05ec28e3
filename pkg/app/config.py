from pydantic import BaseModel, ConfigDict, ValidationError

from app.exceptions import ConfigurationError


class FrozenConfig(BaseModel):
    """Base of the numerical configuration models."""
    model_config = ConfigDict(frozen=True, extra='forbid')

    @classmethod
    def create(cls, **values):
        """Validate values, raising ConfigurationError instead of ValidationError."""
        try:
            return cls(**values)
        except ValidationError as e:
            fields = ', '.join(
                '.'.join(str(p) for p in error['loc']) for error in e.errors())
            raise ConfigurationError(
                f"Invalid {cls.__name__} ({fields}): {e}") from e

    def updated(self, **overrides):
        """Copy with some fields replaced and validated. None values are ignored."""
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return type(self).create(**values)
