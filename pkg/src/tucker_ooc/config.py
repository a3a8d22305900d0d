"""Configuration settings for the Tucker toolkit."""

from pydantic_settings import BaseSettings
from pydantic import field_validator

MIB = 1024 * 1024
MIN_SORT_BUFFER_BYTES = MIB


class Settings(BaseSettings):
    """Configuration settings."""

    # Out-of-core pipeline
    SORT_BUFFER_BYTES: int = 256 * MIB
    SLAB_TARGET_BYTES: int = 64 * MIB
    WORK_DIR: str = ".tucker_ooc"

    # Convergence
    FIT_THRESHOLD: float = 1e-4
    CORE_GROWTH_THRESHOLD: float = 1e-4
    MAX_ITERATIONS: int = 50

    # Numerics
    SQUARE_GRAM: bool = False
    GRAM_WORKERS: int = 1

    # Tracked-memory cap in bytes, 0 disables it
    MEMORY_CAP_BYTES: int = 0

    # Server settings
    HOST: str = "0.0.0.0"
    PORT: int = 3846
    DEBUG: bool = False

    @field_validator("SORT_BUFFER_BYTES")
    def validate_sort_buffer(cls, v: int) -> int:
        """Reject sort buffers below the documented minimum."""
        if v < MIN_SORT_BUFFER_BYTES:
            raise ValueError(f"SORT_BUFFER_BYTES must be at least {MIN_SORT_BUFFER_BYTES}")
        return v

    @field_validator("FIT_THRESHOLD", "CORE_GROWTH_THRESHOLD")
    def validate_threshold(cls, v: float) -> float:
        """Thresholds must be strictly positive."""
        if v <= 0:
            raise ValueError("convergence thresholds must be > 0")
        return v

    @field_validator("MAX_ITERATIONS", "GRAM_WORKERS", "SLAB_TARGET_BYTES")
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("value must be >= 1")
        return v

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "case_sensitive": True,
        "extra": "ignore",
    }


settings = Settings()
