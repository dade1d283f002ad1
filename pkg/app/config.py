"""Configuration management for the slab Boussinesq toolkit."""

from typing import Optional
from pydantic import BaseSettings, Field


class Settings(BaseSettings):
    """Process settings loaded from environment variables."""

    # Logging Configuration
    debug: bool = Field(default=False, env="DEBUG")
    log_level: str = Field(default="INFO", env="LOG_LEVEL")
    log_format: str = Field(default="json", env="LOG_FORMAT")

    # Output Configuration
    output_dir: str = Field(default="runs", env="OUTPUT_DIR")
    default_config: Optional[str] = Field(default=None, env="DEFAULT_CONFIG")

    # Numerical Defaults
    default_seed: int = Field(default=0, env="DEFAULT_SEED")
    monitor_order_cap: int = Field(default=8, env="MONITOR_ORDER_CAP")
    fft_workers: int = Field(default=1, env="FFT_WORKERS")

    class Config:
        env_file = ".env"
        case_sensitive = False


# Global settings instance
settings = Settings()
