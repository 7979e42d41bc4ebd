"""Configuration management using Pydantic Settings"""

from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process settings loaded from STNLAB_* environment variables"""

    # Data: STNLAB_DATA is the default directory holding the MNIST IDX files
    data: Optional[Path] = None

    # Logging
    log_level: str = "INFO"
    log_format: str = "json"  # json or text

    # Compare fan-out (independent training cells run in worker threads)
    workers: int = 1

    # Evaluation / analysis forward batch size
    batch_size_eval: int = 256

    model_config = SettingsConfigDict(
        env_prefix="STNLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()
