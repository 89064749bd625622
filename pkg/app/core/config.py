# app/core/config.py - Process-wide settings (environment / .env driven)

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Numerics
    DTYPE: str = "float64"           # "float32" is the single-precision build option
    CHECK_FINITE: bool = False       # raise on NaN/Inf in graph values

    # Harness defaults
    OUTPUT_DIR: str = "runs"
    WORKERS: int = 1
    DEFAULT_SEED: int = 0
    EVAL_BATCH_SIZE: int = 1024

    # Logging
    LOG_LEVEL: str = "INFO"

    # Artifact formats
    CHECKPOINT_MAGIC: str = "SOFTORDER-CKPT"
    CHECKPOINT_VERSION: int = 1
    SUMMARY_SCHEMA_VERSION: int = 1

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="SOFTORDER_",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()
