from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit configuration sourced from env vars with sensible defaults."""

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8")

    app_name: str = Field("Infinite-past games toolkit", validation_alias="APP_NAME")
    log_level: str = Field("info", validation_alias="LOG_LEVEL")
    check_depth: int = Field(8, ge=0, validation_alias="CHECK_DEPTH")
    iteration_cap: int = Field(512, ge=4, validation_alias="ITERATION_CAP")
    w_search_cap: int = Field(256, ge=1, validation_alias="W_SEARCH_CAP")
    deviation_memory: int = Field(1, ge=0, le=2, validation_alias="DEVIATION_MEMORY")
    deviation_window: int = Field(2, ge=1, validation_alias="DEVIATION_WINDOW")
    workers: int = Field(1, ge=1, validation_alias="WORKERS")
    report_version: str = Field("1", validation_alias="REPORT_VERSION")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
