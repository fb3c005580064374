"""Runtime configuration using Pydantic Settings."""

from functools import lru_cache

import psutil
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Runtime Configuration
    app_env: str = Field(default="development", description="Runtime environment")
    log_level: str = Field(default="info", description="Logging level")
    jobs: int | None = Field(
        default=None,
        ge=1,
        description="Worker processes for chains, replicates and prior draws",
    )
    strict_rhat_threshold: float = Field(
        default=1.1, gt=1.0, description="Split R-hat limit enforced by fit --strict"
    )

    # OpenTelemetry Configuration
    otel_service_name: str = Field(
        default="pgx-select", description="OpenTelemetry service name"
    )
    otel_service_version: str = Field(
        default="1.0.0", description="OpenTelemetry service version"
    )
    otel_environment: str = Field(
        default="development", description="OpenTelemetry environment"
    )
    otel_exporter_otlp_endpoint: str = Field(
        default="localhost:4317", description="OTLP exporter endpoint"
    )
    otel_enable_tracing: bool = Field(
        default=False, description="Enable OpenTelemetry tracing"
    )
    otel_enable_metrics: bool = Field(
        default=False, description="Enable OpenTelemetry metrics"
    )
    otel_enable_logging: bool = Field(
        default=False, description="Enable OpenTelemetry logging"
    )

    @property
    def effective_jobs(self) -> int:
        """Get the worker count, defaulting to the physical core count."""
        if self.jobs is not None:
            return self.jobs
        cores = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
        return int(cores)


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
