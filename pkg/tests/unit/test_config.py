"""Unit tests for settings, logging and telemetry setup."""

import json
import logging

import pytest
from pydantic import ValidationError
from pytest_mock import MockerFixture
from pythonjsonlogger.json import JsonFormatter

from pgxselect.config import Settings, get_settings
from pgxselect.logging_config import setup_logging
from pgxselect.telemetry import setup_telemetry


class TestSettings:
    """Tests for Settings and get_settings."""

    def test_defaults(self) -> None:
        settings = get_settings()
        assert settings.log_level == "info"
        assert settings.strict_rhat_threshold == 1.1
        assert not settings.otel_enable_tracing

    def test_environment_overrides(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv("JOBS", "3")
        monkeypatch.setenv("STRICT_RHAT_THRESHOLD", "1.05")
        settings = get_settings()
        assert settings.jobs == 3
        assert settings.effective_jobs == 3
        assert settings.strict_rhat_threshold == 1.05

    def test_settings_are_cached(self) -> None:
        assert get_settings() is get_settings()

    def test_jobs_must_be_positive(self) -> None:
        with pytest.raises(ValidationError):
            Settings(jobs=0)

    def test_jobs_default_to_physical_cores(self, mocker: MockerFixture) -> None:
        mocker.patch("pgxselect.config.psutil.cpu_count", return_value=6)
        assert Settings().effective_jobs == 6

    def test_unknown_core_count_falls_back_to_one(
        self, mocker: MockerFixture
    ) -> None:
        mocker.patch("pgxselect.config.psutil.cpu_count", return_value=None)
        assert Settings().effective_jobs == 1


@pytest.mark.usefixtures("restore_root_logger")
class TestSetupLogging:
    """Tests for setup_logging."""

    def test_single_json_handler(self) -> None:
        setup_logging()
        handlers = logging.getLogger().handlers
        assert len(handlers) == 1
        assert isinstance(handlers[0].formatter, JsonFormatter)

    def test_level_override(self) -> None:
        setup_logging("debug")
        assert logging.getLogger().level == logging.DEBUG

    def test_records_are_json_with_utc_timestamps(
        self, capsys: pytest.CaptureFixture[str]
    ) -> None:
        setup_logging("info")
        logging.getLogger("pgxselect.test").info(
            "Fit complete", extra={"prior": "r2d2"}
        )
        last = capsys.readouterr().err.strip().splitlines()[-1]
        record = json.loads(last)
        assert record["message"] == "Fit complete"
        assert record["prior"] == "r2d2"
        assert record["levelname"] == "INFO"
        assert record["asctime"].endswith("Z")


class TestSetupTelemetry:
    """Tests for setup_telemetry."""

    def test_disabled_by_default(self, mocker: MockerFixture) -> None:
        set_tracer = mocker.patch("pgxselect.telemetry.trace.set_tracer_provider")
        set_meter = mocker.patch("pgxselect.telemetry.metrics.set_meter_provider")
        setup_telemetry(Settings())
        set_tracer.assert_not_called()
        set_meter.assert_not_called()

    def test_tracing_uses_the_configured_endpoint(self, mocker: MockerFixture) -> None:
        exporter = mocker.patch("pgxselect.telemetry.OTLPSpanExporter")
        mocker.patch("pgxselect.telemetry.BatchSpanProcessor")
        set_tracer = mocker.patch("pgxselect.telemetry.trace.set_tracer_provider")
        settings = Settings(
            otel_enable_tracing=True, otel_exporter_otlp_endpoint="collector:4317"
        )
        setup_telemetry(settings)
        exporter.assert_called_once_with(endpoint="collector:4317", insecure=True)
        set_tracer.assert_called_once()
