# tests/test_core/test_monitoring.py

import logging
import warnings

import pytest
from pydantic.warnings import PydanticDeprecatedSince20

from app.core.config import Settings
from app.core.monitoring import TrainingMonitor
from app.schemas.experiment import ExperimentConfig


def test_nonfinite_loss_is_logged_by_module_logger(caplog):
    monitor = TrainingMonitor("glyphs-trial0")
    with caplog.at_level(logging.WARNING, logger="app.core.monitoring"):
        monitor.record_step(1.0, 0.5)
        monitor.record_step(1.0, float("nan"))
    records = [r for r in caplog.records if r.name == "app.core.monitoring"]
    assert len(records) == 1
    assert "glyphs-trial0" in records[0].getMessage()
    assert monitor.get_status()["status"] == "UNSTABLE"
    assert monitor.get_status()["nonfinite_losses"] == 1


def test_status_moves_from_ok_to_failed(caplog):
    monitor = TrainingMonitor()
    monitor.record_step(2.0, 0.1)
    monitor.record_evaluation()
    status = monitor.get_status()
    assert status["status"] == "OK"
    assert status["steps_total"] == 1
    assert status["evaluations"] == 1

    with caplog.at_level(logging.ERROR, logger="app.core.monitoring"):
        monitor.record_error("loss became inf", iteration=7)
    assert monitor.get_status()["status"] == "FAILED"
    assert monitor.get_status()["last_error"]["iteration"] == 7
    assert any(r.name == "app.core.monitoring" for r in caplog.records)


@pytest.mark.parametrize("schema", [ExperimentConfig, Settings])
def test_schemas_use_model_config(schema):
    assert "Config" not in vars(schema)
    assert isinstance(schema.model_config, dict)


def test_schemas_build_without_deprecation_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error", PydanticDeprecatedSince20)
        config = ExperimentConfig.model_validate({"kind": "glyphs", "name": "g"})
        Settings()
    assert config.model_config["extra"] == "forbid"
    assert Settings.model_config["env_prefix"] == "SOFTORDER_"
