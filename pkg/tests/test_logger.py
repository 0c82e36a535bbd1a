# ---------- TESTS FOR STRUCTURED LOGGING ----------

import json
import logging
import threading

import pytest

from dualperm.utils.logger import (
    JSONFormatter,
    clear_correlation_ids,
    correlation_ids,
    log_performance,
    set_correlation_id,
)

# --- MOCK DATA ---


@pytest.fixture(autouse=True)
def clean_context():
    """Reset correlation ids around each test."""
    clear_correlation_ids()
    yield
    clear_correlation_ids()


def make_record(message: str, **extra) -> logging.LogRecord:
    """LogRecord carrying `extra` attributes the way Logger.makeRecord sets them."""
    record = logging.LogRecord("dualperm.test", logging.INFO, __file__, 1, message, None, None)
    for key, value in extra.items():
        setattr(record, key, value)
    return record


# --- TESTS ---


def test_formatter_emits_json_with_extra_fields():
    """Test that extra_fields are flattened into the JSON record."""
    record = make_record("Solve finished", extra_fields={"cycles": 2, "k11": 2.4e-4})
    data = json.loads(JSONFormatter().format(record))
    assert data["message"] == "Solve finished"
    assert data["level"] == "INFO"
    assert data["cycles"] == 2
    assert data["k11"] == 2.4e-4


def test_formatter_adds_correlation_ids():
    """Test that correlation ids are attached to every record."""
    set_correlation_id(run_id="r-1", config_hash="abc", method="num")
    data = json.loads(JSONFormatter().format(make_record("hello")))
    assert data["run_id"] == "r-1"
    assert data["config_hash"] == "abc"
    assert data["method"] == "num"

    clear_correlation_ids()
    data = json.loads(JSONFormatter().format(make_record("hello")))
    assert "run_id" not in data


def test_formatter_duration():
    """Test that duration_ms is kept at the top level."""
    data = json.loads(JSONFormatter().format(make_record("done", duration_ms=12.5)))
    assert data["duration_ms"] == 12.5


def test_log_performance_success(caplog):
    """Test start and completion records of a timed block."""
    with caplog.at_level(logging.INFO, logger="dualperm.utils.logger"):
        with log_performance("stokes_solve", grid_n=64):
            pass
    messages = [r.getMessage() for r in caplog.records]
    assert messages == ["Starting stokes_solve", "Completed stokes_solve"]
    assert caplog.records[-1].extra_fields["status"] == "success"
    assert caplog.records[-1].extra_fields["grid_n"] == 64


def test_log_performance_failure_reraises(caplog):
    """Test that a failing block is logged and re-raised."""
    with caplog.at_level(logging.INFO, logger="dualperm.utils.logger"):
        with pytest.raises(ValueError):
            with log_performance("brinkman_solve"):
                raise ValueError("boom")
    failed = caplog.records[-1]
    assert failed.getMessage() == "Failed brinkman_solve"
    assert failed.extra_fields["error"] == "boom"


def test_correlation_ids_isolated_between_threads():
    """Test that concurrent runs keep their own ids and one clear does not wipe another."""
    set_correlation_id(run_id="run-main")
    seen = {}
    a_set = threading.Event()
    b_cleared = threading.Event()

    def run_a():
        set_correlation_id(run_id="run-a", method="num")
        a_set.set()
        b_cleared.wait(timeout=5)
        seen["a"] = json.loads(JSONFormatter().format(make_record("a")))

    def run_b():
        a_set.wait(timeout=5)
        set_correlation_id(run_id="run-b", method="hybrid")
        seen["b"] = json.loads(JSONFormatter().format(make_record("b")))
        clear_correlation_ids()
        b_cleared.set()

    threads = [threading.Thread(target=run_a), threading.Thread(target=run_b)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join(timeout=10)

    assert seen["a"]["run_id"] == "run-a"
    assert seen["a"]["method"] == "num"
    assert seen["b"]["run_id"] == "run-b"
    assert correlation_ids() == {"run_id": "run-main"}
