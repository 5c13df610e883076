import logging
from pathlib import Path

from gaugeflow.utils.logger import configure_logging, get_logger, level_from_verbosity


def test_configure_and_get_logger(tmp_path: Path):
    # 1. Reset root handlers left by other tests
    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        handler.close()

    # 2. Setup
    log_file = tmp_path / "run.log"
    configure_logging(level=logging.INFO, log_file=str(log_file))

    # 3. Use
    logger = get_logger("gaugeflow.test")
    logger.info("derivation finished")

    # 4. Flush root handlers (file handler was attached to root)
    for handler in logging.getLogger().handlers:
        handler.flush()
        handler.close()

    # 5. Assert
    assert log_file.exists()
    content = log_file.read_text()
    assert "derivation finished" in content
    assert "gaugeflow.test - INFO" in content


def test_debug_messages_filtered_at_info(tmp_path: Path):
    log_file = tmp_path / "quiet.log"
    configure_logging(level=logging.INFO, log_file=str(log_file))
    get_logger("gaugeflow.quiet").debug("not shown")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert "not shown" not in log_file.read_text()


def test_level_from_verbosity():
    assert level_from_verbosity(0) == logging.WARNING
    assert level_from_verbosity(1) == logging.INFO
    assert level_from_verbosity(2) == logging.DEBUG
    assert level_from_verbosity(5) == logging.DEBUG
