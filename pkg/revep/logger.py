import logging
from pathlib import Path
from typing import Optional

PLAIN_FORMAT = "%(levelname)s - %(message)s"


def setup_logger(logger: logging.Logger,
                 verbose: bool,
                 log_file: Optional[Path] = None) -> None:
    if verbose:
        log_level = logging.DEBUG
    else:
        log_level = logging.INFO

    logger.setLevel(log_level)
    # Drop handlers from an earlier command in the same process
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    # Create a console handler with a higher log level
    stream_handler = logging.StreamHandler()
    stream_handler.setLevel(log_level)
    stream_handler.setFormatter(CustomFormatter())
    logger.addHandler(stream_handler)

    if log_file is not None:
        add_file_handler(logger, log_file)


def add_file_handler(logger: logging.Logger, log_file: Path) -> None:
    # No timestamps: identical runs produce identical logs
    file_handler = logging.FileHandler(log_file, mode="w", encoding="utf-8")
    file_handler.setLevel(logger.level)
    file_handler.setFormatter(logging.Formatter(PLAIN_FORMAT))
    logger.addHandler(file_handler)


class CustomFormatter(logging.Formatter):

    grey = "\x1b[38;20m"
    green = "\x1b[1;32m"
    yellow = "\x1b[33;20m"
    red = "\x1b[31;20m"
    bold_red = "\x1b[31;1m"
    reset = "\x1b[0m"

    FORMATS = {
        logging.DEBUG: grey + PLAIN_FORMAT + reset,
        logging.INFO: green + "%(levelname)s" + reset + " - %(message)s",
        logging.WARNING: yellow + PLAIN_FORMAT + reset,
        logging.ERROR: red + PLAIN_FORMAT + reset,
        logging.CRITICAL: bold_red + PLAIN_FORMAT + reset
    }

    def format(self, record: logging.LogRecord) -> str:
        log_fmt = self.FORMATS.get(record.levelno)
        formatter = logging.Formatter(log_fmt)
        return formatter.format(record)
