import logging

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def configure_logging(verbosity: int = 0) -> None:
    """Route psmlab logs (and ``warnings``) to stderr.

    Args:
        verbosity (int): Number of ``-v`` flags; 0 warnings, 1 info, 2+ debug
    """
    level = _LEVELS[max(0, min(verbosity, len(_LEVELS) - 1))]
    logging.captureWarnings(True)
    logging.basicConfig(format=LOG_FORMAT, level=level, force=True)
    # matplotlib and PIL are chatty at DEBUG
    for noisy in ("matplotlib", "PIL"):
        logging.getLogger(noisy).setLevel(max(level, logging.INFO))
