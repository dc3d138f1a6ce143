import sys
import logging.config
from typing import Optional

FORMAT = '%(levelname)s: %(asctime)s: %(filename)s: %(lineno)d:\t %(funcName)s(): %(message)s'

QUIET_LOGGERS = ('concurrent.futures',)


class _BelowWarningFilter(logging.Filter):
    """Lets progress records through to stdout; warnings and errors belong to stderr."""

    def filter(self, record):
        return record.levelno < logging.WARNING


def logging_config(level: str = 'INFO') -> dict:
    """dictConfig for the CLI: progress on stdout, warnings and errors on stderr."""
    return {
        'version': 1,
        'disable_existing_loggers': False,
        'filters': {'below_warning': {'()': _BelowWarningFilter}},
        'formatters': {'simple': {'format': FORMAT}},
        'handlers': {
            'progress': {
                'class': 'logging.StreamHandler',
                'level': 'DEBUG',
                'formatter': 'simple',
                'filters': ['below_warning'],
                'stream': sys.stdout,
            },
            'problems': {
                'class': 'logging.StreamHandler',
                'level': 'WARNING',
                'formatter': 'simple',
                'stream': sys.stderr,
            },
        },
        'loggers': {name: {'level': 'ERROR'} for name in QUIET_LOGGERS},
        'root': {'level': level.upper(), 'handlers': ['progress', 'problems']},
    }


def setup_logging(level: Optional[str] = None) -> None:
    logging.config.dictConfig(logging_config(level or 'INFO'))
