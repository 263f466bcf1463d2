import structlog
import logging
import sys
from typing import Any, Dict


def _resolve_level(debug: bool, level_name: str) -> int:
    # debug tem precedência; o nome do nível permite ajuste fino
    if debug:
        return logging.DEBUG
    return getattr(logging, level_name.upper(), logging.INFO)


def configure_logging(debug: bool = False, level_name: str = "INFO"):
    log_level = _resolve_level(debug, level_name)
    debug_mode = log_level <= logging.DEBUG

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stdout,
        level=log_level,
    )

    # Filtra logs de bibliotecas numéricas que geram muito ruído
    class LibraryFilter(logging.Filter):
        def filter(self, record):
            if record.name.startswith(("matplotlib", "numba", "asyncio", "urllib3")):
                return False
            return True

    if not debug_mode:
        root_logger = logging.getLogger()
        root_logger.addFilter(LibraryFilter())

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer(indent=2),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(log_level),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(),
        cache_logger_on_first_use=True,
    )


def get_logger(name: str) -> structlog.BoundLogger:
    return structlog.get_logger(name)


class LoggerContext:
    """Vincula campos (run, stage, seed...) a todos os logs emitidos dentro do bloco."""

    def __init__(self, **kwargs: Dict[str, Any]):
        self.context = kwargs

    def __enter__(self):
        structlog.contextvars.bind_contextvars(**self.context)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type:
            logger = get_logger(__name__)
            logger.error("error", error=str(exc_val), exc_info=True)
        structlog.contextvars.unbind_contextvars(*self.context.keys())
