import logging
from logging.config import dictConfig
from typing import Optional

from rich.console import Console

from apiwarden.config import DevConfig, config

stderr_console = Console(stderr=True)


def obfuscated(credential: str, visible_length: int) -> str:
    visible = credential[:visible_length]
    return visible + "*" * (len(credential) - len(visible))


class CredentialObfuscationFilter(logging.Filter):
    def __init__(self, name: str = "", visible_length: int = 2) -> None:
        super().__init__(name)
        self.visible_length = visible_length

    def filter(self, record: logging.LogRecord) -> bool:
        if "credential" in record.__dict__:
            record.credential = obfuscated(str(record.credential), self.visible_length)
        return True


def configure_logging(level: Optional[str] = None) -> None:
    level = level or config.LOG_LEVEL
    handlers = ["default"]
    handler_config = {
        "default": {
            "class": "rich.logging.RichHandler",
            "level": "DEBUG",
            "formatter": "console",
            "console": "ext://apiwarden.logging_conf.stderr_console",
            "filters": ["correlation_id", "credential_obfuscation"],
        },
    }
    if config.LOG_FILE:
        handlers.append("rotating_file")
        handler_config["rotating_file"] = {
            "class": "logging.handlers.RotatingFileHandler",
            "level": "DEBUG",
            "formatter": "file",
            "filename": config.LOG_FILE,
            "maxBytes": 1024 * 1024,  # 1MB
            "backupCount": 3,
            "encoding": "utf8",
            "filters": ["correlation_id", "credential_obfuscation"],
        }

    dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "filters": {
                "correlation_id": {
                    "()": "asgi_correlation_id.CorrelationIdFilter",
                    "uuid_length": 8 if isinstance(config, DevConfig) else 32,
                    "default_value": "-",
                },
                "credential_obfuscation": {
                    "()": CredentialObfuscationFilter,
                    "visible_length": 2 if isinstance(config, DevConfig) else 0,
                },
            },
            "formatters": {
                "console": {
                    "class": "logging.Formatter",
                    "datefmt": "%Y-%m-%dT%H:%M:%S",
                    "format": "(%(correlation_id)s) %(name)s:%(lineno)d - %(message)s",
                },
                "file": {
                    "class": "pythonjsonlogger.jsonlogger.JsonFormatter",
                    "datefmt": "%Y-%m-%dT%H:%M:%S",
                    "format": "%(asctime)s %(msecs)03dZ  %(levelname)-8s  %(correlation_id)s  %(name)s %(lineno)d  %(message)s",
                },
            },
            "handlers": handler_config,
            "loggers": {
                "apiwarden": {
                    "handlers": handlers,
                    "level": level,
                    "propagate": False,
                },
                "uvicorn": {
                    "handlers": ["default"],
                    "level": "WARNING",
                },
                "httpx": {
                    "handlers": ["default"],
                    "level": "WARNING",
                },
            },
        }
    )
