from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class BaseConfig(BaseSettings):
    ENV_STATE: str = "prod"

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")


class GlobalConfig(BaseConfig):
    HTTP_TIMEOUT_SECONDS: float = 10.0
    RESPONSE_BODY_CAP_BYTES: int = 1024 * 1024
    SQLI_SLEEP_SECONDS: float = 5.0
    SQLI_BASELINE_MAX_MS: float = 2000.0
    FUZZ_MAX_ROUNDS: int = 4
    FUZZ_SEED: int = 0
    MUTATION_DENY_LIST: list[str] = []
    SQLI_PAYLOAD_FILE: Optional[str] = None
    XSS_PAYLOAD_FILE: Optional[str] = None
    STACK_TRACE_PATTERN_FILE: Optional[str] = None
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = "apiwarden.log"


class DevConfig(GlobalConfig):
    LOG_LEVEL: str = "DEBUG"

    model_config = SettingsConfigDict(env_prefix="DEV_", extra="ignore")


class ProdConfig(GlobalConfig):
    model_config = SettingsConfigDict(env_prefix="PROD_", extra="ignore")


class TestConfig(GlobalConfig):
    __test__ = False

    HTTP_TIMEOUT_SECONDS: float = 5.0
    SQLI_SLEEP_SECONDS: float = 1.0
    SQLI_BASELINE_MAX_MS: float = 500.0
    FUZZ_MAX_ROUNDS: int = 3
    LOG_FILE: Optional[str] = None

    model_config = SettingsConfigDict(env_prefix="TEST_", extra="ignore")


@lru_cache()
def get_config(env_state: str) -> GlobalConfig:
    configs = {"dev": DevConfig, "prod": ProdConfig, "test": TestConfig}
    return configs[env_state]()


config = get_config(BaseConfig().ENV_STATE)
