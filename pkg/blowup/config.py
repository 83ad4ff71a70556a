import logging
import logging.config
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Process-wide settings read from the environment (prefix BLOWUP_)."""

    model_config = SettingsConfigDict(env_prefix="BLOWUP_", extra="ignore")

    output_dir: Path = Field(default=Path("results"))
    log_level: str = Field(default="INFO")
    logging_config: Path = Field(default=Path("logging.ini"))

    @field_validator("log_level")
    @classmethod
    def _upper_level(cls, value: str) -> str:
        value = value.upper()
        if value not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level: {value}")
        return value


def get_settings() -> Settings:
    return Settings()


def configure_logging(settings: Settings, level: Optional[str] = None) -> None:
    """Configure logging from the ini file when present, else a plain console."""
    config_path = settings.logging_config
    if config_path.is_file():
        logging.config.fileConfig(config_path, disable_existing_loggers=False)
    else:
        logging.basicConfig(format="%(levelname)-5.5s [%(name)s] %(message)s")

    logging.getLogger("blowup").setLevel(level or settings.log_level)
    logger.debug("logging configured from %s", config_path)
