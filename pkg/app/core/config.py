"""
Core configuration for the TWIST reconstruction service
"""

from pydantic_settings import BaseSettings
from pydantic_settings import SettingsConfigDict


class Settings(BaseSettings):
    """Application settings from environment variables"""

    # App
    app_name: str = "TWIST-Recon"
    app_version: str = "1.0.0"
    app_host: str = "0.0.0.0"
    app_port: int = 8000
    debug: bool = False
    log_level: str = "INFO"

    # Metric record store - SQLite for local runs
    database_url: str = "sqlite:///./twist_recon.db"

    # Filesystem roots for datasets and training runs
    data_dir: str = "./data"
    runs_dir: str = "./runs"

    # Compute
    device: str = "cpu"
    num_threads: int = 0  # 0 leaves torch's default

    # Default experiment configuration file
    default_config: str = "configs/default.json"

    model_config = SettingsConfigDict(env_file='.env', case_sensitive=False, extra='allow')


settings = Settings()
