from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Centralized toolkit settings. Values are read from the environment
    (prefix ``SAMPLED_CLF_``) and from a ``.env`` file when present.
    """
    # App Info
    app_name: str = "Sampled-CLF"
    app_version: str = "1.0.0"
    app_description: str = "Sampled-data CLF controller synthesis and verification toolkit"

    # API Settings
    API_PREFIX: str = "/api/v1"
    HOST: str = "127.0.0.1"
    PORT: int = 8000
    DEBUG: bool = False
    WORKERS: int = 4  # thread pool size for sample-period sweeps

    # Numerics
    default_substeps: int = 64
    domain_radius: float = 100.0
    certification_radius: float = 2.0
    consistency_lattice_points: int = 21

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="SAMPLED_CLF_",
        case_sensitive=False,
        extra="ignore",
    )


# Create a single, importable instance of the Settings class
settings = Settings()
