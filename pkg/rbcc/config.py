"""Process-level settings for rbcc using Pydantic Settings.

Scenario parameters live in config files (see ``rbcc.params``); this module
only carries knobs that belong to the running process.
"""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from rbcc.version import __version__


class Settings(BaseSettings):
    """Settings loaded from environment variables.

    All settings can be overridden via environment variables with the
    RBCC_ prefix. For example:
        RBCC_RNG_SEED=7
        RBCC_JOBS=4
    """

    model_config = SettingsConfigDict(
        env_prefix="RBCC_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    @property
    def version(self) -> str:
        return __version__

    # Overrides sim.rng_seed of every loaded scenario when set
    rng_seed: int | None = Field(default=None, ge=0)

    # Worker processes for sweeps and Monte-Carlo batches
    jobs: int = Field(default=1, ge=1)

    # Logging
    json_logs: bool = False

    # Default output directory for CLI runs
    out_dir: str = "results"

    @property
    def out_path(self) -> Path:
        """Expand output directory path."""
        return Path(self.out_dir).expanduser()


def get_settings() -> Settings:
    """Get settings instance.

    Creates a new instance each time to pick up environment changes.
    """
    return Settings()


settings = get_settings()
