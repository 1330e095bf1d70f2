"""Application configuration using pydantic-settings."""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables.

    Scenario physics lives in the scenario file (see
    ``psmflow.schemas.scenario``); these settings only cover how the process
    runs, so that a scenario file stays portable between machines.

    Attributes:
        OUTPUT_DIR: Output directory override. Empty means "use the scenario's
            own output directory".
        WORKERS: Default worker count for the field kernels.
        GEOMETRY_MEMORY_CAP_BYTES: Upper bound for a single geometry field
            allocation, checked before voxelization starts.
        EPSILON_TOLERANCE: Overlap fractions this far outside [0, 1] are
            clamped instead of rejected.
        LOG_EVERY: Steps between progress summaries.
        STRICT_MESH: Reject non-watertight meshes instead of warning.
        DEBUG: Enable verbose (per-phase) logging.
    """

    OUTPUT_DIR: str = ""
    WORKERS: int = 1
    GEOMETRY_MEMORY_CAP_BYTES: int = 2 * 1024**3
    EPSILON_TOLERANCE: float = 1e-9
    LOG_EVERY: int = 100
    STRICT_MESH: bool = True
    DEBUG: bool = False

    model_config = SettingsConfigDict(
        env_prefix="PSMFLOW_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
    )


settings = Settings()
