"""Configuration settings loaded from environment variables."""

from functools import lru_cache

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Laboratory settings."""

    # App
    app_name: str = "thermolim"
    debug: bool = False
    log_level: str = "WARNING"

    # Monte Carlo
    threads: int = 1  # THERMOLIM_THREADS, overridden by --threads
    seed: int = 1
    samples: int = 200_000
    shard_size: int = 65_536  # samples per RNG shard; fixes the shard layout

    # Regularity class eta(t) = a t^b on [0, c)
    eta_a: float = 24.0
    eta_b: float = 1.0
    eta_c: float = 0.25

    # Tiling guards
    delta: float = 1.0  # boundary margin, one lattice spacing
    ell_min: float = 0.1
    ell_max_ratio: float = 16.0  # ell < |Omega|^(1/3) * ell_max_ratio
    m_max: float = 64.0

    # Experiments
    diameter_ratio_max: float = 4.0
    translation_radius: float = 4.0  # ball radius L for translation averages
    lower_bound_guard: float = 0.5  # ell * |Omega|^(-1/3) must stay below this
    record_wall_time: bool = False  # wall time breaks byte-identical result files

    class Config:
        env_prefix = "THERMOLIM_"
        env_file = ".env"
        env_file_encoding = "utf-8"


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    settings = Settings()

    if settings.threads < 1:
        raise ValueError(
            f"THERMOLIM_THREADS must be at least 1, got {settings.threads}. "
            "Unset it to run single-threaded."
        )
    if settings.shard_size < 1:
        raise ValueError(f"THERMOLIM_SHARD_SIZE must be positive, got {settings.shard_size}")
    if not 0 < settings.eta_b <= 1:
        raise ValueError(f"THERMOLIM_ETA_B must lie in (0, 1], got {settings.eta_b}")

    if settings.debug:
        settings.log_level = "DEBUG"

    return settings
