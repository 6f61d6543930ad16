"""Toolchain Configuration.

This module manages toolchain configuration using Pydantic Settings.
Every setting can be supplied as a ``MORPHGEN_``-prefixed environment variable or in ``.env``;
command-line flags override them per run.
"""

from functools import lru_cache
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolchain settings loaded from environment variables.

    Attributes:
        environment: Deployment environment (development, staging, production).
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL).
        seed: Master noise and placement seed (``MORPHGEN_SEED``).
        output_dir: Default directory for run outputs.
        dw_interpretation: Reading of ``DW`` terms (``difference`` or ``sde``).
        display_interval_time: Simulated time between running display frames.
        contour_levels: Number of contour lines drawn.
        frame_scale: Pixels per grid cell in rendered frames (0 picks a scale automatically).
        workers: Threads evaluating field right-hand sides within a step.
        gradient_floor: Sensed gradient magnitudes below this read as zero.
        brownian: Brownian speed perturbation of agents.
        sensor_bias: Constant offset added to every sensor reading.
        sensor_noise: Standard deviation of sensor reading noise.
        kernel_scale: Smoothing length in agent diameters.
        decay_step_product: Channel decay rate times step size.
        cells_per_diameter: Channel grid cells per agent diameter.
    """

    model_config = SettingsConfigDict(
        env_prefix="MORPHGEN_", env_file=".env", env_file_encoding="utf-8", case_sensitive=False
    )

    # Application Settings
    environment: str = Field(default="development", description="Deployment environment")
    log_level: str = Field(default="INFO", description="Logging level")

    # Run Settings
    seed: int = Field(default=0, description="Master seed for noise and agent placement")
    output_dir: str = Field(default="./out", description="Default run output directory")
    dw_interpretation: Literal["difference", "sde"] = Field(
        default="difference", description="Reading of DW noise terms"
    )
    workers: int = Field(default=1, ge=1, description="Threads per simulation step")

    # Display Settings
    display_interval_time: float = Field(
        default=0.1, gt=0, description="Simulated time between running display frames"
    )
    contour_levels: int = Field(default=10, ge=1, description="Contour lines per frame")
    frame_scale: int = Field(default=0, ge=0, description="Pixels per cell (0 = automatic)")

    # Agent World Settings
    gradient_floor: float = Field(default=1e-6, ge=0, description="Minimum sensed gradient")
    brownian: float = Field(default=0.0, ge=0, description="Brownian speed perturbation")
    sensor_bias: float = Field(default=0.0, description="Sensor reading offset")
    sensor_noise: float = Field(default=0.0, ge=0, description="Sensor noise deviation")
    kernel_scale: float = Field(default=4.0, gt=0, description="Smoothing length in diameters")
    decay_step_product: float = Field(
        default=0.05, gt=0, le=1, description="Channel decay rate times step size"
    )
    cells_per_diameter: float = Field(
        default=2.0, gt=0, description="Channel grid cells per agent diameter"
    )

    @property
    def is_production(self) -> bool:
        """Check if running in production environment.

        Returns:
            True if environment is production.
        """
        return self.environment.lower() == "production"


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance.

    This function uses LRU cache to ensure settings are loaded only once.

    Returns:
        The toolchain settings instance.
    """
    return Settings()
