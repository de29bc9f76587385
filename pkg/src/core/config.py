# fsforge/src/core/config.py
import logging
from typing import Any, Dict, Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # App settings
    APP_NAME: str = "fsforge"
    APP_VERSION: str = "0.1.0"

    # Logging
    LOG: str = "INFO"
    LOG_FILE: Optional[str] = None

    # Landscape
    TOL_ROOT: float = 1e-12
    TOL_MORSE: float = 1e-8
    TOL_VALUE_SEPARATION: float = 1e-9
    TOL_RAY_CLEARANCE: float = 1e-9
    ROOT_MAX_ITER: int = 100
    SAMPLE_MARGIN: float = 1e-3

    # Flow (separatrix shooting)
    TOL_CONSERVE: float = 1e-8
    TOL_SEGMENT: float = 1e-6
    TOL_SPEED_LAW: float = 1e-6
    LAUNCH_RADIUS: float = 1e-4
    CAPTURE_RADIUS: float = 1e-3
    CAPTURE_STEPS: int = 3
    RUNAWAY_FACTOR: float = 10.0
    RK_METHOD: str = "DOP853"
    RK_RTOL: float = 1e-10
    RK_ATOL: float = 1e-12
    RK_MAX_STEP: float = 0.5
    FLOW_MAX_TIME: float = 200.0
    SAMPLE_DT: float = 0.01

    # Transport
    TRANSPORT_COND_MAX: float = 1e12
    TOL_SYMPLECTIC: float = 1e-8
    TOL_ANGLE: float = 1e-6
    ANGLE_AMBIGUITY_FACTOR: float = 100.0
    TOL_EIGEN: float = 1e-9
    TRANSPORT_REFINE: int = 1

    # Floer
    FLOER_S: float = 4.0
    FLOER_T: float = 4.0
    FLOER_NS: int = 64
    FLOER_NT: int = 64
    FLOER_MAX_ITER: int = 30
    FLOER_BLEND_MARGIN: int = 5
    TOL_ENERGY_IDENTITY: float = 1e-3
    TOL_HOLOMORPHY: float = 1e-4
    RHO_FLOOR: float = 0.1
    TOL_ROTATION: float = 1e-4
    M1_SEEDS: int = 6
    M1_BUMP: float = 0.05
    M1_CLUSTER_TOL: float = 1e-3

    # Run control
    SEED: int = 0
    JOBS: int = 1

    model_config = SettingsConfigDict(
        case_sensitive=True,
        env_file=".env",
        env_prefix="FSFORGE_",
        extra="ignore",
    )

    @field_validator("LOG", mode="before")
    @classmethod
    def normalize_log_level(cls, v):
        level = str(v).strip().upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"Unknown log level: {v}")
        return level

    @field_validator(
        "TOL_ROOT", "TOL_MORSE", "TOL_VALUE_SEPARATION", "TOL_RAY_CLEARANCE",
        "SAMPLE_MARGIN", "TOL_CONSERVE", "TOL_SEGMENT", "TOL_SPEED_LAW",
        "LAUNCH_RADIUS", "CAPTURE_RADIUS", "RK_RTOL", "RK_ATOL", "RK_MAX_STEP",
        "FLOW_MAX_TIME", "SAMPLE_DT", "TRANSPORT_COND_MAX", "TOL_SYMPLECTIC",
        "TOL_ANGLE", "TOL_EIGEN", "FLOER_S", "FLOER_T", "TOL_ENERGY_IDENTITY",
        "TOL_HOLOMORPHY", "RHO_FLOOR", "TOL_ROTATION", "M1_BUMP", "M1_CLUSTER_TOL",
    )
    @classmethod
    def must_be_positive(cls, v, info):
        if v <= 0:
            raise ValueError(f"{info.field_name} must be positive")
        return v

    @field_validator("FLOER_NS", "FLOER_NT")
    @classmethod
    def floer_grid_size(cls, v, info):
        if v < 16:
            raise ValueError(f"{info.field_name} must be >= 16")
        return v

    @field_validator("JOBS", "CAPTURE_STEPS", "TRANSPORT_REFINE", "M1_SEEDS", "ROOT_MAX_ITER")
    @classmethod
    def must_be_at_least_one(cls, v, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1")
        return v

    def tolerance_set(self) -> Dict[str, Any]:
        """Numerical knobs embedded in every report."""
        skip = {"APP_NAME", "APP_VERSION", "LOG", "LOG_FILE", "JOBS"}
        return {k: v for k, v in self.model_dump().items() if k not in skip}

    def with_overrides(self, **overrides: Any) -> "Settings":
        """Copy with CLI overrides applied and re-validated."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return Settings.model_validate(data)


settings = Settings()
