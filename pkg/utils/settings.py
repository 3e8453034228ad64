import os
from functools import lru_cache
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt

SETTINGS_PATH = Path(__file__).resolve().parent.parent / "config" / "settings.yaml"

Precision = Literal["double", "dd"]


class Settings(BaseModel):
    """Runtime defaults read from ``config/settings.yaml``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    cache_dir: Path = Path(".miw_cache")
    tol: PositiveFloat = 1e-13
    precision: Precision = "double"
    workers: PositiveInt = 4
    log_level: str = "INFO"

    identity_tolerance: PositiveFloat = 1e-9
    grid_points: int = Field(default=10_000, ge=2)
    grid_limit: PositiveFloat = 40.0

    cal08_pair_budget: PositiveInt = 100_000
    cal08_full_enumeration_max_m: PositiveInt = 2000


def load_settings(path: Optional[Path] = None) -> Settings:
    """Read the YAML file (missing file means defaults) and apply environment overrides."""
    path = Path(path) if path is not None else SETTINGS_PATH
    data = {}
    if path.exists():
        with path.open("r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}

    if os.environ.get("MIW_CACHE_DIR"):
        data["cache_dir"] = os.environ["MIW_CACHE_DIR"]
    if os.environ.get("MIW_LOG_LEVEL"):
        data["log_level"] = os.environ["MIW_LOG_LEVEL"]
    return Settings(**data)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return load_settings()
