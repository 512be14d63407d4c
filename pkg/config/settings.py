import os
from typing import List, Literal, Optional
from dotenv import load_dotenv
from pydantic import BaseModel, Field, validator

# Load environment variables for local development
load_dotenv()

# Defaults - all overridable through the environment or cli flags
DEFAULT_LEVEL_CAP = 8           # 3^8 = 6561 points per level table
DEFAULT_GROUP_LEVEL_CAP = 4     # W_4 acts on 81 points
DEFAULT_SEED = 0
DEFAULT_OUTPUT_FORMAT = "json"
DEFAULT_LOG_LEVEL = "WARNING"

# Storage Configuration
PORTRAIT_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "portraits")
REPORT_DIR = "reports"
PORTRAIT_SUFFIX = ".portrait"

# App Configuration
APP_NAME = "treemono"


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")


def get_level_cap() -> int:
    """Level cap for element computations (TREEMONO_LEVEL_CAP)"""
    cap = _env_int("TREEMONO_LEVEL_CAP", DEFAULT_LEVEL_CAP)
    if cap < 1:
        raise ValueError("TREEMONO_LEVEL_CAP must be at least 1")
    return cap


def get_group_level_cap() -> int:
    """Level cap for permutation-group computations (TREEMONO_GROUP_LEVEL_CAP)"""
    cap = _env_int("TREEMONO_GROUP_LEVEL_CAP", DEFAULT_GROUP_LEVEL_CAP)
    if cap < 1:
        raise ValueError("TREEMONO_GROUP_LEVEL_CAP must be at least 1")
    return cap


def get_default_seed() -> int:
    return _env_int("TREEMONO_SEED", DEFAULT_SEED)


def get_output_format() -> str:
    return os.getenv("TREEMONO_OUTPUT_FORMAT", DEFAULT_OUTPUT_FORMAT)


def get_log_level() -> str:
    return os.getenv("TREEMONO_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()


class Config(BaseModel):
    """Run configuration shared by the cli commands"""
    level_cap: int = Field(default_factory=get_level_cap, ge=1)
    group_level_cap: int = Field(default_factory=get_group_level_cap, ge=1)
    seed: int = Field(default_factory=get_default_seed, ge=0, le=2**64 - 1)
    output_format: Literal["json", "text"] = Field(default_factory=get_output_format)
    input_paths: List[str] = Field(default_factory=list)
    timings: bool = False

    @validator('group_level_cap')
    def group_cap_within_level_cap(cls, v, values):
        """Group computations never go deeper than element computations"""
        level_cap = values.get('level_cap')
        if level_cap is not None and v > level_cap:
            raise ValueError('group_level_cap cannot exceed level_cap')
        return v


def load_config(**overrides: Optional[object]) -> Config:
    """Build a Config from the environment, letting explicit values win"""
    explicit = {key: value for key, value in overrides.items() if value is not None}
    return Config(**explicit)
