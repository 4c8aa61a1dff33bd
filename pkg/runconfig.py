"""

Run configuration shared by the command-line interface and the gallery.

Every default lives in RunConfig. Values are resolved in the order
command-line flags > JSON config file (--config) > defaults, and the seed
falls back to the NEWTONFRAME_SEED environment variable before the built-in
default. The effective seed is echoed into every report.

"""

import json
import os
from typing import Any, ClassVar, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from haar import DEFAULT_NODES, DEFAULT_SAMPLES, GROUPS, MIN_SAMPLES, FiberScheme, make_scheme
from minimality import DEFAULT_RESOLUTION, DEFAULT_STEPS

SEED_VARIABLE = "NEWTONFRAME_SEED"
DEFAULT_SEED = 0
SCHEMES = ("mc", "exact", "auto")


def default_seed() -> int:
    """
    Seed from NEWTONFRAME_SEED, else the built-in default.

    Raises:
        ValueError: If the variable is set but is not an integer.
    """
    value = os.environ.get(SEED_VARIABLE)
    if value is None or value == "":
        return DEFAULT_SEED
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"{SEED_VARIABLE} must be an integer, got '{value}'")


class RunConfig(BaseModel):
    description: ClassVar[str] = "Settings of one command-line run"
    model_config = ConfigDict(extra="forbid")

    command: str = "sigma"
    inputs: List[str] = Field(default_factory=list)
    u: Optional[List[int]] = None
    group: str = "O"
    scheme: str = "auto"
    samples: int = DEFAULT_SAMPLES
    nodes: int = DEFAULT_NODES
    seed: int = Field(default_factory=default_seed)
    resolution: int = DEFAULT_RESOLUTION
    tolerance: Optional[float] = None
    curvature: float = 0.0
    patch: Optional[str] = None
    field: str = "bump"
    steps: List[float] = Field(default_factory=lambda: list(DEFAULT_STEPS))
    oracle: bool = False
    entry: Optional[str] = None
    all_u_upto: Optional[int] = None
    points: int = 100
    out: Optional[str] = None
    output_dir: Optional[str] = None
    threads: int = 1
    progress: bool = False

    @field_validator("group")
    @classmethod
    def _check_group(cls, value: str) -> str:
        if value not in GROUPS:
            raise ValueError(f"group must be one of {GROUPS}, got '{value}'")
        return value

    @field_validator("scheme")
    @classmethod
    def _check_scheme(cls, value: str) -> str:
        if value not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got '{value}'")
        return value

    @field_validator("samples")
    @classmethod
    def _check_samples(cls, value: int) -> int:
        if value < MIN_SAMPLES:
            raise ValueError(f"samples must be ≥ {MIN_SAMPLES}, got {value}")
        return value

    @field_validator("resolution")
    @classmethod
    def _check_resolution(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f"resolution must be ≥ 2, got {value}")
        return value

    @field_validator("threads", "points")
    @classmethod
    def _check_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"value must be ≥ 1, got {value}")
        return value

    @field_validator("steps")
    @classmethod
    def _check_steps(cls, value: List[float]) -> List[float]:
        if not value or any(h <= 0 for h in value):
            raise ValueError(f"steps must be positive, got {value}")
        return value

    def fiber_scheme(self, q: int) -> FiberScheme:
        """
        The fiber scheme for codimension q; 'auto' is exact when q ≤ 2.
        """
        kind = self.scheme
        if kind == "auto":
            kind = "exact" if q <= 2 else "mc"
        return make_scheme(kind, self.group, self.samples, self.nodes)


def load_config_file(path: str) -> Dict[str, Any]:
    """
    Read a JSON object of RunConfig fields.

    Raises:
        OSError: If the file cannot be read.
        ValueError: If the content is not a JSON object.
    """
    with open(path, "r") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"Config file {path} must contain a JSON object")
    return data


def resolve_config(flags: Dict[str, Any], config_file: Optional[str] = None) -> RunConfig:
    """
    Merge defaults, the config file and the flags that were given.

    Flags whose value is None count as not given.
    """
    values: Dict[str, Any] = {}
    if config_file:
        values.update(load_config_file(config_file))
    values.update({key: value for key, value in flags.items() if value is not None})
    return RunConfig(**values)
