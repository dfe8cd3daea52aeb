"""Analysis configuration: JSON config files, device lists and validation."""

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .bounds.grouping import MODES
from .codes import CODE_NAMES, LinearBlockCode, code_by_name
from .dataset import DELIMITERS, REDUCTIONS
from .errors import ConfigError, ParameterError
from .keyrank import DEFAULT_BINS, DEFAULT_KEY_COUNT, METHODS

DATASET_ENV = "PUF_ENTROPY_DATASET"
DEFAULT_THETA_DELTAS = (0.05, 0.1)
MAX_SEED = (1 << 64) - 1


def parse_device_list(text: str) -> list[int]:
    """
    Parse "0-191,193" style device lists (inclusive ranges).

    Raises:
        ConfigError: malformed entry or reversed range
    """
    devices: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                start, stop = (int(v) for v in part.split("-", 1))
                if stop < start:
                    raise ConfigError(f"Reversed device range '{part}'")
                devices.extend(range(start, stop + 1))
            else:
                devices.append(int(part))
        except ValueError:
            raise ConfigError(f"Malformed device list entry '{part}'") from None
    if not devices:
        raise ConfigError("Device list is empty")
    if any(d < 0 for d in devices):
        raise ConfigError("Device indices must be non-negative")
    return devices


@dataclass
class AnalysisConfig:
    """Everything that determines an analysis run; echoed into every output."""

    datasets: list[str] = field(default_factory=list)
    bias: str | None = None
    delimiter: str = "whitespace"
    devices_in_rows: bool = True
    header: bool = False
    reduce: str = "first"
    devices: list[int] | None = None
    codes: list[str] = field(default_factory=lambda: list(CODE_NAMES))
    theta_deltas: list[float] = field(default_factory=lambda: list(DEFAULT_THETA_DELTAS))
    mode: str = "highest"
    L: float = 0.0
    seed: int = 0
    key_count: int = DEFAULT_KEY_COUNT
    bins: int = DEFAULT_BINS
    method: str = "auto"
    output_dir: str | None = None

    def validate(self) -> "AnalysisConfig":
        """Return self, or raise ConfigError on the first invalid field."""
        for name in self.codes:
            if name not in CODE_NAMES:
                raise ConfigError(
                    f"Unknown code '{name}' (expected one of {', '.join(CODE_NAMES)})"
                )
        for theta_delta in self.theta_deltas:
            if not 0 < theta_delta <= 1:
                raise ConfigError(f"theta_delta must lie in (0, 1], got {theta_delta}")
        if self.mode not in MODES:
            raise ConfigError(f"Unknown mode '{self.mode}' (expected one of {MODES})")
        if self.delimiter not in DELIMITERS:
            raise ConfigError(f"Unknown delimiter '{self.delimiter}'")
        if self.reduce not in REDUCTIONS:
            raise ConfigError(f"Unknown reduction '{self.reduce}'")
        if self.method not in METHODS:
            raise ConfigError(f"Unknown rank method '{self.method}'")
        if self.L < 0:
            raise ConfigError(f"L must be non-negative, got {self.L}")
        if self.key_count < 1:
            raise ConfigError(f"Key count must be positive, got {self.key_count}")
        if self.bins < 1:
            raise ConfigError(f"Bin count must be positive, got {self.bins}")
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"Seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.devices is not None and not self.devices:
            raise ConfigError("Device subset is empty")
        return self

    def resolved_codes(self) -> list[LinearBlockCode]:
        try:
            return [code_by_name(name) for name in self.codes]
        except ParameterError as e:
            raise ConfigError(e.message) from None

    def dataset_paths(self) -> list[Path]:
        """Configured datasets, or the PUF_ENTROPY_DATASET file when none are set."""
        if self.datasets:
            return [Path(p) for p in self.datasets]
        env = os.environ.get(DATASET_ENV)
        return [Path(env)] if env else []

    def with_overrides(self, **overrides: Any) -> "AnalysisConfig":
        """Copy with every non-None override applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def provenance(self) -> dict[str, Any]:
        """to_dict() without the output directory, plus the fixed preprocessing decisions."""
        settings = self.to_dict()
        settings.pop("output_dir")
        return {**settings, "frequency_ties": "bit 0", "pairing": "adjacent exclusive"}

    def echo_lines(self) -> list[str]:
        """The resolved config as a single comment-ready line."""
        return ["config " + json.dumps(self.provenance(), separators=(",", ":"), sort_keys=True)]


_FIELDS = {f.name for f in dataclasses.fields(AnalysisConfig)}


def config_from_dict(data: dict[str, Any]) -> AnalysisConfig:
    """Build a validated config; "devices" may be a list or a "0-191" string."""
    unknown = sorted(set(data) - _FIELDS)
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
    data = dict(data)
    if isinstance(data.get("devices"), str):
        data["devices"] = parse_device_list(data["devices"])
    if isinstance(data.get("datasets"), str):
        data["datasets"] = [data["datasets"]]
    try:
        config = AnalysisConfig(**data)
    except TypeError as e:
        raise ConfigError(f"Invalid config: {e}") from None
    return config.validate()


def load_config(path: Path | str) -> AnalysisConfig:
    """Read a JSON config file; relative dataset paths resolve against its directory."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"Cannot read config: {e}", location=str(path)) from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON: {e.msg}", location=f"{path}:{e.lineno}") from None
    if not isinstance(data, dict):
        raise ConfigError("Config must be a JSON object", location=str(path))

    datasets = data.get("datasets")
    if isinstance(datasets, str):
        datasets = [datasets]
    if datasets:
        data["datasets"] = [str(path.parent / d) for d in datasets]
    if data.get("bias"):
        data["bias"] = str(path.parent / data["bias"])
    return config_from_dict(data)
