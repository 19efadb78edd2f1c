"""
Configuration module for training, grids and experiment runs
"""
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional
import configparser
import json

from .errors import ConfigError

# Output locations
DB_PATH = "data/runs.db"
OUTPUT_DIR = "data/output"
CSV_FLOAT_FORMAT = "%.16e"
NET_FILE_VERSION = 1


@dataclass
class LMConfig:
    """Levenberg-Marquardt optimizer parameters"""

    lambda0: float = 1e-3
    up_factor: float = 10.0
    down_factor: float = 10.0
    max_epochs: int = 1000
    loss_tol: float = 1e-12
    seed: int = 0  # parameter-init seed
    lambda_max: float = 1e16  # give up on an epoch once damping exceeds this
    separable: bool = True  # solve the output layer exactly, damp only the hidden layer

    def validate(self):
        """Raise ConfigError if any parameter is out of range"""
        if not self.lambda0 > 0:
            raise ConfigError(f"lambda0 must be positive, got {self.lambda0}")
        if not (self.up_factor > 1 and self.down_factor > 1):
            raise ConfigError("damping factors must be greater than 1")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not self.loss_tol > 0:
            raise ConfigError(f"loss_tol must be positive, got {self.loss_tol}")
        return self

    def to_dict(self):
        """Convert config to dictionary"""
        return asdict(self)

    def to_json(self):
        """Convert config to JSON string"""
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, config_dict):
        """Create config from dictionary"""
        return cls(**config_dict)

    @classmethod
    def from_json(cls, json_str):
        """Create config from JSON string"""
        return cls.from_dict(json.loads(json_str))


@dataclass
class NetConfig:
    """Network size and interface sampling"""

    width: int = 40  # hidden neurons m
    n_samples: int = 200  # interface training points M
    n_outputs: int = 1  # k
    seed: int = 0

    def validate(self):
        if self.width < 1:
            raise ConfigError(f"network width must be >= 1, got {self.width}")
        if self.n_samples < 1:
            raise ConfigError(f"need at least one interface sample, got {self.n_samples}")
        if self.n_outputs < 1:
            raise ConfigError(f"need at least one output, got {self.n_outputs}")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, config_dict):
        return cls(**config_dict)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one convergence study"""

    name: str = "example1"
    kind: str = "poisson"  # poisson or stokes
    preset: Optional[str] = "example1"
    problem: Dict[str, str] = field(default_factory=dict)  # explicit expression block

    # Network
    width: int = 40
    n_samples: int = 200
    n_outputs: int = 1
    seed: Optional[int] = 0

    # Optimizer
    lm: LMConfig = field(default_factory=LMConfig)

    # Grid sweep
    sweep: List[int] = field(default_factory=lambda: [64, 128, 256, 512])
    mode: str = "exact"  # exact or successive
    retrain: bool = False

    # Output
    out_dir: str = OUTPUT_DIR
    db_path: Optional[str] = DB_PATH
    dump_fields: bool = False
    timings: bool = False

    def net_config(self) -> NetConfig:
        """Network settings as a NetConfig"""
        return NetConfig(self.width, self.n_samples, self.n_outputs, self.seed)

    def lm_config(self) -> LMConfig:
        """Optimizer settings with the experiment seed applied"""
        lm = LMConfig(**self.lm.to_dict())
        lm.seed = self.seed
        return lm

    def validate(self):
        """Check the run can be reproduced and the sweep is nested"""
        if self.seed is None:
            raise ConfigError("a seed is required for reproducible runs")
        if self.kind not in ("poisson", "stokes"):
            raise ConfigError(f"unknown experiment kind '{self.kind}'")
        if self.mode not in ("exact", "successive"):
            raise ConfigError(f"unknown error mode '{self.mode}'")
        if not self.sweep:
            raise ConfigError("grid sweep is empty")
        for coarse, fine in zip(self.sweep[:-1], self.sweep[1:]):
            if fine != 2 * coarse:
                raise ConfigError(
                    f"sweep must double at every step, got {coarse} -> {fine}"
                )
        if self.mode == "successive" and len(self.sweep) < 2:
            raise ConfigError("successive errors need at least two grids")
        if self.preset is None and not self.problem:
            raise ConfigError("either a preset or an explicit [problem] block is required")
        self.net_config().validate()
        self.lm.validate()
        return self

    def to_dict(self):
        """Convert config to dictionary"""
        return asdict(self)

    def to_json(self):
        """Convert config to JSON string"""
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, config_dict):
        """Create config from dictionary"""
        config_dict = dict(config_dict)
        if isinstance(config_dict.get("lm"), dict):
            config_dict["lm"] = LMConfig.from_dict(config_dict["lm"])
        return cls(**config_dict)

    @classmethod
    def from_json(cls, json_str):
        """Create config from JSON string"""
        return cls.from_dict(json.loads(json_str))


def _parse_bool(value: str) -> bool:
    value = value.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: '{value}'")


def parse_sweep(text: str) -> List[int]:
    """Parse '64, 128, 256' (commas or spaces) into a list of ints"""
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"invalid grid sweep '{text}'") from exc


def load_config(path: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """
    Read a sectioned key-value config file

    Args:
        path: INI-style file with [experiment], [problem], [network], [training],
            [grid] and [output] sections
        base: Config whose values are overridden by the file (defaults if None)

    Returns:
        ExperimentConfig (not yet validated)
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep expression keys case-sensitive
    if not parser.read(path):
        raise ConfigError(f"cannot read config file '{path}'")

    config = ExperimentConfig.from_dict(base.to_dict()) if base else ExperimentConfig()

    try:
        if parser.has_section("experiment"):
            sec = parser["experiment"]
            config.name = sec.get("name", config.name)
            config.kind = sec.get("kind", config.kind)
            config.mode = sec.get("mode", config.mode)
            if "preset" in sec:
                preset = sec["preset"].strip()
                config.preset = preset or None
            if "seed" in sec:
                config.seed = sec.getint("seed")

        if parser.has_section("problem"):
            config.problem = {k: v.strip() for k, v in parser["problem"].items()}
            explicit_preset = (
                parser.has_section("experiment") and "preset" in parser["experiment"]
            )
            if not explicit_preset:
                config.preset = None

        if parser.has_section("network"):
            sec = parser["network"]
            config.width = sec.getint("width", config.width)
            config.n_samples = sec.getint("samples", config.n_samples)
            config.n_outputs = sec.getint("outputs", config.n_outputs)

        if parser.has_section("training"):
            sec = parser["training"]
            lm = config.lm
            lm.lambda0 = sec.getfloat("lambda0", lm.lambda0)
            lm.up_factor = sec.getfloat("up_factor", lm.up_factor)
            lm.down_factor = sec.getfloat("down_factor", lm.down_factor)
            lm.max_epochs = sec.getint("max_epochs", lm.max_epochs)
            lm.loss_tol = sec.getfloat("loss_tol", lm.loss_tol)
            lm.separable = sec.getboolean("separable", lm.separable)

        if parser.has_section("grid"):
            sec = parser["grid"]
            if "sweep" in sec:
                config.sweep = parse_sweep(sec["sweep"])

        if parser.has_section("output"):
            sec = parser["output"]
            config.out_dir = sec.get("out_dir", config.out_dir)
            if "db_path" in sec:
                config.db_path = sec["db_path"].strip() or None
            if "dump_fields" in sec:
                config.dump_fields = _parse_bool(sec["dump_fields"])
            if "retrain" in sec:
                config.retrain = _parse_bool(sec["retrain"])
            if "timings" in sec:
                config.timings = _parse_bool(sec["timings"])
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid value in '{path}': {exc}") from exc

    return config
