"""TOML experiment configuration: one document with fiber, GOP, weight, scenario and training sections."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .qot import FiberParams
from .rsa import CostWeights
from .simulator import ConfigError, ScenarioConfig
from .video import GopModel, QualityEstimator

DEFAULT_MODEL = "default"


@dataclass(frozen=True)
class TrainConfig:
    ber_min: float = 1e-9
    ber_max: float = 10**-4.5
    ber_points: int = 25
    gop_count: int = 10_000
    seed: int = 1
    train_fraction: float = 2 / 3
    spread: float = 0.1  # in normalised log10(BER) units
    mse_goal: float = 1e-3
    max_neurons: int = 50
    monotone: bool = True

    def check(self) -> None:
        if not 0 < self.ber_min < self.ber_max < 1:
            raise ConfigError("need 0 < ber_min < ber_max < 1")
        if self.ber_points < 2 or self.gop_count < 1:
            raise ConfigError("need ber_points >= 2 and gop_count >= 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.spread <= 0 or self.mse_goal < 0 or self.max_neurons < 0:
            raise ConfigError("spread must be positive; mse_goal and max_neurons non-negative")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = ScenarioConfig()
    gop: GopModel = GopModel()
    train: TrainConfig = TrainConfig()
    # directory that relative paths in the document resolve against
    base_dir: Path = field(default_factory=Path.cwd, compare=False)


def _build(cls, section: Mapping[str, Any], name: str, **fixed):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    # TOML arrays arrive as lists; the dataclasses use tuples
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in section.items()}
    kwargs.update(fixed)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from None


def parse_config(doc: Mapping[str, Any], base_dir: Optional[Path] = None) -> ExperimentConfig:
    unknown = set(doc) - {"fiber", "gop", "weights", "scenario", "train"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    fiber = _build(FiberParams, doc.get("fiber", {}), "fiber")
    gop = _build(GopModel, doc.get("gop", {}), "gop")
    weights = _build(CostWeights, doc.get("weights", {}), "weights")
    scen = dict(doc.get("scenario", {}))
    for nested in ("fiber", "weights"):
        if nested in scen:
            raise ConfigError(f"put {nested} settings in their own [{nested}] section")
    scenario = _build(ScenarioConfig, scen, "scenario", fiber=fiber, weights=weights)
    scenario = scenario.with_(load_points=tuple(float(x) for x in scenario.load_points),
                              slot_demand=tuple(int(x) for x in scenario.slot_demand))
    train = _build(TrainConfig, doc.get("train", {}), "train")
    scenario.check()
    train.check()
    return ExperimentConfig(scenario, gop, train, base_dir or Path.cwd())


def load_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(doc, path.parent.resolve())


def resolve_estimator(ref: str, base_dir: Optional[Path] = None) -> QualityEstimator:
    """Load the estimator a scenario names: the bundled default or a JSON file path."""
    if ref == DEFAULT_MODEL:
        text = resources.files("eonvideo.data").joinpath("default_estimator.json").read_text()
        return QualityEstimator.from_json(text)
    path = Path(ref)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    if not path.exists():
        raise ConfigError(f"estimator model file not found: {path}")
    return QualityEstimator.load(path)
