"""Configuration management for tsmb."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from tsmb.core.entities import SCHEMES, Family, FcmHyperparams, HmmHyperparams, SchemeId
from tsmb.data.dataset import DataFormat
from tsmb.models.de import DeParams
from tsmb.models.hmm import CovarianceType

DEFAULT_SIZES = list(range(3, 17))


class HmmConfig(BaseModel):
    """Baum-Welch settings."""

    max_iter: int = Field(default=50, ge=1)
    tol: float = Field(default=1e-3, ge=0.0)
    n_restarts: int = Field(default=10, ge=1)
    delta_observations: bool = False  # (value, delta) observations instead of raw values


class FuzzyConfig(BaseModel):
    """Fuzzy c-means settings."""

    m: float = Field(default=2.0, gt=1.0)
    tol: float = Field(default=1e-5, gt=0.0)
    max_iter: int = Field(default=300, ge=1)
    n_init: int = Field(default=1, ge=1)
    shared_centroids: bool = False


class FcmConfig(BaseModel):
    """Fuzzy cognitive map settings."""

    tau: float = Field(default=5.0, gt=0.0)
    de: DeParams = Field(default_factory=DeParams)


class ModelConfig(BaseModel):
    hmm: HmmConfig = Field(default_factory=HmmConfig)
    fuzzy: FuzzyConfig = Field(default_factory=FuzzyConfig)
    fcm: FcmConfig = Field(default_factory=FcmConfig)


class GridConfig(BaseModel):
    """Hyperparameter grids searched by cross-validation."""

    hmm_states: list[int] = Field(default_factory=lambda: list(DEFAULT_SIZES))
    cov_types: list[CovarianceType] = Field(default_factory=lambda: list(CovarianceType))
    fcm_concepts: list[int] = Field(default_factory=lambda: list(DEFAULT_SIZES))

    @field_validator("hmm_states", "cov_types", "fcm_concepts")
    @classmethod
    def _nonempty(cls, value: list[Any]) -> list[Any]:
        if not value:
            raise ValueError("grid must not be empty")
        return value

    @field_validator("hmm_states")
    @classmethod
    def _positive_states(cls, value: list[int]) -> list[int]:
        if min(value) < 1:
            raise ValueError("HMM state counts must be at least 1")
        return value

    @field_validator("fcm_concepts")
    @classmethod
    def _enough_concepts(cls, value: list[int]) -> list[int]:
        if min(value) < 2:
            raise ValueError("FCM concept counts must be at least 2")
        return value

    def hmm_points(self) -> list[HmmHyperparams]:
        points = {
            HmmHyperparams(n_states=n, cov_type=c) for n in self.hmm_states for c in self.cov_types
        }
        return sorted(points, key=lambda p: p.sort_key)

    def fcm_points(self) -> list[FcmHyperparams]:
        return [FcmHyperparams(n_concepts=p) for p in sorted(set(self.fcm_concepts))]

    def points(self, scheme: SchemeId) -> list[HmmHyperparams] | list[FcmHyperparams]:
        return self.hmm_points() if scheme.family is Family.HMM else self.fcm_points()


class RunConfig(BaseSettings):
    """Main configuration for training and benchmark runs."""

    model_config = SettingsConfigDict(env_prefix="TSMB_", env_nested_delimiter="__")

    # Data
    train_path: Path | None = None
    test_path: Path | None = None
    data_dir: Path | None = None
    datasets: list[str] = Field(default_factory=list)
    format: DataFormat = DataFormat.TS
    znorm: bool = False

    # Schemes and search
    schemes: list[str] = Field(default_factory=lambda: [str(s) for s in SCHEMES])
    grid: GridConfig = Field(default_factory=GridConfig)
    folds: int = Field(default=3, ge=2)

    # Sub-configs
    models: ModelConfig = Field(default_factory=ModelConfig)

    # Protocol
    seed: int | None = Field(default=None, ge=0)
    lenient_failures: bool = False
    reruns: int = Field(default=1, ge=1)
    jobs: int = -1  # joblib convention: -1 uses every core

    output_dir: Path = Path("results")

    @field_validator("schemes")
    @classmethod
    def _known_schemes(cls, value: list[str]) -> list[str]:
        if not value:
            raise ValueError("at least one scheme must be selected")
        parsed = [str(SchemeId.parse(v)) for v in value]
        return list(dict.fromkeys(parsed))

    @property
    def scheme_ids(self) -> list[SchemeId]:
        return [SchemeId.parse(s) for s in self.schemes]

    @classmethod
    def from_file(cls, path: Path | str, **overrides: Any) -> RunConfig:
        """Load configuration from a YAML or JSON file; ``overrides`` take precedence."""
        data = read_config_file(path)
        return cls(**deep_merge(data, overrides))


def read_config_file(path: Path | str) -> dict[str, Any]:
    source = Path(path)
    text = source.read_text(encoding="utf-8")
    if source.suffix.lower() == ".json":
        data = json.loads(text) if text.strip() else {}
    else:
        import yaml

        data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{source}: configuration must be a mapping")
    return data


def deep_merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Recursively merge ``overrides`` into a copy of ``base``."""
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged
