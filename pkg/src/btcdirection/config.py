"""Pipeline configuration: schema, loading and the artifact-binding hash."""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .features import Kind
from .ingestion import Category, Rule
from .models import REGISTRY

OUT_ENV = "BTCDIRECTION_OUT"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CalendarSpec(_Strict):
    start: dt.date
    end: dt.date

    @model_validator(mode="after")
    def _ordered(self):
        if self.start > self.end:
            raise ValueError("calendar start is after end")
        return self


class FeatureSpec(_Strict):
    base_columns: Union[list[str], Literal["internal"]] = "internal"
    kinds: list[Kind] = Field(default_factory=lambda: list(Kind))
    windows: list[int] = Field(default_factory=lambda: [3, 7, 14, 30, 90])
    lag: int = Field(1, ge=1)

    @field_validator("windows")
    @classmethod
    def _windows(cls, v):
        if any(w < 2 for w in v):
            raise ValueError("indicator windows must be >= 2")
        return v


class ReduceSpec(_Strict):
    evr_targets: list[float] = Field(default_factory=lambda: [0.80, 0.90, 0.95])

    @field_validator("evr_targets")
    @classmethod
    def _targets(cls, v):
        if not v or any(not 0 < t <= 1 for t in v):
            raise ValueError("explained-variance targets must lie in (0, 1]")
        return v


class ValidationSpec(_Strict):
    outer_k: int = Field(5, ge=2)
    inner_k: int = Field(3, ge=2)
    min_train_fraction: float = Field(0.5, gt=0, lt=1)
    budget: int = Field(8, ge=1)
    init_points: int = Field(5, ge=1)

    @model_validator(mode="after")
    def _budget(self):
        if self.budget < self.init_points:
            raise ValueError("validation.budget must be >= validation.init_points")
        return self


class NumericParam(_Strict):
    lower: float
    upper: float
    scale: Literal["linear", "log"] = "linear"
    integer: bool = False
    when: Optional[dict[str, Any]] = None


class CategoricalParam(_Strict):
    values: list[Any] = Field(min_length=1)


class ModelSpec(_Strict):
    params: dict[str, Union[CategoricalParam, NumericParam]] = Field(default_factory=dict)
    fixed: dict[str, Any] = Field(default_factory=dict)


class TradingSpec(_Strict):
    start: dt.date
    end: dt.date
    taus: list[float] = Field(default_factory=lambda: [round(0.1 * i, 1) for i in range(11)])
    headline_tau: float = Field(0.3, ge=0, le=1)

    @field_validator("taus")
    @classmethod
    def _taus(cls, v):
        if not v or any(not 0 <= t <= 1 for t in v):
            raise ValueError("risk tolerances must lie in [0, 1]")
        return v


class LeakDemoSpec(_Strict):
    kind: str = "RandomForest"
    hp: dict[str, Any] = Field(default_factory=lambda: {"n_trees": 30, "max_depth": None, "max_features_fraction": 0.5})
    seeds: int = Field(10, ge=1)
    test_fraction: float = Field(0.2, gt=0, lt=1)
    evr_target: Optional[float] = None


class AuditSpec(_Strict):
    allow_leakage_for_demo: bool = False
    leak_demo: LeakDemoSpec = Field(default_factory=LeakDemoSpec)


class PipelineConfig(_Strict):
    """Everything a pipeline run depends on."""

    manifest: str
    calendar: CalendarSpec
    target_column: str = "btc.price"
    imputation: dict[Category, Rule] = Field(
        default_factory=lambda: {
            Category.INTERNAL: Rule.LINEAR,
            Category.MARKET_PRICE: Rule.FORWARD_FILL,
            Category.MARKET_VOLUME: Rule.ZERO,
            Category.ECONOMIC: Rule.FORWARD_FILL,
        }
    )
    features: FeatureSpec = Field(default_factory=FeatureSpec)
    reduce: ReduceSpec = Field(default_factory=ReduceSpec)
    validation: ValidationSpec = Field(default_factory=ValidationSpec)
    models: dict[str, ModelSpec]
    trading: TradingSpec
    audit: AuditSpec = Field(default_factory=AuditSpec)
    seed: int = 42
    output_dir: str = "runs"

    # set by load_config; not part of the schema or the hash
    _base_dir: Path = Path(".")

    @field_validator("models")
    @classmethod
    def _known_models(cls, v):
        unknown = set(v) - set(REGISTRY)
        if unknown:
            raise ValueError(f"unknown model kinds {sorted(unknown)}; known: {sorted(REGISTRY)}")
        if not v:
            raise ValueError("at least one model is required")
        return v

    @model_validator(mode="after")
    def _trading_inside_calendar(self):
        t, c = self.trading, self.calendar
        if not (c.start <= t.start <= t.end <= c.end):
            raise ValueError("trading range must lie inside the calendar")
        return self

    def manifest_path(self) -> Path:
        p = Path(self.manifest)
        return p if p.is_absolute() else self._base_dir / p

    def hashed_fields(self) -> dict:
        return self.model_dump(mode="json", exclude={"output_dir"})

    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def resolve_output_dir(self, override: str | Path | None = None) -> Path:
        if override is not None:
            return Path(override)
        env = os.environ.get(OUT_ENV)
        if env:
            return Path(env)
        p = Path(self.output_dir)
        return p if p.is_absolute() else self._base_dir / p


class ConfigError(ValueError):
    pass


def json_schema() -> dict:
    return PipelineConfig.model_json_schema()


def parse_config(doc: dict, base_dir: str | Path = ".") -> PipelineConfig:
    try:
        cfg = PipelineConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    cfg._base_dir = Path(base_dir)
    return cfg


def load_config(path: str | Path, seed: int | None = None) -> PipelineConfig:
    """Read a YAML or JSON config; ``seed`` overrides the file's seed."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    if seed is not None:
        doc["seed"] = seed
    return parse_config(doc, path.parent)
