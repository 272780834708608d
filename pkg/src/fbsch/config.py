"""YAML run configuration.

Example::

    model:
      a0: 0.3333333333333333
      a1: 0.3333333333333333
      a2: -0.3333333333333333
      a3: 0.3333333333333333
      sigma: 0.3333333333333333
      h1: 0.5
      h2: 0.75
      T: 1.0
      initial: "1/3 + sqrt(3)*cos(x)/3"
    discretization:
      m_ref: 1024
      n_ref: 64
      levels: [8, 16, 32, 64, 128]
    study:
      mode: temporal
      trajectories: 200
      seed: 2024
    output:
      directory: out

``levels`` lists M values in temporal mode, N values in spatial mode and
``[M, N]`` pairs in joint mode. Unknown keys are rejected.
"""
from __future__ import annotations

import os
from typing import Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .harness import StudyConfig
from .model import InitialExpression, ModelParams
from .noise import HurstPair

SEED_ENV = "FBSCH_SEED"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Strict):
    a0: float = 1 / 3
    a1: float = 1 / 3
    a2: float = -1 / 3
    a3: float = 1 / 3
    sigma: float = Field(1 / 3, ge=0)
    h1: float = Field(0.5, ge=0.5, lt=1.0)
    h2: float = Field(0.75, ge=0.5, lt=1.0)
    T: float = Field(1.0, gt=0)
    initial: str = "1/3 + sqrt(3)*cos(x)/3"
    drift_enabled: bool = True

    @field_validator("initial")
    @classmethod
    def _parses(cls, v):
        InitialExpression(v)
        return v

    @model_validator(mode="after")
    def _leading(self):
        if self.drift_enabled and self.a0 <= 0:
            raise ValueError("a0 must be positive when the drift is enabled")
        return self

    def params(self) -> ModelParams:
        return ModelParams(self.a0, self.a1, self.a2, self.a3, self.sigma, HurstPair(self.h1, self.h2),
                           self.initial, self.T, self.drift_enabled)


class DiscretizationSection(_Strict):
    m_ref: int = Field(1024, ge=1)
    n_ref: int = Field(64, ge=2)
    levels: Union[list[int], list[tuple[int, int]]] = Field(default_factory=lambda: [8, 16, 32, 64, 128])


class StudySection(_Strict):
    mode: Literal["temporal", "spatial", "joint"] = "temporal"
    trajectories: int = Field(200, ge=2)
    seed: int = Field(2024, ge=0, lt=2**64)
    chunk: int = Field(20, ge=1)


class OutputSection(_Strict):
    directory: str = "out"
    formats: list[Literal["csv", "gnuplot", "text"]] = Field(default_factory=lambda: ["csv", "gnuplot", "text"])


class RunConfig(_Strict):
    model: ModelSection = Field(default_factory=ModelSection)
    discretization: DiscretizationSection = Field(default_factory=DiscretizationSection)
    study: StudySection = Field(default_factory=StudySection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _levels_divide(self):
        self.study_config()
        return self

    def study_config(self) -> StudyConfig:
        d, s = self.discretization, self.study
        params = self.model.params()
        kw = dict(trajectories=s.trajectories, seed=s.seed, chunk=s.chunk)
        if s.mode == "joint":
            if not all(isinstance(lv, (tuple, list)) for lv in d.levels):
                raise ValueError("joint mode needs [M, N] pairs as levels")
            return StudyConfig(params, d.n_ref, d.m_ref, tuple(tuple(lv) for lv in d.levels), mode="joint", **kw)
        if not all(isinstance(lv, int) for lv in d.levels):
            raise ValueError(f"{s.mode} mode needs a flat list of integers as levels")
        if s.mode == "temporal":
            return StudyConfig.temporal(params, d.n_ref, d.m_ref, d.levels, **kw)
        return StudyConfig.spatial(params, d.n_ref, d.m_ref, d.levels, **kw)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read ``path`` (or defaults), apply the seed env var, then dotted overrides like ``{"model.h1": 0.75}``."""
    data = {}
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: top level must be a mapping")
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        data.setdefault("study", {}).setdefault("seed", int(env_seed))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, name = key.partition(".")
        data.setdefault(section, {})[name] = value
    return RunConfig.model_validate(data)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)
