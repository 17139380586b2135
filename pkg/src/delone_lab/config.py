"""Experiment configuration schema with environment overrides."""

from __future__ import annotations

import hashlib
import json
import os
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ENV_PREFIX = "DELONE_LAB_"
KINDS = ("gen", "verify-delone", "spectrum", "good-scale", "ilse", "ucp1d", "lift", "patterns")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryConfig(_Strict):
    kind: Literal["lattice", "perturbed", "file"] = "lattice"
    spacing: float = Field(1.0, gt=0)
    rho: float = Field(0.3, ge=0, lt=1)
    window: float | None = Field(None, gt=0, description="patch side; default 1.5 L + 10")
    path: str | None = None
    seed: int = 0

    @model_validator(mode="after")
    def _file_needs_path(self):
        if self.kind == "file" and not self.path:
            raise ValueError("geometry kind 'file' needs a path")
        return self


class PairConfig(_Strict):
    kind: Literal["annulus", "shifted"] = "shifted"
    shift: float = 0.5
    seed: int = 0


class BumpConfig(_Strict):
    u_minus: float = Field(0.5, gt=0, le=1)
    delta_minus: float = Field(0.06, gt=0)
    delta_plus: float = Field(0.1, gt=0)
    profile: Literal["flat", "tent"] = "flat"

    @model_validator(mode="after")
    def _ordered(self):
        if not self.delta_minus < self.delta_plus:
            raise ValueError("need delta_minus < delta_plus")
        return self


class ModelConfig(_Strict):
    dim: Literal[1, 2] = 1
    geometry: GeometryConfig = GeometryConfig()
    pair: PairConfig = PairConfig()
    bump: BumpConfig = BumpConfig()
    beta: float = Field(0.5, gt=0, lt=1)
    free_sites_R: float | None = Field(None, gt=0, description="R' for the D0/S split")


class GridConfig(_Strict):
    h: float = Field(0.0125, gt=0, description="node spacing; L must be a multiple of h")


class DeloneParams(_Strict):
    r: float = Field(1.0, gt=0)
    R: float = Field(2.0, gt=0)
    target: Literal["base", "extra", "union"] = "base"

    @model_validator(mode="after")
    def _order(self):
        if not self.r <= self.R:
            raise ValueError("need r <= R")
        return self


class SpectrumParams(_Strict):
    k: int = Field(5, ge=1)
    method: Literal["auto", "dense", "lanczos", "tridiagonal"] = "auto"
    disorder: Literal["background", "sample", "ones"] = "sample"
    coo: bool = False


class GoodScaleParams(_Strict):
    E: float | None = None
    E_fraction: float = Field(0.5, ge=0, description="E = E0 + f (lambda0(omega = 1) - E0) when E unset")
    m: float = Field(0.05, gt=0)
    zeta: float = Field(0.5, gt=0, lt=1)
    p: float = Field(0.1, gt=0)
    pair_budget: int = Field(10, ge=1)
    block_width: float | None = Field(None, gt=0)


class IlseConfig(_Strict):
    p: float = Field(1.0, gt=0)
    epsilon: float = Field(0.1, gt=0)
    C_d: float = Field(1.0, gt=0)
    zeta: float = Field(0.5, gt=0, lt=1)
    R0: float | None = Field(None, gt=0, description="default 3 R' with free sites, else R of D'")


class UcpConfig(_Strict):
    s: float | None = Field(None, gt=0, description="window length; default delta_minus")
    M: float = Field(2.0, gt=0)
    k: int = Field(5, ge=1)

    @model_validator(mode="after")
    def _order(self):
        if self.s is not None and not self.s < self.M:
            raise ValueError("need s < M")
        return self


class LiftConfig(_Strict):
    s: float | None = Field(None, gt=0)
    M: float = Field(2.0, gt=0)
    t_grid: list[float] = Field(default_factory=lambda: [round(0.1 * i, 12) for i in range(1, 11)])
    C_minus: float | None = Field(None, gt=0)

    @field_validator("t_grid")
    @classmethod
    def _in_unit(cls, v):
        if not v or any(not 0 < t <= 1 for t in v):
            raise ValueError("t_grid values must lie in (0, 1]")
        return v


class PatternConfig(_Strict):
    K_centre: list[float] | None = None
    K_side: float = Field(3.0, gt=0)
    search_side: float | None = Field(None, gt=0)


class ExperimentConfig(_Strict):
    kind: Literal[KINDS] = "good-scale"  # type: ignore[valid-type]
    model: ModelConfig = ModelConfig()
    grid: GridConfig = GridConfig()
    x: list[float] | None = None
    L: float = Field(20.0, gt=0)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    n_trials: int = Field(200, ge=1)
    threads: int = Field(1, ge=1)
    out: str = "out"
    delone: DeloneParams = DeloneParams()
    spectrum: SpectrumParams = SpectrumParams()
    good_scale: GoodScaleParams = GoodScaleParams()
    ilse: IlseConfig = IlseConfig()
    ucp: UcpConfig = UcpConfig()
    lift: LiftConfig = LiftConfig()
    patterns: PatternConfig = PatternConfig()

    @model_validator(mode="after")
    def _consistency(self):
        if self.x is not None and len(self.x) != self.model.dim:
            raise ValueError("x must have one coordinate per dimension")
        if self.kind == "good-scale" and self.n_trials < 30:
            raise ValueError("good-scale needs n_trials >= 30")
        h = self.h
        if h > self.model.bump.delta_minus / 4 + 1e-12:
            raise ValueError("grid spacing must satisfy h <= delta_minus / 4")
        n = self.L / h
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError(f"L = {self.L} is not a multiple of h = {h}")
        return self

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def centre(self):
        return list(self.x) if self.x is not None else [0.0] * self.model.dim

    @property
    def window(self) -> float:
        g = self.model.geometry
        return g.window if g.window is not None else 1.5 * self.L + 10.0

    def hash(self) -> str:
        """SHA-256 of the canonical config, excluding fields that never change results."""
        data = self.model_dump(mode="json", exclude={"out", "threads"})
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _deep_set(data: dict, dotted: str, value):
    keys = dotted.split(".")
    cur = data
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
    cur[keys[-1]] = value


def load_config(path=None, overrides: dict | None = None, environ=None) -> ExperimentConfig:
    """Read a YAML/JSON config and apply environment then explicit overrides.

    Environment variables ``DELONE_LAB_SEED``, ``DELONE_LAB_TRIALS``,
    ``DELONE_LAB_OUT`` and ``DELONE_LAB_THREADS`` mirror the CLI flags;
    ``DELONE_LAB_CONFIG`` supplies the path when none is given.
    """
    environ = os.environ if environ is None else environ
    path = path or environ.get(ENV_PREFIX + "CONFIG")
    data = {}
    if path:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError("config root must be a mapping")
    env_map = {"SEED": "seed", "TRIALS": "n_trials", "OUT": "out", "THREADS": "threads"}
    for env, key in env_map.items():
        if ENV_PREFIX + env in environ:
            raw = environ[ENV_PREFIX + env]
            data[key] = raw if key == "out" else int(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            _deep_set(data, key, value)
    return ExperimentConfig.model_validate(data)


__all__ = ["ENV_PREFIX", "KINDS", "ExperimentConfig", "load_config"]
