# app/models/run_config.py
"""
Schema of the run-configuration file: the serialized output of the analysis stage.

One JSON document, validated with pydantic. Every section is optional; a command only
reads the sections it needs.
"""
from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

CONFIG_VERSION = 1
STRATEGIES = ("exhaustive", "kway", "random", "optimal")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FrameworkSection(_Section):
    """Which bundled framework to instantiate and how."""

    name: str = Field(description="Bundled framework name, e.g. 'sine', 'classifier', 'bitset' or 'synth_recognizer'.")
    seeds: Optional[int] = Field(default=None, gt=0, description="Number of seeds the bundled framework generates.")
    options: dict[str, Any] = Field(default_factory=dict, description="Framework-specific options.")


class LimitsSection(_Section):
    max_pool_size: int = Field(default=10000, gt=0)
    max_depth: int = Field(default=8, gt=0)
    distinct_only: bool = Field(default=False, description="Exclude k-way tuples that repeat a datamorphism.")
    param_grid: Optional[dict[str, list[dict[str, Any]]]] = Field(
        default=None, description="Per-datamorphism list of parameter sets, datums in tagged JSON."
    )


class GaSection(_Section):
    population_cap: int = Field(default=20, gt=0)
    generations: int = Field(default=10, ge=0)
    tournament_size: int = Field(default=2, gt=0)
    elitism_count: int = Field(default=1, ge=1)
    fitness: str = Field(default="max_numeric")
    patience: Optional[int] = Field(default=None, gt=0)


class GenerateSection(_Section):
    strategy: Literal["exhaustive", "kway", "random", "optimal"]
    k: int = Field(default=1, ge=0)
    count: int = Field(default=100, ge=0)
    stop_at_kway: Optional[int] = Field(default=None, ge=0)
    limits: LimitsSection = Field(default_factory=LimitsSection)
    ga: GaSection = Field(default_factory=GaSection)


class SubjectSection(_Section):
    """Either a bundled subject name or an external command line."""

    name: Optional[str] = None
    command: Optional[list[str]] = None
    timeout_ms: int = Field(default=5000, gt=0)
    max_restarts: int = Field(default=2, ge=0)

    @model_validator(mode="after")
    def _exactly_one_source(self) -> "SubjectSection":
        if (self.name is None) == (self.command is None):
            raise ValueError("subject needs exactly one of 'name' or 'command'")
        if self.command is not None and not self.command:
            raise ValueError("subject command must not be empty")
        return self


class ExploreSection(_Section):
    a: float = 0.0
    b: float = 1.0
    epsilon: float = Field(default=1e-6, gt=0)
    max_iterations: int = Field(default=64, gt=0)
    distance: str = "default"


class OutputSection(_Section):
    pool: Optional[str] = None
    records: Optional[str] = None
    verdicts: Optional[str] = None
    report: Optional[str] = None
    format: Literal["csv", "json"] = "json"


class RunConfig(_Section):
    version: Literal[1] = Field(description="Configuration format version.")
    framework: Optional[FrameworkSection] = None
    generate: Optional[GenerateSection] = None
    subject: Optional[SubjectSection] = None
    explore: Optional[ExploreSection] = None
    output: OutputSection = Field(default_factory=OutputSection)
    rng_seed: int = Field(default=0, ge=0, lt=2**64)
    strict: bool = False
    workers: Optional[int] = Field(default=None, gt=0)
