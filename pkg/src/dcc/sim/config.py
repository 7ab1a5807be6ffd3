"""Scenario files: YAML validated against a closed schema.

Unknown keys anywhere are rejected, and every economy section is checked by
building the corresponding configuration object, so out-of-range values fail
at load time rather than mid-run.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from dcc.canonical import as_fraction
from dcc.errors import ConfigInvalid, DCCError
from dcc.sim.agents import POLICY_DEFAULTS, POLICY_NAMES, DEFAULT_ENDOWMENT
from dcc.system import Params

Rational = Union[str, int, float]


def _rational(value) -> str:
    try:
        frac = as_fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational: {value!r}") from exc
    return f"{frac.numerator}/{frac.denominator}"


class _Closed(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProjectTemplate(_Closed):
    """A project a creator of ``creator`` policy opens every ``every`` epochs."""

    creator: str = "honest-creator"
    start: int = Field(0, ge=0)
    every: int = Field(5, ge=1)
    target: int = Field(200, gt=0)
    duration: int = Field(3, ge=1)
    marketing_proportion: Rational = "1/5"
    tranches: list[Rational] = Field(default_factory=lambda: ["1/2", "1/2"])
    labor_conversion: Optional[Rational] = None
    acceptance_threshold: Rational = "1/2"

    @field_validator("marketing_proportion", "acceptance_threshold", "labor_conversion")
    @classmethod
    def _rat(cls, v):
        return None if v is None else _rational(v)

    @field_validator("tranches")
    @classmethod
    def _schedule(cls, v):
        fracs = [_rational(x) for x in v]
        if not fracs or sum(Fraction(x) for x in fracs) != 1 or any(Fraction(x) <= 0 for x in fracs):
            raise ValueError("tranche fractions must be positive and sum to 1")
        return fracs

    @field_validator("creator")
    @classmethod
    def _policy(cls, v):
        if v not in POLICY_NAMES:
            raise ValueError(f"unknown policy {v!r}")
        return v

    def schedule(self) -> list:
        if self.labor_conversion is None:
            return list(self.tranches)
        return [[f, self.labor_conversion] for f in self.tranches]


class Disturbance(_Closed):
    """Multiplies plagiarist output from ``start`` for ``duration`` epochs (forever if unset)."""

    start: int = Field(ge=0)
    duration: Optional[int] = Field(None, ge=1)
    plagiarism_multiplier: float = Field(4.0, ge=1.0)

    def active(self, epoch: int) -> bool:
        if epoch < self.start:
            return False
        return self.duration is None or epoch < self.start + self.duration


class ScenarioConfig(_Closed):
    seed: int = Field(ge=0, lt=2**64)
    epochs: int = Field(ge=0)
    agents: dict[str, int] = Field(default_factory=dict)
    policy_params: dict[str, dict[str, float]] = Field(default_factory=dict)
    endowment: dict[str, int] = Field(default_factory=dict)
    platform_nodes: int = Field(2, ge=0, le=99)
    projects: list[ProjectTemplate] = Field(default_factory=list)
    gas_fee: int = Field(1, ge=0)
    conversion_phases: int = Field(4, ge=1)
    election_interval: int = Field(1, ge=1)
    regulation_interval: int = Field(1, ge=1)
    initial_credit: int = Field(60, ge=0, le=100)
    ledger: dict = Field(default_factory=dict)
    crowdfunding: dict = Field(default_factory=dict)
    governance: dict = Field(default_factory=dict)
    parameters: dict = Field(default_factory=dict)
    supervision: dict = Field(default_factory=dict)
    regulator: dict = Field(default_factory=dict)
    disturbance: Optional[Disturbance] = None
    expect_recovery_within: Optional[int] = Field(None, ge=1)

    @field_validator("agents", "endowment")
    @classmethod
    def _known_policies(cls, v):
        for name, n in v.items():
            if name not in POLICY_NAMES:
                raise ValueError(f"unknown policy {name!r}")
            if n < 0:
                raise ValueError(f"{name}: negative value")
            if n > 999:
                raise ValueError(f"{name}: at most 999 agents per policy")
        return v

    @field_validator("policy_params")
    @classmethod
    def _known_params(cls, v):
        for name, params in v.items():
            if name not in POLICY_DEFAULTS:
                raise ValueError(f"unknown policy {name!r}")
            unknown = set(params) - set(POLICY_DEFAULTS[name])
            if unknown:
                raise ValueError(f"{name}: unknown parameters {sorted(unknown)}")
            for key, value in params.items():
                if value < 0:
                    raise ValueError(f"{name}.{key} must be non-negative")
        return v

    @model_validator(mode="after")
    def _economy(self):
        try:
            self.build_params()
        except (TypeError, ValueError, ArithmeticError, DCCError) as exc:
            raise ValueError(f"economy parameters rejected: {exc}") from exc
        return self

    def build_params(self) -> Params:
        return Params.from_dict({
            "initial_credit": self.initial_credit,
            "platform_nodes": platform_accounts(self.platform_nodes),
            "ledger": self.ledger,
            "crowdfunding": self.crowdfunding,
            "governance": self.governance,
            "parameters": self.parameters,
            "supervision": self.supervision,
            "regulator": self.regulator,
        })

    def policy(self, name: str) -> dict[str, float]:
        return POLICY_DEFAULTS[name] | self.policy_params.get(name, {})

    def endowment_of(self, name: str) -> int:
        return self.endowment.get(name, DEFAULT_ENDOWMENT.get(name, 0))


def platform_accounts(n: int) -> list[str]:
    return [f"platform-{i:02d}" for i in range(n)]


def parse_config(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"unreadable YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigInvalid("scenario must be a mapping")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigInvalid(str(exc)) from None


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc}") from None
    return parse_config(text)
