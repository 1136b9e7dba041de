"""Tool configuration file: vehicle, barrier and per-stage defaults."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

from ._io import expect_schema
from .barrier import BarrierParams, LieContext
from .certify import CertifyConfig
from .errors import ConfigurationError, DomainError, IntegrityError
from .kbm import VehicleParams
from .sim import CampaignTemplate
from .synthesis import DEFAULT_K_TANGENTS, DEFAULT_N_SAMPLES, MAX_TANGENTS
from .verifier import VerifierConfig

CONFIG_SCHEMA = "shieldnn.config/1"


def _strict(cls, d: dict, section: str):
    if not isinstance(d, dict):
        raise ConfigurationError(f"section {section!r} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigurationError(f"unknown keys in {section!r}: {sorted(unknown)}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigurationError(f"bad {section!r} section: {exc}") from None


@dataclass(frozen=True)
class CertifySection:
    initial_grid: float = 0.05
    max_depth: int = 12
    margin: float = 0.0
    mode: str = "local"
    epsilon: float = 1e-3
    root_tol: float = 1e-10

    def verifier_config(self, threads: int = 1) -> VerifierConfig:
        cc = CertifyConfig(self.initial_grid, self.max_depth, self.margin, self.mode, threads)
        return VerifierConfig(cc, self.epsilon, self.root_tol)


@dataclass(frozen=True)
class SynthesisSection:
    k_tangents: int = DEFAULT_K_TANGENTS
    n_samples: int = DEFAULT_N_SAMPLES
    max_tangents: int = MAX_TANGENTS

    def __post_init__(self):
        if self.k_tangents < 2:
            raise ConfigurationError("k_tangents must be at least 2")


@dataclass(frozen=True)
class SimSection:
    controller: dict = field(default_factory=lambda: {"kind": "adversarial"})
    episodes: int = 500
    seed: int = 0
    dt: float = 1e-3
    t_max: float = 60.0
    r_escape: float | None = None
    start_margin: float = 0.0
    r_init_max: float | None = None
    hist_bins: int = 40

    def template(self, filter_on: bool) -> CampaignTemplate:
        return CampaignTemplate(dict(self.controller), filter_on, self.dt, self.t_max, self.r_escape,
                                self.start_margin, self.r_init_max, self.hist_bins)


@dataclass(frozen=True)
class ToolConfig:
    vehicle: VehicleParams
    barrier: BarrierParams
    certify: CertifySection = field(default_factory=CertifySection)
    synthesis: SynthesisSection = field(default_factory=SynthesisSection)
    sim: SimSection = field(default_factory=SimSection)

    @property
    def ctx(self) -> LieContext:
        return LieContext(self.vehicle, self.barrier)

    def to_dict(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA,
            "vehicle": self.vehicle.to_dict(),
            "barrier": self.barrier.to_dict(),
            "certify": asdict(self.certify),
            "synthesis": asdict(self.synthesis),
            "sim": asdict(self.sim),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ToolConfig":
        if not isinstance(d, dict):
            raise ConfigurationError("configuration must be a JSON object")
        if "schema" in d:
            try:
                expect_schema(d, CONFIG_SCHEMA)
            except IntegrityError as exc:
                raise ConfigurationError(str(exc)) from None
        unknown = set(d) - {"schema", "vehicle", "barrier", "certify", "synthesis", "sim"}
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        for key in ("vehicle", "barrier"):
            if key not in d:
                raise ConfigurationError(f"missing section {key!r}")
        try:
            vehicle = VehicleParams.from_dict(d["vehicle"])
            barrier = BarrierParams.from_dict(d["barrier"])
        except (DomainError, KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"invalid vehicle/barrier: {exc}") from None
        return cls(vehicle, barrier,
                   _strict(CertifySection, d.get("certify", {}), "certify"),
                   _strict(SynthesisSection, d.get("synthesis", {}), "synthesis"),
                   _strict(SimSection, d.get("sim", {}), "sim"))


def reference_config() -> ToolConfig:
    return ToolConfig(VehicleParams(2.0, 2.0, math.pi / 4, 20.0), BarrierParams(4.0, 0.48))
