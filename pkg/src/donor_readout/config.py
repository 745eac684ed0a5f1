"""Scenario configuration: a versioned JSON document validated with pydantic.

Every block has defaults, so ``{}`` is a valid config describing GaAs at 5 K.
Unknown keys are rejected.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import dynamics, spectra
from .levels import LevelScheme, MaterialParams, material_preset, natural_linewidth, thz_to_mev
from .readout import ReadoutConfig, photon_budget_preset, quantum_well_preset

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MaterialConfig(_Block):
    """Explicit fields override the preset; ``None`` keeps the preset value.

    For the bare hydrogenic GaAs binding use preset ``GaAs-hydrogenic``.
    """

    preset: str | None = "GaAs"
    effective_mass_ratio: float | None = None
    dielectric_constant: float | None = None
    binding_energy_override: float | None = None

    def to_params(self) -> MaterialParams:
        base = material_preset(self.preset) if self.preset else None
        m = self.effective_mass_ratio if self.effective_mass_ratio is not None else (base and base.effective_mass_ratio)
        eps = self.dielectric_constant if self.dielectric_constant is not None else (base and base.dielectric_constant)
        if m is None or eps is None:
            raise ConfigError("material: set a preset or both effective_mass_ratio and dielectric_constant")
        override = self.binding_energy_override
        if override is None and base is not None:
            override = base.binding_energy_override
        return MaterialParams(m, eps, override)


class LevelsConfig(_Block):
    e_1s_2p: float | None = None
    e_d0x_binding: float = 1.0
    tau_d0x: float = 1.0
    t1: float = 350.0
    fir_photons_mev: list[float] = Field(default_factory=lambda: [6.73, 5.78, 4.31])


class NIRConfig(_Block):
    intensity: float = 1.0
    detuning: float = 0.0
    linewidth: float | None = None  # meV; None means lifetime-limited
    sat_intensity: float = 1.0


class FIRConfig(_Block):
    intensity: float = 0.0
    frequency_thz: float | None = 1.63
    photon_energy_mev: float | None = None
    sat_intensity_ionize: float = 10.0
    sat_intensity_bound: float = 10.0
    overlap: float = 1.0
    resonance_window: float = 0.05
    detuning_span: float = 1.0

    @model_validator(mode="before")
    @classmethod
    def _energy_replaces_frequency(cls, data):
        if isinstance(data, dict) and data.get("photon_energy_mev") is not None and "frequency_thz" not in data:
            data = {**data, "frequency_thz": None}
        return data

    @model_validator(mode="after")
    def _one_energy(self):
        if (self.frequency_thz is None) == (self.photon_energy_mev is None):
            raise ValueError("give exactly one of frequency_thz and photon_energy_mev")
        return self

    @property
    def photon_energy(self) -> float:
        if self.photon_energy_mev is not None:
            return self.photon_energy_mev
        return thz_to_mev(self.frequency_thz)


class ShelfConfig(_Block):
    branching: float
    lifetime: float


class RatesConfig(_Block):
    p_auger: float = 0.0075
    capture_rate: float = 0.01
    capture_to_excited: bool = False
    nir: NIRConfig = Field(default_factory=NIRConfig)
    fir: FIRConfig = Field(default_factory=FIRConfig)
    shelf: ShelfConfig | None = None


class PeakConfig(_Block):
    label: str
    center: float
    hom_width: float = 0.005
    inh_width: float = 0.030
    amplitude: float = 1.0
    kind: Literal["DirectD0X", "TES", "DplusX", "A0X", "FreeX"] = "DirectD0X"
    rotational_l: int | None = None


class SpectrumConfig(_Block):
    excitation_ev: float = spectra.OFF_RESONANT_EXCITATION
    mode: Literal["PL", "RELS"] = "RELS"
    e_min: float = 1.5080
    e_max: float = 1.5170
    step: float = spectra.DEFAULT_GRID_STEP_EV
    resolution: float = spectra.DEFAULT_RESOLUTION_MEV
    wing_cutoff: float = 0.5
    absorption_floor: float = 0.06
    elastic_gain: float | None = None
    calibrate_gain: bool = False


class ScanConfig(_Block):
    start: float = 1.5137
    stop: float = 1.5145
    step: float = 2e-6
    self_consistent: bool = False


class SaturationTarget(_Block):
    A: float = 31.0
    I0: float = 13.7


class DepleteConfig(_Block):
    intensities: list[float] = Field(default_factory=lambda: [float(i) for i in range(0, 26)])
    calibrate: SaturationTarget | None = Field(default_factory=SaturationTarget)


class SatfitConfig(_Block):
    data: str | None = None  # CSV (intensity, modulation); None uses the bundled replica
    points: list[tuple[float, float]] | None = None


class ReadoutSection(_Block):
    preset: Literal["photon-budget", "quantum-well", "rates"] = "photon-budget"
    window: float | None = None
    collection_efficiency: float = 0.1
    n_trials: int = 10_000
    count_elastic_only: bool = True
    workers: int = 1


class ThermalConfig(_Block):
    p_abs: float = 1e-3  # W
    tau: float = 1e-4  # s
    mass: float = 1e-5  # kg
    c_p: float = 0.05  # J/(kg K)
    temperatures: list[float] = Field(default_factory=lambda: [float(t) for t in range(2, 31)])


class ScenarioConfig(_Block):
    schema_version: Literal[1] = SCHEMA_VERSION
    material: MaterialConfig = Field(default_factory=MaterialConfig)
    levels: LevelsConfig = Field(default_factory=LevelsConfig)
    rates: RatesConfig = Field(default_factory=RatesConfig)
    peaks: list[PeakConfig] | None = None
    spectrum: SpectrumConfig = Field(default_factory=SpectrumConfig)
    scan: ScanConfig = Field(default_factory=ScanConfig)
    deplete: DepleteConfig = Field(default_factory=DepleteConfig)
    satfit: SatfitConfig = Field(default_factory=SatfitConfig)
    readout: ReadoutSection = Field(default_factory=ReadoutSection)
    thermal: ThermalConfig = Field(default_factory=ThermalConfig)
    seed: int = 0

    # Domain objects. Invariant violations surface as ConfigError.

    def material_params(self) -> MaterialParams:
        return _domain("material", self.material.to_params)

    def level_scheme(self) -> LevelScheme:
        lv = self.levels
        return _domain("levels", lambda: LevelScheme.from_material(
            self.material_params(), e_1s_2p=lv.e_1s_2p, e_d0x_binding=lv.e_d0x_binding,
            tau_d0x=lv.tau_d0x, t1=lv.t1,
        ))

    def rate_params(self) -> dynamics.RateParams:
        r, lv = self.rates, self.levels

        def build():
            nir = dynamics.NIRDrive(
                intensity=r.nir.intensity, detuning=r.nir.detuning,
                linewidth=r.nir.linewidth if r.nir.linewidth is not None else natural_linewidth(lv.tau_d0x),
                sat_intensity=r.nir.sat_intensity,
            )
            fir = dynamics.FIRDrive(
                intensity=r.fir.intensity, photon_energy=r.fir.photon_energy,
                sat_intensity_ionize=r.fir.sat_intensity_ionize,
                sat_intensity_bound=r.fir.sat_intensity_bound, overlap=r.fir.overlap,
                resonance_window=r.fir.resonance_window, detuning_span=r.fir.detuning_span,
            )
            shelf = dynamics.Shelf(r.shelf.branching, r.shelf.lifetime) if r.shelf else None
            return dynamics.RateParams(
                tau_d0x=lv.tau_d0x, t1=lv.t1, p_auger=r.p_auger, capture_rate=r.capture_rate,
                nir=nir, fir=fir, capture_to_excited=r.capture_to_excited, shelf=shelf,
            )

        return _domain("rates", build)

    def peak_table(self) -> spectra.PeakTable:
        if self.peaks is None:
            return spectra.default_peak_table()
        return _domain("peaks", lambda: spectra.PeakTable(
            tuple(spectra.Peak(**p.model_dump()) for p in self.peaks)
        ))

    def synth_settings(self, elastic_gain: float | None = None) -> spectra.SynthSettings:
        s = self.spectrum
        gain = elastic_gain if elastic_gain is not None else s.elastic_gain
        kw = {} if gain is None else {"elastic_gain": gain}
        return _domain("spectrum", lambda: spectra.SynthSettings(
            resolution=s.resolution, wing_cutoff=s.wing_cutoff,
            absorption_floor=s.absorption_floor, **kw,
        ))

    def readout_config(self) -> ReadoutConfig:
        ro = self.readout
        kw = dict(collection_efficiency=ro.collection_efficiency, n_trials=ro.n_trials,
                  rng_seed=self.seed, count_elastic_only=ro.count_elastic_only)
        if ro.window is not None:
            kw["window"] = ro.window

        def build():
            if ro.preset == "photon-budget":
                return photon_budget_preset(scheme=self.level_scheme(), **kw)
            if ro.preset == "quantum-well":
                return quantum_well_preset(**kw)
            return ReadoutConfig(rates=self.rate_params(), scheme=self.level_scheme(), **kw)

        return _domain("readout", build)

    def validate_domain(self) -> None:
        """Build every domain object once so that bad values fail before dispatch."""
        self.level_scheme()
        self.rate_params()
        self.peak_table()
        self.synth_settings()
        self.readout_config()


def _domain(key: str, build):
    try:
        return build()
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "invalid config:\n" + "\n".join(lines)


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    try:
        cfg = ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation(exc)}") from exc
    cfg.validate_domain()
    return cfg


def load_config(path: str | Path | None) -> ScenarioConfig:
    if path is None:
        return parse_config("{}")
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def dump_config(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
