"""Hydrogenic donor level structure and THz photon classification.

Energies are in meV, frequencies in THz.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

RYDBERG_MEV = 13606.0
PLANCK_MEV_PER_THZ = 4.1357
HBAR_MEV_NS = 6.582119569e-4

DEFAULT_RESONANCE_WINDOW = 0.05
DEFAULT_DETUNING_SPAN = 1.0
HYDROGEN_1S_2P_RATIO = 0.75


@dataclass(frozen=True)
class MaterialParams:
    effective_mass_ratio: float
    dielectric_constant: float
    binding_energy_override: float | None = None

    def __post_init__(self):
        if not self.effective_mass_ratio > 0:
            raise ValueError(f"effective_mass_ratio must be > 0, got {self.effective_mass_ratio}")
        if not self.dielectric_constant >= 1:
            raise ValueError(f"dielectric_constant must be >= 1, got {self.dielectric_constant}")
        if self.binding_energy_override is not None and not self.binding_energy_override > 0:
            raise ValueError(
                f"binding_energy_override must be > 0, got {self.binding_energy_override}"
            )


# Built-in material table. GaAs uses the measured S/Si donor binding energy.
MATERIAL_PRESETS: dict[str, MaterialParams] = {
    "GaAs": MaterialParams(0.067, 12.9, binding_energy_override=5.9),
    "GaAs-hydrogenic": MaterialParams(0.067, 12.9),
    "hydrogen": MaterialParams(1.0, 1.0),
}


def material_preset(name: str) -> MaterialParams:
    try:
        return MATERIAL_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown material preset {name!r}; known: {sorted(MATERIAL_PRESETS)}") from None


def hydrogenic_binding(m: MaterialParams) -> float:
    """Effective-mass Rydberg, ignoring any override."""
    return RYDBERG_MEV * m.effective_mass_ratio / m.dielectric_constant**2


def scaled_rydberg(m: MaterialParams) -> float:
    """Donor 1S binding energy in meV.

    The override (a measured, central-cell-corrected value) wins over the
    hydrogenic scaling when present.
    """
    if m.binding_energy_override is not None:
        return float(m.binding_energy_override)
    return hydrogenic_binding(m)


def transition_1s_2p(binding: float) -> float:
    if not binding > 0:
        raise ValueError(f"binding energy must be > 0, got {binding}")
    return HYDROGEN_1S_2P_RATIO * binding


def thz_to_mev(f: float) -> float:
    if f < 0:
        raise ValueError(f"frequency must be >= 0, got {f}")
    return f * PLANCK_MEV_PER_THZ


def mev_to_thz(e: float) -> float:
    if e < 0:
        raise ValueError(f"energy must be >= 0, got {e}")
    return e / PLANCK_MEV_PER_THZ


def natural_linewidth(tau_ns: float) -> float:
    """Lifetime-limited FWHM (meV) of a transition with radiative lifetime ``tau_ns``."""
    return HBAR_MEV_NS / tau_ns


@dataclass(frozen=True)
class LevelScheme:
    """Energies (meV) and lifetimes (ns) of the four-state donor model."""

    e_1s_binding: float
    e_1s_2p: float
    e_d0x_binding: float = 1.0
    tau_d0x: float = 1.0
    t1: float = 350.0

    def __post_init__(self):
        if not 0 < self.e_1s_2p < self.e_1s_binding:
            raise ValueError(
                f"need 0 < e_1s_2p < e_1s_binding, got {self.e_1s_2p} and {self.e_1s_binding}"
            )
        if not self.e_d0x_binding > 0:
            raise ValueError("e_d0x_binding must be > 0")
        if not (self.tau_d0x > 0 and self.t1 > 0):
            raise ValueError("lifetimes must be > 0")

    @classmethod
    def from_material(cls, m: MaterialParams, e_1s_2p: float | None = None, **kw) -> LevelScheme:
        binding = scaled_rydberg(m)
        if e_1s_2p is None:
            e_1s_2p = transition_1s_2p(binding)
        return cls(e_1s_binding=binding, e_1s_2p=e_1s_2p, **kw)


class FIRClass(str, enum.Enum):
    IONIZING = "Ionizing"
    BOUND_BOUND_RESONANT = "BoundBoundResonant"
    BOUND_BOUND_DETUNED = "BoundBoundDetuned"
    SUB_RESONANT = "SubResonant"

    @property
    def is_bound_bound(self) -> bool:
        return self in (FIRClass.BOUND_BOUND_RESONANT, FIRClass.BOUND_BOUND_DETUNED)


def classify_fir(
    photon: float,
    scheme: LevelScheme,
    resonance_window: float = DEFAULT_RESONANCE_WINDOW,
    detuning_span: float = DEFAULT_DETUNING_SPAN,
) -> FIRClass:
    """Classify a THz photon energy (meV) against the donor levels.

    The ionization edge is closed: ``photon == e_1s_binding`` is ionizing.
    Photons between the 1S-2P line and the edge (outside the resonance
    window) count as detuned bound-bound excitation.
    """
    if photon < 0 or math.isnan(photon):
        raise ValueError(f"photon energy must be >= 0, got {photon}")
    if not resonance_window > 0:
        raise ValueError("resonance_window must be > 0")
    if photon >= scheme.e_1s_binding:
        return FIRClass.IONIZING
    if abs(photon - scheme.e_1s_2p) <= resonance_window:
        return FIRClass.BOUND_BOUND_RESONANT
    if photon >= scheme.e_1s_2p - detuning_span:
        return FIRClass.BOUND_BOUND_DETUNED
    return FIRClass.SUB_RESONANT
