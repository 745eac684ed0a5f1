"""Emission spectra of the donor ensemble: PL lines, TES satellites and RELS.

Photon energies are in eV, linewidths in meV. Line amplitudes are integrated
areas; spectra are densities on a uniform energy grid.

Two excitation regimes are modelled:

* ``PL``: above-gap excitation. Every line in the table is emitted and
  D0X-derived lines use unit excitation efficiency.
* ``RELS``: narrow-band excitation below the gap. Only D0X-derived lines
  appear, scaled by the excitation efficiency at the laser energy, plus an
  elastic line at the laser energy.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erf

from .dynamics import (
    NIRDrive,
    Populations,
    RateParams,
    build_rate_matrix,
    nir_scatter_rate,
    steady_state,
)
from .levels import LevelScheme

MEV = 1e-3
DEFAULT_RESOLUTION_MEV = 0.035
DEFAULT_GRID_STEP_EV = 5e-6

DIRECT_REGION = (1.5138, 1.5150)
TES_REGION = (1.5090, 1.5117)
OFF_RESONANT_EXCITATION = 1.5142
RESONANT_EXCITATION = 1.5140
RESONANT_DIRECT_GAIN = 60.0


class PeakKind(str, enum.Enum):
    DIRECT = "DirectD0X"
    TES = "TES"
    DPLUS_X = "DplusX"
    A0X = "A0X"
    FREE_X = "FreeX"

    @property
    def d0x_derived(self) -> bool:
        return self in (PeakKind.DIRECT, PeakKind.TES)


class Mode(str, enum.Enum):
    PL = "PL"
    RELS = "RELS"


@dataclass(frozen=True)
class Peak:
    label: str
    center: float  # eV
    hom_width: float = 0.005  # Lorentzian FWHM, meV
    inh_width: float = 0.030  # Gaussian FWHM, meV
    amplitude: float = 1.0
    kind: PeakKind = PeakKind.DIRECT
    rotational_l: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PeakKind(self.kind))
        if not (self.hom_width > 0 and self.inh_width > 0):
            raise ValueError(f"peak {self.label!r}: widths must be > 0")
        if self.amplitude < 0:
            raise ValueError(f"peak {self.label!r}: amplitude must be >= 0")

    def sort_key(self):
        return (self.center, self.kind.value, self.label, self.amplitude,
                self.hom_width, self.inh_width)


@dataclass(frozen=True)
class PeakTable:
    """Emission lines.

    Direct and TES amplitudes are oscillator weights: a direct line emits
    g (1 - p) times its amplitude and a TES line g p times its amplitude.
    The direct/TES photon ratio equals (1 - p)/p when the two kinds carry
    equal total amplitude, as in the default table.
    """

    peaks: tuple[Peak, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))

    def __iter__(self):
        return iter(self.peaks)

    def __len__(self):
        return len(self.peaks)

    def of_kind(self, kind: PeakKind) -> list[Peak]:
        return [p for p in self.peaks if p.kind is kind]

    @property
    def direct_weight(self) -> float:
        return sum(p.amplitude for p in self.of_kind(PeakKind.DIRECT))

    def nearest_direct(self, energy: float) -> Peak | None:
        direct = self.of_kind(PeakKind.DIRECT)
        if not direct:
            return None
        return min(direct, key=lambda p: (abs(p.center - energy), p.center))


def default_peak_table() -> PeakTable:
    """Placeholder line positions for high-purity GaAs at 5 K.

    Positions sit in the observed bands; L=1 is placed just below 1.5142 eV.
    Widths and amplitudes are not measured values. TES amplitudes sum to the
    direct total so that every D0X decay lands in one of the two groups.
    """
    return PeakTable((
        Peak("D0X L=0", 1.5140, amplitude=1.0, kind=PeakKind.DIRECT, rotational_l=0),
        Peak("D0X L=1", 1.51415, amplitude=0.6, kind=PeakKind.DIRECT, rotational_l=1),
        Peak("TES 2S/2P", 1.5105, amplitude=1.12, kind=PeakKind.TES),
        Peak("TES 3S/3P", 1.5095, amplitude=0.48, kind=PeakKind.TES),
        Peak("D+X", 1.5130, amplitude=0.15, kind=PeakKind.DPLUS_X),
        Peak("A0X", 1.5125, amplitude=0.05, kind=PeakKind.A0X),
        Peak("free X", 1.5153, amplitude=0.2, kind=PeakKind.FREE_X),
    ))


@dataclass(frozen=True)
class SynthSettings:
    """Instrument and excitation constants of the synthesizer.

    ``absorption_floor`` is the non-resonant (phonon-assisted / band-tail)
    D0X creation efficiency relative to a saturated resonance. The default
    ``elastic_gain`` is the value returned by :func:`calibrate_elastic_gain`
    for the default table and drive.
    """

    resolution: float = DEFAULT_RESOLUTION_MEV  # meV, Gaussian instrument FWHM
    wing_cutoff: float = 0.5  # meV, lines are truncated beyond this distance
    absorption_floor: float = 0.06
    elastic_gain: float = 10.2625
    max_step: float = 35e-6  # eV

    def __post_init__(self):
        if self.resolution < 0 or not self.wing_cutoff > 0:
            raise ValueError("resolution must be >= 0 and wing_cutoff > 0")
        if self.absorption_floor < 0 or self.elastic_gain < 0:
            raise ValueError("absorption_floor and elastic_gain must be >= 0")


@dataclass(frozen=True)
class Spectrum:
    energy: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        if self.energy.shape != self.intensity.shape or self.energy.ndim != 1:
            raise ValueError("energy and intensity must be 1-D arrays of equal length")
        if self.energy.size and np.any(np.diff(self.energy) <= 0):
            raise ValueError("energy grid must be strictly increasing")
        if np.any(self.intensity < 0):
            raise ValueError("intensities must be nonnegative")

    def value_at(self, energy: float) -> float:
        return float(np.interp(energy, self.energy, self.intensity))

    def to_csv(self) -> str:
        lines = ["energy_eV,intensity"]
        lines += [f"{e:.7f},{i:.9e}" for e, i in zip(self.energy, self.intensity)]
        return "\n".join(lines) + "\n"


def make_grid(lo: float = 1.5080, hi: float = 1.5170, step: float = DEFAULT_GRID_STEP_EV) -> np.ndarray:
    if not hi > lo or not step > 0:
        raise ValueError("need hi > lo and step > 0")
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def _check_grid(grid, max_step: float) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid needs at least two points")
    d = np.diff(grid)
    if np.any(d <= 0):
        raise ValueError("grid must be strictly increasing")
    if np.ptp(d) > 1e-6 * d.mean():
        raise ValueError("grid must be uniform")
    if d.mean() > max_step * (1 + 1e-9):
        raise ValueError(f"grid step {d.mean():.3g} eV exceeds {max_step:.3g} eV")
    return grid


def _tch_mixing(fwhm_g: float, fwhm_l: float) -> tuple[float, float]:
    """Thompson-Cox-Hastings pseudo-Voigt: total FWHM and Lorentzian fraction."""
    g, l = fwhm_g, fwhm_l
    f = (g**5 + 2.69269 * g**4 * l + 2.42843 * g**3 * l**2 + 4.47163 * g**2 * l**3
         + 0.07842 * g * l**4 + l**5) ** 0.2
    r = l / f
    eta = 1.36603 * r - 0.47719 * r**2 + 0.11116 * r**3
    return f, eta


def line_profile(x_mev: np.ndarray, fwhm_g: float, fwhm_l: float, cutoff: float) -> np.ndarray:
    """Unit-area pseudo-Voigt in 1/meV, truncated at |x| > cutoff and renormalized."""
    f, eta = _tch_mixing(fwhm_g, fwhm_l) if fwhm_l > 0 else (fwhm_g, 0.0)
    sigma = f / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    gamma = f / 2.0
    gauss = np.exp(-0.5 * (x_mev / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    lorentz = gamma / math.pi / (x_mev**2 + gamma**2)
    mass = (1.0 - eta) * erf(cutoff / (sigma * math.sqrt(2.0))) + eta * 2.0 / math.pi * math.atan(cutoff / gamma)
    prof = ((1.0 - eta) * gauss + eta * lorentz) / mass
    prof[np.abs(x_mev) > cutoff] = 0.0
    return prof


def _render(grid: np.ndarray, center: float, area: float, fwhm_g: float, fwhm_l: float,
            cutoff: float) -> np.ndarray:
    x = (grid - center) / MEV
    return area * line_profile(x, fwhm_g, fwhm_l, cutoff) / MEV


def excitation_response(peak: Peak, excitation: float, nir: NIRDrive, tau_d0x: float) -> float:
    """Saturation-weighted resonance of the laser with a D0X line, in [0, 1).

    Equals 2 tau R, with R the two-level scattering rate at the laser
    detuning from ``peak``.
    """
    drive = replace(nir, detuning=(excitation - peak.center) / MEV)
    return 2.0 * tau_d0x * nir_scatter_rate(drive, tau_d0x)


def excitation_efficiency(table: PeakTable, excitation: float, rp: RateParams,
                          settings: SynthSettings) -> float:
    """Relative D0X creation rate under narrow-band excitation."""
    total = table.direct_weight
    if total <= 0:
        return settings.absorption_floor
    res = sum(p.amplitude * excitation_response(p, excitation, rp.nir, rp.tau_d0x)
              for p in table.of_kind(PeakKind.DIRECT))
    return settings.absorption_floor + res / total


def line_areas(table: PeakTable, excitation: float, mode: Mode | str, pops: Populations,
               rp: RateParams, settings: SynthSettings = SynthSettings()) -> list[tuple[Peak, float]]:
    """Integrated area of each table line under the given conditions.

    Direct lines scale as g (1 - p) and TES lines as g p, times the
    excitation efficiency.
    """
    mode = Mode(mode)
    eff = 1.0 if mode is Mode.PL else excitation_efficiency(table, excitation, rp, settings)
    out = []
    for p in table:
        if p.kind is PeakKind.DIRECT:
            area = pops.g * (1.0 - rp.p_auger) * p.amplitude * eff
        elif p.kind is PeakKind.TES:
            area = pops.g * rp.p_auger * p.amplitude * eff
        else:
            area = p.amplitude if mode is Mode.PL else 0.0
        out.append((p, area))
    return out


def elastic_area(table: PeakTable, excitation: float, pops: Populations, rp: RateParams,
                 settings: SynthSettings = SynthSettings()) -> float:
    nearest = table.nearest_direct(excitation)
    if nearest is None:
        return 0.0
    resp = excitation_response(nearest, excitation, rp.nir, rp.tau_d0x)
    return settings.elastic_gain * pops.g * nearest.amplitude * resp


def synth_spectrum(
    table: PeakTable,
    excitation: float,
    mode: Mode | str,
    pops: Populations,
    rp: RateParams,
    grid: Sequence[float] | np.ndarray,
    settings: SynthSettings = SynthSettings(),
) -> Spectrum:
    """Emission spectrum on ``grid``.

    Observed Gaussian widths combine the inhomogeneous width with the
    instrument resolution in quadrature. The elastic RELS line has the
    instrument profile. An excitation outside the grid contributes no
    visible elastic line.
    """
    grid = _check_grid(grid, settings.max_step)
    mode = Mode(mode)
    res = settings.resolution
    intensity = np.zeros_like(grid)
    if len(table) == 0:
        return Spectrum(grid, intensity)
    # canonical summation order keeps the result independent of table order
    for peak, area in sorted(line_areas(table, excitation, mode, pops, rp, settings),
                             key=lambda pa: pa[0].sort_key()):
        if area > 0:
            fwhm_g = math.hypot(peak.inh_width, res)
            intensity += _render(grid, peak.center, area, fwhm_g, peak.hom_width,
                                 settings.wing_cutoff)
    if mode is Mode.RELS and grid[0] <= excitation <= grid[-1]:
        area = elastic_area(table, excitation, pops, rp, settings)
        if area > 0:
            if not res > 0:
                raise ValueError("RELS synthesis needs a positive instrument resolution")
            intensity += _render(grid, excitation, area, res, 0.0, settings.wing_cutoff)
    return Spectrum(grid, np.clip(intensity, 0.0, None))


def elastic_height(table: PeakTable, excitation: float, pops: Populations, rp: RateParams,
                   settings: SynthSettings = SynthSettings()) -> float:
    """Peak height of the elastic line (same units as the spectrum density)."""
    area = elastic_area(table, excitation, pops, rp, settings)
    zero = np.zeros(1)
    return float(area * line_profile(zero, settings.resolution, 0.0, settings.wing_cutoff)[0] / MEV)


def steady_populations(scheme: LevelScheme, rp: RateParams, table: PeakTable,
                       excitation: float) -> Populations:
    """Single-donor steady state with the NIR detuned from the nearest D0X line."""
    nearest = table.nearest_direct(excitation)
    detuning = 0.0 if nearest is None else (excitation - nearest.center) / MEV
    return steady_state(build_rate_matrix(scheme, rp.with_nir(detuning=detuning)))


def excitation_scan(
    table: PeakTable,
    energies: Iterable[float],
    rp: RateParams,
    pops: Populations | None = None,
    scheme: LevelScheme | None = None,
    settings: SynthSettings = SynthSettings(),
) -> list[tuple[float, float]]:
    """RELS peak height versus excitation energy.

    With ``pops`` given the ground-state population is held fixed; otherwise
    ``scheme`` is required and the steady state is recomputed per energy.
    """
    energies = [float(e) for e in energies]
    if any(b < a for a, b in zip(energies, energies[1:])):
        raise ValueError("scan energies must be sorted")
    if pops is None and scheme is None:
        pops = Populations.ground()
    out = []
    for e in energies:
        p = pops if pops is not None else steady_populations(scheme, rp, table, e)
        out.append((e, elastic_height(table, e, p, rp, settings)))
    return out


def integrate_region(s: Spectrum, lo: float, hi: float) -> float:
    """Trapezoidal area of the piecewise-linear spectrum over [lo, hi]."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    e, y = s.energy, s.intensity
    if lo < e[0] or hi > e[-1]:
        raise ValueError(f"region [{lo}, {hi}] lies outside the grid [{e[0]}, {e[-1]}]")
    inside = (e > lo) & (e < hi)
    xs = np.concatenate(([lo], e[inside], [hi]))
    ys = np.concatenate(([np.interp(lo, e, y)], y[inside], [np.interp(hi, e, y)]))
    return float(np.trapezoid(ys, xs))


def region_ratio(s: Spectrum, direct=DIRECT_REGION, tes=TES_REGION) -> float:
    """Direct-region to TES-region area ratio (the fidelity figure of merit)."""
    t = integrate_region(s, *tes)
    return integrate_region(s, *direct) / t if t > 0 else math.inf


@dataclass
class FidelityReport:
    off_resonant_ratio: float
    resonant_ratio: float
    direct_gain: float
    off_excitation: float = field(default=OFF_RESONANT_EXCITATION)
    on_excitation: float = field(default=RESONANT_EXCITATION)


def fidelity_report(table: PeakTable, pops: Populations, rp: RateParams, grid,
                    settings: SynthSettings = SynthSettings(),
                    off: float = OFF_RESONANT_EXCITATION,
                    on: float = RESONANT_EXCITATION) -> FidelityReport:
    s_off = synth_spectrum(table, off, Mode.RELS, pops, rp, grid, settings)
    s_on = synth_spectrum(table, on, Mode.RELS, pops, rp, grid, settings)
    return FidelityReport(
        off_resonant_ratio=region_ratio(s_off),
        resonant_ratio=region_ratio(s_on),
        direct_gain=integrate_region(s_on, *DIRECT_REGION) / integrate_region(s_off, *DIRECT_REGION),
        off_excitation=off,
        on_excitation=on,
    )


def calibrate_elastic_gain(
    table: PeakTable,
    rp: RateParams,
    grid,
    settings: SynthSettings = SynthSettings(),
    factor: float = RESONANT_DIRECT_GAIN,
    off: float = OFF_RESONANT_EXCITATION,
    on: float = RESONANT_EXCITATION,
    pops: Populations | None = None,
) -> float:
    """Elastic gain making direct-region emission at ``on`` equal ``factor`` times that at ``off``.

    Direct-region area is affine in the gain, so two syntheses per
    excitation energy determine it exactly.
    """
    pops = pops or Populations.ground()

    def direct(excitation, gain):
        s = synth_spectrum(table, excitation, Mode.RELS, pops, rp, grid,
                           replace(settings, elastic_gain=gain))
        return integrate_region(s, *DIRECT_REGION)

    on0, off0 = direct(on, 0.0), direct(off, 0.0)
    on1, off1 = direct(on, 1.0) - on0, direct(off, 1.0) - off0
    denom = on1 - factor * off1
    if denom <= 0:
        raise ValueError("elastic line cannot produce the requested resonant gain")
    gain = (factor * off0 - on0) / denom
    if gain < 0:
        raise ValueError("requested resonant gain is below the PL-only gain")
    return gain
