"""Rate-equation model of a neutral donor under NIR and THz drive.

State order is fixed: 1S ground (g), excited hydrogenic (e), ionized /
conduction band (c), donor-bound exciton (x), and an optional long-lived
shelf (s). Generators use the column convention ``dp/dt = M @ p`` with
``M[j, i]`` the rate of i -> j, so every column sums to zero.
Times are in ns, rates in 1/ns, energies in meV, intensities in mW/cm^2.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .levels import (
    DEFAULT_DETUNING_SPAN,
    DEFAULT_RESONANCE_WINDOW,
    FIRClass,
    LevelScheme,
    classify_fir,
    natural_linewidth,
    thz_to_mev,
)

POPULATION_TOL = 1e-9
STABILITY_LIMIT = 0.1


class State(enum.IntEnum):
    G = 0
    E = 1
    C = 2
    X = 3
    S = 4


class SingularChainError(ArithmeticError):
    """The generator has no unique stationary distribution."""


class StabilityError(ValueError):
    pass


@dataclass(frozen=True)
class NIRDrive:
    """Near-infrared probe on the D0 -> D0X line.

    ``linewidth`` is the homogeneous FWHM entering the resonance denominator;
    the default is the lifetime limit of a 1 ns exciton.
    """

    intensity: float = 1.0
    detuning: float = 0.0
    linewidth: float = natural_linewidth(1.0)
    sat_intensity: float = 1.0

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError("NIR intensity must be >= 0")
        if not (self.linewidth > 0 and self.sat_intensity > 0):
            raise ValueError("NIR linewidth and sat_intensity must be > 0")


@dataclass(frozen=True)
class FIRDrive:
    """THz drive. ``overlap`` is the fraction of probed donors inside the THz spot."""

    intensity: float = 0.0
    photon_energy: float = thz_to_mev(1.63)
    sat_intensity_ionize: float = 10.0
    sat_intensity_bound: float = 10.0
    overlap: float = 1.0
    resonance_window: float = DEFAULT_RESONANCE_WINDOW
    detuning_span: float = DEFAULT_DETUNING_SPAN

    def __post_init__(self):
        if self.intensity < 0 or self.photon_energy < 0:
            raise ValueError("FIR intensity and photon energy must be >= 0")
        if not (self.sat_intensity_ionize > 0 and self.sat_intensity_bound > 0):
            raise ValueError("FIR saturation intensities must be > 0")
        if not 0 <= self.overlap <= 1:
            raise ValueError("FIR overlap must lie in [0, 1]")
        if not self.resonance_window > 0:
            raise ValueError("resonance_window must be > 0")


@dataclass(frozen=True)
class Shelf:
    """Optional long-lived trap fed by a fraction of Auger decays."""

    branching: float
    lifetime: float

    def __post_init__(self):
        if not 0 <= self.branching <= 1:
            raise ValueError("shelf branching must lie in [0, 1]")
        if not self.lifetime > 0:
            raise ValueError("shelf lifetime must be > 0")


@dataclass(frozen=True)
class RateParams:
    tau_d0x: float = 1.0
    t1: float = 350.0
    p_auger: float = 0.0075
    capture_rate: float = 0.01
    nir: NIRDrive = field(default_factory=NIRDrive)
    fir: FIRDrive = field(default_factory=FIRDrive)
    capture_to_excited: bool = False
    shelf: Shelf | None = None

    def __post_init__(self):
        if not (self.tau_d0x > 0 and self.t1 > 0 and self.capture_rate > 0):
            raise ValueError("lifetimes and capture_rate must be > 0")
        # p_auger == 1 is allowed so that forced-Auger scenarios can be simulated.
        if not 0 <= self.p_auger <= 1:
            raise ValueError(f"p_auger must lie in [0, 1], got {self.p_auger}")

    @classmethod
    def from_scheme(cls, scheme: LevelScheme, **kw) -> RateParams:
        return cls(tau_d0x=scheme.tau_d0x, t1=scheme.t1, **kw)

    @property
    def n_states(self) -> int:
        return 5 if self.shelf is not None else 4

    def with_fir_intensity(self, intensity: float) -> RateParams:
        return replace(self, fir=replace(self.fir, intensity=intensity))

    def with_nir(self, **kw) -> RateParams:
        return replace(self, nir=replace(self.nir, **kw))


@dataclass(frozen=True)
class Populations:
    g: float
    e: float = 0.0
    c: float = 0.0
    x: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        vals = (self.g, self.e, self.c, self.x, self.s)
        if any(not (-POPULATION_TOL <= v <= 1 + POPULATION_TOL) for v in vals):
            raise ValueError(f"populations must lie in [0, 1]: {vals}")
        if abs(sum(vals) - 1.0) > POPULATION_TOL:
            raise ValueError(f"populations must sum to 1, got {sum(vals)!r}")

    @classmethod
    def ground(cls) -> Populations:
        return cls(g=1.0)

    @classmethod
    def from_array(cls, p: Sequence[float]) -> Populations:
        p = np.clip(np.asarray(p, dtype=float), 0.0, None)
        vals = list(p) + [0.0] * (5 - len(p))
        return cls(*map(float, vals))

    def as_array(self, n_states: int = 4) -> np.ndarray:
        full = np.array([self.g, self.e, self.c, self.x, self.s])
        if n_states == 4 and self.s != 0.0:
            raise ValueError("shelf population is nonzero; use n_states=5")
        return full[:n_states].copy()

    @property
    def bright(self) -> float:
        return self.g + self.x


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    populations: np.ndarray  # shape (n_points, n_states)

    def __post_init__(self):
        if self.times.ndim != 1 or self.populations.shape[0] != self.times.size:
            raise ValueError("times and populations disagree in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def at(self, i: int) -> Populations:
        return Populations.from_array(self.populations[i])

    @property
    def final(self) -> Populations:
        return self.at(-1)


def nir_scatter_rate(nir: NIRDrive, tau_d0x: float) -> float:
    """Two-level scattering rate R (1/ns), bounded by 1/(2 tau).

    R = (1/(2 tau)) s / (1 + s + (2 delta/Gamma)^2) with s = I/I_sat.
    The scattered-photon rate reported to users is 2R.
    """
    s = nir.intensity / nir.sat_intensity
    d = 2.0 * nir.detuning / nir.linewidth
    return 0.5 / tau_d0x * s / (1.0 + s + d * d)


def scattered_photon_rate(nir: NIRDrive, tau_d0x: float) -> float:
    """Photons per ns; tends to 1/tau_d0x in the saturated, resonant limit."""
    return 2.0 * nir_scatter_rate(nir, tau_d0x)


def nir_pump_rate(nir: NIRDrive, tau_d0x: float) -> float:
    """g -> x excitation rate.

    Chosen so that the isolated g <-> x cycle scatters exactly
    ``scattered_photon_rate`` photons per ns in steady state.
    """
    s = nir.intensity / nir.sat_intensity
    d = 2.0 * nir.detuning / nir.linewidth
    return s / (1.0 + d * d) / tau_d0x


def bright_cycle_rate(rp: RateParams) -> float:
    """Steady-state D0X decay rate (1/ns) of the g <-> x cycle without leaks."""
    w = nir_pump_rate(rp.nir, rp.tau_d0x)
    return w / (1.0 + w * rp.tau_d0x)


def fir_rates(scheme: LevelScheme, rp: RateParams) -> tuple[FIRClass, float, float]:
    """(class, g->c ionization rate, g->e bound-bound rate) for the THz drive."""
    fir = rp.fir
    cls = classify_fir(fir.photon_energy, scheme, fir.resonance_window, fir.detuning_span)
    ionize = bound = 0.0
    if fir.intensity > 0:
        if cls is FIRClass.IONIZING:
            ionize = fir.intensity / fir.sat_intensity_ionize * rp.capture_rate
        elif cls.is_bound_bound:
            detune = (fir.photon_energy - scheme.e_1s_2p) / fir.resonance_window
            bound = fir.intensity / fir.sat_intensity_bound / rp.t1 / (1.0 + detune * detune)
    return cls, ionize, bound


def build_rate_matrix(scheme: LevelScheme, rp: RateParams) -> np.ndarray:
    g, e, c, x, s = State
    n = rp.n_states
    M = np.zeros((n, n))

    def edge(src, dst, rate):
        if rate < 0 or math.isnan(rate):
            raise ValueError(f"negative or NaN rate {rate} on edge {src.name}->{dst.name}")
        M[dst, src] += rate

    _, ionize, bound = fir_rates(scheme, rp)
    edge(g, x, nir_pump_rate(rp.nir, rp.tau_d0x))
    edge(x, g, (1.0 - rp.p_auger) / rp.tau_d0x)
    auger = rp.p_auger / rp.tau_d0x
    if rp.shelf is None:
        edge(x, e, auger)
    else:
        edge(x, e, auger * (1.0 - rp.shelf.branching))
        edge(x, s, auger * rp.shelf.branching)
        edge(s, g, 1.0 / rp.shelf.lifetime)
    edge(e, g, 1.0 / rp.t1)
    edge(g, e, bound)
    edge(g, c, ionize)
    edge(c, e if rp.capture_to_excited else g, rp.capture_rate)
    M[np.diag_indices(n)] = -M.sum(axis=0)
    return M


def _check_generator(M: np.ndarray):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("generator must be square")
    off = M - np.diag(np.diag(M))
    if np.any(off < 0):
        raise ValueError("generator has negative off-diagonal rates")
    scale = max(1.0, float(np.abs(M).max()))
    if np.any(np.abs(M.sum(axis=0)) > 1e-9 * scale):
        raise ValueError("generator columns must sum to zero")
    return M


def steady_state(M: np.ndarray) -> Populations:
    """Stationary populations of the generator.

    The last balance row is replaced by the normalization condition and the
    dense system is solved by LU with partial pivoting.
    """
    M = _check_generator(M)
    n = M.shape[0]
    A = M.copy()
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    if np.linalg.matrix_rank(A) < n:
        raise SingularChainError("rate matrix has more than one closed class")
    p = np.linalg.solve(A, b)
    if np.any(p < -1e-9):
        raise SingularChainError(f"steady state has negative populations: {p}")
    p = np.clip(p, 0.0, None)
    return Populations.from_array(p / p.sum())


def _rk4_step_matrix(M: np.ndarray, dt: float) -> np.ndarray:
    # Classical RK4 applied to a linear constant-coefficient system collapses to
    # this fourth-order Taylor propagator; stage-by-stage evaluation is identical.
    h = dt * M
    h2 = h @ h
    h3 = h2 @ h
    return np.eye(M.shape[0]) + h + h2 / 2.0 + h3 / 6.0 + h2 @ h2 / 24.0


def integrate(
    M: np.ndarray,
    p0: Populations | np.ndarray,
    t_end: float,
    dt: float,
    record_every: int = 1,
) -> Trajectory:
    """Fixed-step RK4 from t=0 to ``t_end``.

    The step is shrunk slightly if needed so that an integer number of steps
    lands exactly on ``t_end``. Raises StabilityError when
    ``dt * max|diag(M)|`` exceeds 0.1.
    """
    M = _check_generator(M)
    n = M.shape[0]
    p = p0.as_array(n) if isinstance(p0, Populations) else np.asarray(p0, dtype=float)
    if p.shape != (n,):
        raise ValueError(f"initial populations need {n} entries")
    if not dt > 0 or not t_end > 0 or dt > t_end:
        raise ValueError("need 0 < dt <= t_end")
    stiff = float(np.abs(np.diag(M)).max())
    if dt * stiff > STABILITY_LIMIT * (1 + 1e-12):
        raise StabilityError(
            f"dt={dt} too large: dt*max|diag| = {dt * stiff:.3g} > {STABILITY_LIMIT}"
        )
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    h = t_end / n_steps
    record_every = max(1, int(record_every))
    pops = _kernels.propagate(_rk4_step_matrix(M, h), p, n_steps, record_every)
    steps = np.arange(pops.shape[0]) * record_every
    return Trajectory(times=steps * h, populations=pops)


def slowest_timescale(M: np.ndarray) -> float:
    """Inverse of the smallest nonzero relaxation rate of the generator."""
    ev = np.linalg.eigvals(np.asarray(M, dtype=float))
    rates = np.sort(np.abs(ev.real))
    nonzero = rates[rates > 1e-12 * max(1.0, rates[-1])]
    return float(1.0 / nonzero[0]) if nonzero.size else math.inf


def _ground_fraction(scheme: LevelScheme, rp: RateParams, intensity: float) -> float:
    return steady_state(build_rate_matrix(scheme, rp.with_fir_intensity(intensity))).g


def depletion_curve(
    scheme: LevelScheme, rp: RateParams, fir_intensities: Sequence[float]
) -> list[tuple[float, float]]:
    """Ground-state depletion of the probed ensemble versus THz intensity.

    Depletion is ``overlap * (1 - g(I)/g(0))``: donors outside the THz spot
    keep their undriven population.
    """
    intensities = [float(i) for i in fir_intensities]
    if any(i < 0 for i in intensities):
        raise ValueError("FIR intensities must be >= 0")
    if any(b < a for a, b in zip(intensities, intensities[1:])):
        raise ValueError("FIR intensities must be sorted")
    g0 = _ground_fraction(scheme, rp, 0.0)
    out = []
    for i in intensities:
        d = 0.0 if i == 0 else rp.fir.overlap * (1.0 - _ground_fraction(scheme, rp, i) / g0)
        out.append((i, max(d, 0.0)))
    return out


def calibrate_ionizing_drive(
    scheme: LevelScheme, rp: RateParams, max_depletion: float, half_intensity: float
) -> RateParams:
    """Set THz overlap and ionization saturation intensity to hit a target curve.

    Returns parameters for which the ionizing-only depletion curve is
    ``max_depletion * (I/half_intensity) / (1 + I/half_intensity)``.
    """
    if not 0 < max_depletion <= 1 or not half_intensity > 0:
        raise ValueError("need 0 < max_depletion <= 1 and half_intensity > 0")
    cls, _, _ = fir_rates(scheme, rp.with_fir_intensity(1.0))
    if cls is not FIRClass.IONIZING:
        raise ValueError(f"FIR photon {rp.fir.photon_energy} meV is not ionizing ({cls.value})")
    probe = replace(rp, fir=replace(rp.fir, sat_intensity_ionize=1.0, overlap=1.0))
    # single-donor depletion is a s/(1 + a s) with s = I/I_sat; read a off at s = 1
    d1 = 1.0 - _ground_fraction(scheme, probe, 1.0) / _ground_fraction(scheme, probe, 0.0)
    gain = d1 / (1.0 - d1)
    return replace(
        rp,
        fir=replace(
            rp.fir, sat_intensity_ionize=half_intensity * gain, overlap=max_depletion
        ),
    )
