"""Experimental observables derived from the donor model.

Modulation is in percent; intensities in mW/cm^2.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np


class DegenerateDataError(ValueError):
    pass


def modulation(a_off: float, b_on: float) -> float:
    """Percent change of a signal: 100 (A - B) / ((A + B)/2).

    ``a_off`` is the signal without the THz drive, ``b_on`` with it.
    """
    if a_off < 0 or b_on < 0:
        raise ValueError("signals must be >= 0")
    total = a_off + b_on
    if total <= 0:
        raise ValueError("modulation undefined when both signals are zero")
    # clamp guards against rounding just past the exact bounds
    return min(200.0, max(-200.0, 200.0 * (a_off - b_on) / total))


def depletion_to_modulation(depletion: float) -> float:
    return modulation(1.0, 1.0 - depletion)


def saturation_to_depletion(a_percent: float, i0: float) -> tuple[float, float]:
    """Map a modulation saturation curve onto the depletion curve producing it.

    If depletion follows d_max s/(1+s) with s = I/I_d, the modulation follows
    A u/(1+u) exactly, where A = 200 d_max/(2 - d_max) and u = I (2 - d_max)/(2 I_d).
    Returns (d_max, I_d) for given (A, I0).
    """
    if not 0 <= a_percent < 200 or not i0 > 0:
        raise ValueError("need 0 <= A < 200 and I0 > 0")
    d_max = 2.0 * a_percent / (200.0 + a_percent)
    return d_max, i0 * (2.0 - d_max) / 2.0


def saturation_model(i, a: float, i0: float):
    """A [1 - (1 + I/I0)^-1], written as A (I/I0)/(1 + I/I0)."""
    if not i0 > 0:
        raise ValueError("I0 must be > 0")
    s = np.asarray(i, dtype=float) / i0
    if np.any(s < 0):
        raise ValueError("intensity must be >= 0")
    out = a * s / (1.0 + s)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class SaturationFit:
    A: float
    I0: float
    rss: float
    iterations: int
    converged: bool
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _residuals(p, x, y):
    a, i0 = p
    return a * x / (i0 + x) - y


def _jacobian(p, x):
    a, i0 = p
    denom = i0 + x
    return np.column_stack([x / denom, -a * x / denom**2])


def fit_saturation(
    points: Sequence[tuple[float, float]],
    max_iter: int = 200,
    rtol: float = 1e-9,
) -> SaturationFit:
    """Least-squares fit of the saturation curve by damped Gauss-Newton.

    Damping is multiplicative: x10 after a rejected (uphill) step, /10 after
    an accepted one. Starts from A = max(y), I0 = median(I). On
    non-convergence the best iterate is returned with ``converged=False``.
    """
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 3:
        raise ValueError("need at least three (I, modulation) points")
    x, y = data[:, 0], data[:, 1]
    if np.any(x < 0) or not np.all(np.isfinite(data)):
        raise ValueError("intensities must be finite and >= 0")
    if not np.any(x > 0):
        raise DegenerateDataError("all intensities are zero; I0 is unidentifiable")
    if np.unique(x).size != x.size:
        raise ValueError("intensities must be distinct")
    if np.all(y == 0):
        return SaturationFit(
            A=0.0, I0=float(np.median(x[x > 0])), rss=0.0, iterations=0,
            converged=True, degenerate=True,
        )

    p = np.array([y.max(), np.median(x)])
    if p[1] <= 0:
        p[1] = np.median(x[x > 0])
    r = _residuals(p, x, y)
    cost = r @ r
    lam = 1e-3
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        J = _jacobian(p, x)
        JtJ = J.T @ J
        g = J.T @ r
        step = None
        while lam < 1e16:
            A = JtJ + lam * np.diag(np.diag(JtJ) + 1e-300)
            try:
                trial_step = -np.linalg.solve(A, g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + trial_step
            if trial[1] <= 0:
                lam *= 10.0
                continue
            r_new = _residuals(trial, x, y)
            cost_new = r_new @ r_new
            if cost_new <= cost:
                step = trial_step
                break
            lam *= 10.0
        if step is None:
            # no downhill step at any damping: we sit at a minimum to machine precision
            converged = True
            break
        p = p + step
        r, cost = r_new, cost_new
        lam = max(lam / 10.0, 1e-12)
        if np.all(np.abs(step) <= rtol * np.maximum(np.abs(p), 1e-300)):
            converged = True
            break
    return SaturationFit(A=float(p[0]), I0=float(p[1]), rss=float(cost), iterations=it,
                         converged=converged)


# (temperature K, RELS efficiency relative to 5 K)
TEMPERATURE_ANCHORS = ((5.0, 1.0), (15.0, 1.0 / 7.0), (20.0, 0.1))


def temperature_scale(t: float) -> float:
    """RELS efficiency relative to its 5 K value.

    Piecewise linear through the anchors, held at 1 below 5 K, and continued
    with the 15-20 K slope above 20 K down to a floor of zero.
    """
    if not t > 0:
        raise ValueError("temperature must be > 0")
    (t0, f0), (t1, f1), (t2, f2) = TEMPERATURE_ANCHORS
    if t <= t0:
        return 1.0
    if t == t1:
        return f1
    if t == t2:
        return f2
    if t < t1:
        return f0 + (f1 - f0) * (t - t0) / (t1 - t0)
    slope = (f2 - f1) / (t2 - t1)
    return max(f1 + slope * (t - t1), 0.0)


def thermal_rise(p_abs: float, tau: float, mass: float, c_p: float) -> float:
    """Temperature rise (K) P_abs tau / (m c_p); SI units throughout."""
    if p_abs < 0:
        raise ValueError("absorbed power must be >= 0")
    if not tau > 0:
        raise ValueError("tau must be > 0")
    if not (mass > 0 and c_p > 0):
        raise ValueError("mass and specific heat must be > 0")
    return p_abs * tau / (mass * c_p)


def calibrate_auger(off_resonant_ratio: float) -> float:
    """Auger branching p from the direct/TES photon ratio (1-p)/p.

    Only meaningful for an off-resonant ratio; a resonant ratio includes
    elastic light that carries no TES partner.
    """
    if not off_resonant_ratio > 0 or math.isinf(off_resonant_ratio):
        raise ValueError("ratio must be a positive finite number")
    return 1.0 / (1.0 + off_resonant_ratio)
