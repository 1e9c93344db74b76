"""
Decoherence rate for a continuum bath with an ohmic spectral density.

``gamma_quadrature`` integrates the spectral representation numerically; the
``gamma_*_closed`` functions and the two limiting laws are the analytic
approximations, valid for kT << cutoff_upper.  Nothing here silently swaps one
for the other.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .finite_bath import COTH_CLAMP, coth_weight
from .model import (
    BathMode,
    FiniteBath,
    GammaSeries,
    OhmicSpectralDensity,
    as_temperature,
    validate,
)
from .quadrature import ToleranceNotMet, integrate_panels

__all__ = [
    "TAIL_EPS",
    "RegimeWarning",
    "ToleranceNotMet",
    "QuadratureConfig",
    "QuadratureResult",
    "Decomposition",
    "upper_limit",
    "gamma_quadrature",
    "gamma_quadrature_series",
    "gamma_vac_closed",
    "gamma_therm_closed",
    "gamma_short_time",
    "gamma_high_temperature",
    "gamma_decomposition",
    "discretize",
]

TAIL_EPS = 1e-16


class RegimeWarning(UserWarning):
    """An approximation was evaluated outside the regime it was derived for."""


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 200_000
    oscillation_split: bool = True

    def __post_init__(self):
        if not (self.abs_tol > 0 or self.rel_tol > 0):
            raise ValueError("abs_tol or rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def to_dict(self) -> dict:
        return {
            "abs_tol": self.abs_tol,
            "rel_tol": self.rel_tol,
            "max_subdivisions": self.max_subdivisions,
            "oscillation_split": self.oscillation_split,
        }


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    panels: int = 0

    def __float__(self) -> float:
        return self.value


class Decomposition(NamedTuple):
    vac: float
    therm: float
    total: float


def upper_limit(sd: OhmicSpectralDensity) -> float:
    """Truncation frequency where exp(-w / cutoff_upper) drops to TAIL_EPS."""
    return sd.cutoff_upper * math.log(1.0 / TAIL_EPS)


def _tail_bound(sd: OhmicSpectralDensity, kT: float, w_max: float) -> float:
    # integrand <= (C/pi) exp(-w/L) (2/w) coth(w/2kT) and both 1/w, coth decrease
    coth = float(coth_weight(w_max, kT))
    lam = sd.cutoff_upper
    return sd.coupling_c / math.pi * 2.0 / w_max * coth * lam * math.exp(-w_max / lam)


def _breakpoints(sd: OhmicSpectralDensity, kT: float, t: float, split: bool) -> np.ndarray:
    lo, hi = sd.cutoff_lower, upper_limit(sd)
    lam = sd.cutoff_upper
    pts = [lo, hi]
    pts += [lam * 2.0 ** k for k in range(-6, 6)]
    if kT > 0:
        pts += [kT * s for s in (0.1, 1.0, 10.0)]
    if split and t * (hi - lo) > 2 * math.pi:
        step = 2 * math.pi / t
        k0 = math.floor(lo / step) + 1
        k1 = math.ceil(hi / step)
        pts.append(step * np.arange(k0, k1))
    bp = np.unique(np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in pts]))
    return bp[(bp >= lo) & (bp <= hi)]


def _integrand(sd: OhmicSpectralDensity, kT: float, t: float):
    c_over_pi = sd.coupling_c / math.pi
    lam = sd.cutoff_upper

    def f(w):
        s = np.sin(0.5 * w * t)
        one_minus_cos = 2.0 * s * s
        if kT == 0:
            weight = 1.0
        else:
            with np.errstate(over="ignore"):
                x = w / (2.0 * kT)
            weight = np.where(x > COTH_CLAMP, 1.0, 1.0 / np.tanh(np.minimum(x, COTH_CLAMP)))
        return c_over_pi * np.exp(-w / lam) * one_minus_cos / w * weight

    return f


def gamma_quadrature(sd: OhmicSpectralDensity, temp, t: float,
                     cfg: QuadratureConfig | None = None) -> QuadratureResult:
    """
    (1/pi) * integral over w > cutoff_lower of J(w) (1 - cos wt) / w^2 * coth(w / 2kT).

    The upper limit is truncated where the exponential cutoff reaches 1e-16;
    the analytic bound on the dropped tail is folded into ``error``.

    Raises
    ------
    ToleranceNotMet
        If the error estimate still exceeds the tolerance once
        ``cfg.max_subdivisions`` bisections have been spent.
    """
    cfg = cfg or QuadratureConfig()
    validate(sd)
    kT = validate(as_temperature(temp)).kT
    if t < 0:
        raise ValueError(f"t={t} must be >= 0")
    if t == 0 or sd.coupling_c == 0:
        return QuadratureResult(0.0, 0.0, 0)
    w_max = upper_limit(sd)
    res = integrate_panels(
        _integrand(sd, kT, t),
        _breakpoints(sd, kT, t, cfg.oscillation_split),
        abs_tol=cfg.abs_tol,
        rel_tol=cfg.rel_tol,
        max_bisections=cfg.max_subdivisions,
        extra_error=_tail_bound(sd, kT, w_max),
    )
    return QuadratureResult(max(res.value, 0.0), res.error, res.panels)


def gamma_quadrature_series(sd: OhmicSpectralDensity, temp, times,
                            cfg: QuadratureConfig | None = None) -> GammaSeries:
    cfg = cfg or QuadratureConfig()
    temp = as_temperature(temp)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("EmptyGrid: time grid must be a non-empty vector")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("NonMonotonicGrid: times must be >= 0 and strictly increasing")
    results = [gamma_quadrature(sd, temp, float(t), cfg) for t in times]
    return GammaSeries(
        times=times,
        values=[r.value for r in results],
        errors=[r.error for r in results],
        method="quadrature",
        params={"spectral_density": sd.to_dict(), "temperature": temp.to_dict(),
                "quadrature": cfg.to_dict()},
    )


# --- closed forms ------------------------------------------------------------


def gamma_vac_closed(sd: OhmicSpectralDensity, t: float) -> float:
    """(C / 2pi) ln(1 + L^2 t^2); exact at zero temperature when cutoff_lower = 0."""
    return sd.coupling_c / (2 * math.pi) * math.log1p((sd.cutoff_upper * t) ** 2)


def _log_sinhc(x: float) -> float:
    # ln(sinh(x) / x) without cancellation at small x or overflow at large x
    if x < 0.1:
        x2 = x * x
        return x2 * (1 / 6 + x2 * (-1 / 180 + x2 * (1 / 2835 - x2 / 37800)))
    if x < 20:
        return math.log(math.sinh(x) / x)
    return x - math.log(2.0) - math.log(x) + math.log1p(-math.exp(-2 * x))


def gamma_therm_closed(sd: OhmicSpectralDensity, temp, t: float) -> float:
    """(C/pi) ln[sinh(pi kT t) / (pi kT t)] - (C/pi) kT w_L t^2; zero at kT = 0."""
    kT = as_temperature(temp).kT
    if kT == 0 or t == 0:
        return 0.0
    if kT > sd.cutoff_upper / 10:
        warnings.warn(f"thermal closed form assumes kT << cutoff_upper (kT={kT}, "
                      f"cutoff_upper={sd.cutoff_upper})", RegimeWarning, stacklevel=2)
    c_over_pi = sd.coupling_c / math.pi
    return c_over_pi * _log_sinhc(math.pi * kT * t) - c_over_pi * kT * sd.cutoff_lower * t * t


def gamma_short_time(sd: OhmicSpectralDensity, temp, t: float) -> float:
    """Leading t^2 term of the thermal part, (C/pi) kT (pi^2 kT / 6 - w_L) t^2."""
    kT = as_temperature(temp).kT
    if kT * t > 0.1:
        warnings.warn(f"short-time law assumes kT t << 1 (kT t = {kT * t})",
                      RegimeWarning, stacklevel=2)
    return sd.coupling_c / math.pi * kT * (math.pi ** 2 / 6 * kT - sd.cutoff_lower) * t * t


def gamma_high_temperature(sd: OhmicSpectralDensity, temp, t: float) -> float:
    """C kT t, the leading behaviour for cutoff_upper >> kT >> 1/t >> cutoff_lower."""
    kT = as_temperature(temp).kT
    if t > 0 and not (sd.cutoff_upper >= 10 * kT and kT * t >= 10
                      and sd.cutoff_lower * t <= 0.1):
        warnings.warn("high-temperature law evaluated outside "
                      "cutoff_upper >> kT >> 1/t >> cutoff_lower", RegimeWarning, stacklevel=2)
    return sd.coupling_c * kT * t


def gamma_decomposition(sd: OhmicSpectralDensity, temp, t: float) -> Decomposition:
    vac = gamma_vac_closed(sd, t)
    therm = gamma_therm_closed(sd, temp, t)
    return Decomposition(vac, therm, vac + therm)


def discretize(sd: OhmicSpectralDensity, n_modes: int, omega0: float = 1.0) -> FiniteBath:
    """
    Equal-width midpoint discretization of J over [cutoff_lower, upper_limit]:
    lambda_i^2 = J(w_i) dw / (pi omega0^2).
    """
    validate(sd)
    lo, hi = sd.cutoff_lower, upper_limit(sd)
    dw = (hi - lo) / n_modes
    w = lo + dw * (np.arange(n_modes) + 0.5)
    lam = np.sqrt(sd(w) * dw / math.pi) / omega0
    return FiniteBath(tuple(BathMode(float(l), float(o)) for l, o in zip(lam, w)))
