"""
Decoherence rate function for a bath with finitely many oscillators, and the
rational-frequency test that decides whether lost coherence ever comes back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import (
    FiniteBath,
    GammaSeries,
    SystemSpec,
    Temperature,
    as_temperature,
    validate,
)

__all__ = [
    "COTH_CLAMP",
    "DEFAULT_TOL",
    "DEFAULT_MAX_DEN",
    "RationalFrequency",
    "PeriodicityReport",
    "NotPeriodicReport",
    "coth_weight",
    "mode_weights",
    "gamma_finite",
    "gamma_finite_series",
    "rationalize",
    "detect_periodicity",
    "verify_recurrence",
]

# coth(x) == 1 to double precision well before this; avoids overflow at kT -> 0.
COTH_CLAMP = 40.0

DEFAULT_TOL = 1e-12
DEFAULT_MAX_DEN = 10_000


class NotPeriodicReport(ValueError):
    pass


def coth_weight(omega, kT: float):
    """coth(omega / 2kT), equal to 1 at kT == 0 and for arguments above the clamp."""
    omega = np.asarray(omega, dtype=float)
    if kT == 0:
        return np.ones_like(omega)
    with np.errstate(divide="ignore", over="ignore"):
        x = omega / (2.0 * kT)
        c = 1.0 / np.tanh(np.minimum(x, COTH_CLAMP))
    return np.where(x > COTH_CLAMP, 1.0, c)


def mode_weights(bath: FiniteBath, system: SystemSpec, temp) -> np.ndarray:
    """Per-mode prefactor omega0^2 lambda_i^2 / omega_i^2 * coth(omega_i / 2kT)."""
    kT = as_temperature(temp).kT
    lam, om = bath.lambdas, bath.omegas
    return (system.omega0 * lam / om) ** 2 * coth_weight(om, kT)


def _gamma_kernel(weights: np.ndarray, omegas: np.ndarray, times: np.ndarray) -> np.ndarray:
    # Fixed mode-order accumulation: a given t gives the same bits on any grid.
    # 1 - cos(wt) written as 2 sin^2(wt/2) to keep precision near t = 0.
    out = np.zeros_like(times)
    for w, om in zip(weights, omegas):
        s = np.sin(0.5 * om * times)
        out += w * (2.0 * s * s)
    return out


def gamma_finite(bath: FiniteBath, system: SystemSpec, temp, t: float) -> float:
    """
    Gamma(t) = omega0^2 sum_i (lambda_i / omega_i)^2 (1 - cos omega_i t) coth(omega_i / 2kT).

    Dimensionless and non-negative; exactly zero at t = 0.
    """
    validate(bath), validate(system), validate(as_temperature(temp))
    if t < 0:
        raise ValueError(f"t={t} must be >= 0")
    w = mode_weights(bath, system, temp)
    return float(_gamma_kernel(w, bath.omegas, np.array([float(t)]))[0])


def gamma_finite_series(bath: FiniteBath, system: SystemSpec, temp, times) -> GammaSeries:
    """Evaluate :func:`gamma_finite` on a strictly increasing grid of times."""
    validate(bath), validate(system)
    temp = validate(as_temperature(temp))
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("EmptyGrid: time grid must be a non-empty vector")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("NonMonotonicGrid: times must be >= 0 and strictly increasing")
    w = mode_weights(bath, system, temp)
    values = _gamma_kernel(w, bath.omegas, times)
    params = {"system": system.to_dict(), "bath": bath.to_dict(), "temperature": temp.to_dict()}
    return GammaSeries(times=times, values=values, method="finite-sum", params=params)


# --- periodicity -------------------------------------------------------------


@dataclass(frozen=True)
class RationalFrequency:
    """A frequency written as (p / q) * scale with p, q coprime positive integers."""

    p: int
    q: int
    scale: float = 1.0

    def __post_init__(self):
        if self.p < 1 or self.q < 1 or math.gcd(self.p, self.q) != 1:
            raise ValueError(f"{self.p}/{self.q} is not a reduced positive fraction")

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.p, self.q)

    @property
    def value(self) -> float:
        return self.p / self.q * self.scale


def _convergents(x: Fraction):
    # x is the exact binary value of a float, so the expansion terminates.
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    while True:
        a = x.numerator // x.denominator
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        yield h1, k1
        frac = x - a
        if frac == 0:
            return
        x = 1 / frac


def rationalize(ratio: float, tol: float = DEFAULT_TOL, max_den: int = DEFAULT_MAX_DEN,
                scale: float = 1.0) -> RationalFrequency | None:
    """
    First continued-fraction convergent p/q of ``ratio`` with q <= max_den and
    |ratio - p/q| <= tol * ratio.  Returns None when no convergent qualifies.
    """
    if not (ratio > 0 and math.isfinite(ratio)):
        raise ValueError(f"NonPositiveRatio: ratio={ratio}")
    if tol < 0 or max_den < 1:
        raise ValueError("tol must be >= 0 and max_den >= 1")
    x = Fraction(ratio)
    bound = Fraction(tol) * x
    for p, q in _convergents(x):
        if q > max_den:
            break
        if p == 0:
            continue
        if abs(x - Fraction(p, q)) <= bound:
            return RationalFrequency(p, q, scale)
    return None


@dataclass(frozen=True)
class PeriodicityReport:
    periodic: bool
    period: float | None = None
    witness: tuple[int, int] | None = None
    multiples: tuple[int, ...] = ()
    rationals: tuple[tuple[int, int], ...] = field(default=())
    tol: float = DEFAULT_TOL
    max_den: int = DEFAULT_MAX_DEN

    def to_dict(self) -> dict:
        return {
            "periodic": self.periodic,
            "period": self.period,
            "witness": list(self.witness) if self.witness else None,
            "multiples": list(self.multiples),
            "rationals": [list(r) for r in self.rationals],
            "tol": self.tol,
            "max_den": self.max_den,
        }


def detect_periodicity(bath: FiniteBath, tol: float = DEFAULT_TOL,
                       max_den: int = DEFAULT_MAX_DEN) -> PeriodicityReport:
    """
    Decide whether Gamma(t) of ``bath`` is periodic.

    Every frequency is rationalized against the first mode, omega_i = (p_i/q_i) Omega.
    If all succeed the fundamental period is 2 pi lcm(q_i) / (gcd(p_i) Omega),
    built in integer arithmetic, and ``multiples`` holds n_i = T / T_i.
    """
    validate(bath)
    base = bath.modes[0].omega
    rationals = []
    for j, mode in enumerate(bath.modes):
        r = rationalize(mode.omega / base, tol, max_den, scale=base)
        if r is None:
            return PeriodicityReport(False, witness=(0, j), tol=tol, max_den=max_den)
        rationals.append(r)
    lcm_q = math.lcm(*(r.q for r in rationals))
    gcd_p = math.gcd(*(r.p for r in rationals))
    # T * omega_i / 2pi = (lcm_q / gcd_p) * (p_i / q_i), integral by construction
    cycles = Fraction(lcm_q, gcd_p)
    multiples = []
    for r in rationals:
        n = cycles * r.fraction
        assert n.denominator == 1
        multiples.append(int(n))
    period = 2.0 * math.pi * lcm_q / (gcd_p * base)
    return PeriodicityReport(
        True,
        period=period,
        multiples=tuple(multiples),
        rationals=tuple((r.p, r.q) for r in rationals),
        tol=tol,
        max_den=max_den,
    )


def verify_recurrence(bath: FiniteBath, system: SystemSpec, report: PeriodicityReport,
                      k: int = 1) -> float:
    """Gamma at the k-th recurrence time (zero temperature); ~0 for a true period."""
    if not report.periodic:
        raise NotPeriodicReport("report does not describe a periodic bath")
    return gamma_finite(bath, system, Temperature(0.0), k * report.period)
