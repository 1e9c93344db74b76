"""Exact dephasing of a system density matrix, rho^nm -> rho^nm exp(-(n-m)^2 Gamma)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import DensityMatrix, Tolerances, validate

__all__ = [
    "DephasingMap",
    "NoOffDiagonalSupport",
    "dephasing_kernel",
    "dephase",
    "coherence_l1",
    "exponent_ratios",
    "exponent_scaling_check",
]


class NoOffDiagonalSupport(ValueError):
    pass


@dataclass(frozen=True)
class DephasingMap:
    gamma: float
    source: str = "explicit"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.gamma >= 0):
            raise ValueError(f"gamma={self.gamma} must be >= 0")


def dephasing_kernel(dim: int, gamma: float) -> np.ndarray:
    """Real matrix exp(-(n-m)^2 gamma); its diagonal is exactly 1."""
    n = np.arange(dim)
    diff2 = (n[:, None] - n[None, :]) ** 2
    return np.exp(-diff2 * gamma)


def dephase(rho0: DensityMatrix, dmap: DephasingMap | float,
            tol: Tolerances | None = None) -> DensityMatrix:
    if not isinstance(dmap, DephasingMap):
        dmap = DephasingMap(float(dmap))
    validate(rho0, tol)
    rho = rho0.entries * dephasing_kernel(rho0.dim, dmap.gamma)
    return DensityMatrix(rho)


def coherence_l1(rho: DensityMatrix) -> float:
    """Sum of |rho^nm| over n != m."""
    a = np.abs(rho.entries)
    return float(a.sum() - np.trace(a))


def exponent_ratios(rho0: DensityMatrix, rho_t: DensityMatrix,
                    support_tol: float = 1e-14) -> dict[tuple[int, int], float]:
    """
    -ln|rho_t^nm / rho0^nm| / (n-m)^2 for every upper-triangle pair with
    |rho0^nm| above ``support_tol``.  Each entry estimates Gamma.
    """
    a0, at = np.abs(rho0.entries), np.abs(rho_t.entries)
    out = {}
    for n in range(rho0.dim):
        for m in range(n + 1, rho0.dim):
            if a0[n, m] > support_tol:
                out[(n, m)] = float(-np.log(at[n, m] / a0[n, m]) / (n - m) ** 2)
    return out


def exponent_scaling_check(rho0: DensityMatrix, dmap: DephasingMap | float) -> dict:
    """
    Dephase ``rho0`` and confirm every off-diagonal pair decays with the same
    Gamma once divided by (n-m)^2.

    Raises
    ------
    NoOffDiagonalSupport
        If fewer than two distinct |n-m| carry nonzero coherence.
    """
    if not isinstance(dmap, DephasingMap):
        dmap = DephasingMap(float(dmap))
    ratios = exponent_ratios(rho0, dephase(rho0, dmap))
    if len({m - n for n, m in ratios}) < 2:
        raise NoOffDiagonalSupport("need nonzero coherences at two distinct |n-m|")
    dev = max(abs(r - dmap.gamma) for r in ratios.values())
    return {"gamma": dmap.gamma, "ratios": ratios, "max_deviation": dev, "ok": dev <= 1e-10}
