"""Vectorized adaptive panel quadrature on a finite interval."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

_NODES_LO, _WEIGHTS_LO = np.polynomial.legendre.leggauss(10)
_NODES_HI, _WEIGHTS_HI = np.polynomial.legendre.leggauss(20)


class ToleranceNotMet(RuntimeError):
    def __init__(self, message: str, value: float, error: float):
        super().__init__(message)
        self.value = value
        self.error = error


@dataclass(frozen=True)
class PanelResult:
    value: float
    error: float
    panels: int
    bisections: int


def _rule(f, a, b, nodes, weights):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * nodes[None, :]
    return half * (f(x) @ weights)


def integrate_panels(
    f: Callable[[np.ndarray], np.ndarray],
    breakpoints: np.ndarray,
    abs_tol: float,
    rel_tol: float,
    max_bisections: int,
    extra_error: float = 0.0,
) -> PanelResult:
    """
    Integrate ``f`` over [breakpoints[0], breakpoints[-1]].

    Each panel gets a 10- and a 20-point Gauss-Legendre rule; the 20-point
    value is kept and their difference is the panel's error estimate.  Panels
    are bisected, worst first, until the summed estimate (plus
    ``extra_error``) meets max(abs_tol, rel_tol * |I|).

    ``f`` must accept a 2-D array of abscissae and be vectorized.
    """
    bp = np.unique(np.asarray(breakpoints, dtype=float))
    a, b = bp[:-1], bp[1:]
    hi = _rule(f, a, b, _NODES_HI, _WEIGHTS_HI)
    lo = _rule(f, a, b, _NODES_LO, _WEIGHTS_LO)
    err = np.abs(hi - lo)
    bisections = 0
    while True:
        total = math.fsum(hi)
        err_total = math.fsum(err) + extra_error
        target = max(abs_tol, rel_tol * abs(total))
        if err_total <= target:
            return PanelResult(total, err_total, len(a), bisections)
        budget = max_bisections - bisections
        if budget <= 0:
            raise ToleranceNotMet(
                f"error estimate {err_total:.3e} exceeds target {target:.3e} "
                f"after {bisections} bisections",
                total,
                err_total,
            )
        # refine the worst panels that together hold half the excess error
        order = np.argsort(err)[::-1]
        cum = np.cumsum(err[order])
        n_split = int(np.searchsorted(cum, 0.5 * cum[-1])) + 1
        n_split = min(n_split, budget)
        pick = order[:n_split]
        keep = np.ones(len(a), dtype=bool)
        keep[pick] = False
        m = 0.5 * (a[pick] + b[pick])
        na = np.concatenate([a[pick], m])
        nb = np.concatenate([m, b[pick]])
        nhi = _rule(f, na, nb, _NODES_HI, _WEIGHTS_HI)
        nlo = _rule(f, na, nb, _NODES_LO, _WEIGHTS_LO)
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        hi = np.concatenate([hi[keep], nhi])
        err = np.concatenate([err[keep], np.abs(nhi - nlo)])
        order = np.argsort(a, kind="stable")
        a, b, hi, err = a[order], b[order], hi[order], err[order]
        bisections += n_split
