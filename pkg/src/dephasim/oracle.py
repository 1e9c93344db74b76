"""
Brute-force check of the dephasing law.

The full system + bath Hamiltonian is built on truncated Fock spaces, the
decoupled initial state is propagated exactly, the bath is traced out and
the resulting off-diagonal magnitudes are compared with exp(-(n-m)^2 Gamma).
Nothing in here calls the analytic rate functions.

Product basis ordering: system index slowest, then bath modes in declaration
order, Fock index fastest within each factor.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy import linalg

from .model import (
    DensityMatrix,
    FiniteBath,
    GammaSeries,
    SystemSpec,
    Temperature,
    as_temperature,
    validate,
)

__all__ = [
    "PURE_BUDGET",
    "MIXED_BUDGET",
    "LEAK_TOL",
    "DimensionBudgetExceeded",
    "TruncationInadequate",
    "GridMismatch",
    "OracleScenario",
    "OracleResult",
    "Propagator",
    "annihilation",
    "number_op",
    "build_hamiltonian",
    "thermal_mode_state",
    "initial_universe",
    "partial_trace_bath",
    "evolve_exact",
    "comparison_table",
    "compare",
]

PURE_BUDGET = 4096
MIXED_BUDGET = 256
LEAK_TOL = 1e-8
NORM_TOL = 1e-10
EIG_TOL = 1e-12


class DimensionBudgetExceeded(ValueError):
    pass


class TruncationInadequate(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OracleScenario:
    system: SystemSpec
    bath: FiniteBath
    cutoffs: tuple[int, ...]
    temp: Temperature
    rho_s0: DensityMatrix
    times: np.ndarray
    pure_budget: int = PURE_BUDGET
    mixed_budget: int = MIXED_BUDGET
    leak_tol: float = LEAK_TOL

    def __post_init__(self):
        object.__setattr__(self, "cutoffs", tuple(int(d) for d in self.cutoffs))
        object.__setattr__(self, "temp", as_temperature(self.temp))
        times = np.array(self.times, dtype=float)
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def bath_dim(self) -> int:
        return int(np.prod(self.cutoffs))

    @property
    def total_dim(self) -> int:
        return self.system.dim * self.bath_dim

    @property
    def uses_statevector(self) -> bool:
        return self.temp.kT == 0 and self.rho_s0.is_pure()

    def check(self) -> "OracleScenario":
        validate(self.system), validate(self.bath), validate(self.temp), validate(self.rho_s0)
        if len(self.cutoffs) != len(self.bath):
            raise ValueError("one Fock cutoff per bath mode is required")
        if any(d < 2 for d in self.cutoffs):
            raise ValueError("every Fock cutoff must be >= 2")
        if self.rho_s0.dim != self.system.dim:
            raise ValueError("rho_s0 dimension differs from system.dim")
        if self.times.ndim != 1 or self.times.size == 0 or self.times[0] < 0:
            raise ValueError("times must be a non-empty grid of t >= 0")
        budget = self.pure_budget if self.uses_statevector else self.mixed_budget
        if self.total_dim > budget:
            raise DimensionBudgetExceeded(
                f"total dimension {self.total_dim} exceeds budget {budget}")
        return self

    def to_dict(self) -> dict:
        return {
            "system": self.system.to_dict(),
            "bath": self.bath.to_dict(),
            "cutoffs": list(self.cutoffs),
            "temperature": self.temp.to_dict(),
            "rho0": self.rho_s0.to_dict(),
            "times": self.times.tolist(),
            "pure_budget": self.pure_budget,
            "mixed_budget": self.mixed_budget,
            "leak_tol": self.leak_tol,
        }


@dataclass(frozen=True, eq=False)
class OracleResult:
    times: np.ndarray
    states: np.ndarray  # (T, dim, dim) reduced system matrices
    rho_s0: DensityMatrix
    norm_defect: np.ndarray  # (T,)
    top_population: np.ndarray  # (T, n_modes)
    eig_residual: float
    method: str
    params: dict = field(default_factory=dict)

    def reduced(self, k: int) -> DensityMatrix:
        return DensityMatrix(self.states[k])

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "params": self.params,
            "times": self.times.tolist(),
            "rho0": self.rho_s0.to_dict(),
            "states": {"real": self.states.real.tolist(), "imag": self.states.imag.tolist()},
            "diagnostics": {
                "norm_defect": self.norm_defect.tolist(),
                "top_population": self.top_population.tolist(),
                "eig_residual": self.eig_residual,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OracleResult":
        from .model import density_from_dict

        st = d["states"]
        diag = d["diagnostics"]
        return cls(
            times=np.asarray(d["times"], dtype=float),
            states=np.asarray(st["real"]) + 1j * np.asarray(st["imag"]),
            rho_s0=density_from_dict(d["rho0"]),
            norm_defect=np.asarray(diag["norm_defect"], dtype=float),
            top_population=np.asarray(diag["top_population"], dtype=float),
            eig_residual=float(diag["eig_residual"]),
            method=d.get("method", "unknown"),
            params=d.get("params", {}),
        )


# --- operators ---------------------------------------------------------------


def annihilation(d: int) -> np.ndarray:
    """Truncated a with a|k> = sqrt(k)|k-1>."""
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1)


def number_op(d: int) -> np.ndarray:
    return np.diag(np.arange(d, dtype=float))


def _embed(op: np.ndarray, slot: int, dims: list[int]) -> np.ndarray:
    factors = [op if i == slot else np.eye(d) for i, d in enumerate(dims)]
    return reduce(np.kron, factors)


def build_hamiltonian(scn: OracleScenario) -> np.ndarray:
    """
    H = w0 N_s (x) 1 + w0 N_s (x) sum_i lambda_i (a_i^+ + a_i) + 1 (x) sum_i w_i a_i^+ a_i
    as a dense real symmetric matrix.
    """
    scn.check()
    dim = scn.system.dim
    dims = list(scn.cutoffs)
    bath_dim = scn.bath_dim
    coupling = np.zeros((bath_dim, bath_dim))
    free = np.zeros((bath_dim, bath_dim))
    for i, (mode, d) in enumerate(zip(scn.bath.modes, dims)):
        a = annihilation(d)
        coupling += mode.lam * _embed(a + a.T, i, dims)
        free += mode.omega * _embed(number_op(d), i, dims)
    n_s = scn.system.omega0 * number_op(dim)
    h = np.kron(n_s, np.eye(bath_dim)) + np.kron(n_s, coupling) + np.kron(np.eye(dim), free)
    return 0.5 * (h + h.T)


def thermal_mode_state(omega: float, temp, d: int) -> np.ndarray:
    """Boltzmann populations exp(-k omega / kT) normalized over the d retained levels."""
    if d < 2:
        raise ValueError("cutoff d must be >= 2")
    kT = as_temperature(temp).kT
    p = np.zeros(d)
    if kT == 0:
        p[0] = 1.0
    else:
        p = np.exp(-np.arange(d) * omega / kT)
        p /= p.sum()
    return np.diag(p)


def initial_universe(scn: OracleScenario) -> np.ndarray:
    """State vector (pure runs) or density matrix of rho_S(0) (x) rho_B."""
    if scn.uses_statevector:
        w, v = np.linalg.eigh(scn.rho_s0.entries)
        phi = v[:, -1]
        vac = np.zeros(scn.bath_dim)
        vac[0] = 1.0
        return np.kron(phi, vac)
    rho_b = reduce(np.kron, [thermal_mode_state(m.omega, scn.temp, d)
                             for m, d in zip(scn.bath.modes, scn.cutoffs)])
    return np.kron(scn.rho_s0.entries, rho_b)


def partial_trace_bath(state: np.ndarray, dim: int, bath_dim: int) -> np.ndarray:
    if state.ndim == 1:
        psi = state.reshape(dim, bath_dim)
        return psi @ psi.conj().T
    rho = state.reshape(dim, bath_dim, dim, bath_dim)
    return np.einsum("ikjk->ij", rho)


def _top_populations(diag: np.ndarray, scn: OracleScenario) -> np.ndarray:
    p = diag.reshape((scn.system.dim,) + scn.cutoffs)
    out = []
    for i in range(len(scn.cutoffs)):
        axes = tuple(ax for ax in range(p.ndim) if ax != i + 1)
        out.append(p.sum(axis=axes)[-1])
    return np.array(out)


class Propagator:
    """exp(-iHt) through one dense Hermitian eigendecomposition of H."""

    def __init__(self, h: np.ndarray):
        self.energies, self.vectors = linalg.eigh(h)
        scale = max(1.0, float(np.max(np.abs(self.energies))))
        v = self.vectors
        resid = np.max(np.abs(h @ v - v * self.energies)) / scale
        orth = np.max(np.abs(v.conj().T @ v - np.eye(len(v))))
        self.residual = float(max(resid, orth))

    def unitary(self, t: float) -> np.ndarray:
        v = self.vectors
        return (v * np.exp(-1j * self.energies * t)) @ v.conj().T

    def evolve_state(self, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Columns are psi(t_k)."""
        c = self.vectors.conj().T @ psi0
        phases = np.exp(-1j * np.outer(self.energies, times))
        return self.vectors @ (phases * c[:, None])

    def evolve_density(self, rho0: np.ndarray, t: float) -> np.ndarray:
        v = self.vectors
        r = v.conj().T @ rho0 @ v
        ph = np.exp(-1j * self.energies * t)
        return v @ (ph[:, None] * r * ph.conj()[None, :]) @ v.conj().T


def evolve_exact(scn: OracleScenario) -> OracleResult:
    """
    Propagate rho_S(0) (x) rho_B under the full Hamiltonian and trace out the bath.

    Raises
    ------
    DimensionBudgetExceeded
        Product space larger than the configured budget.
    TruncationInadequate
        Some mode's top Fock level carries more than ``leak_tol`` population,
        or unitarity / eigendecomposition checks fail.
    """
    scn.check()
    dim, bath_dim = scn.system.dim, scn.bath_dim
    prop = Propagator(build_hamiltonian(scn))
    if prop.residual > EIG_TOL * 100:
        raise TruncationInadequate(f"eigendecomposition residual {prop.residual:.2e}")
    state0 = initial_universe(scn)
    times = scn.times
    states = np.empty((len(times), dim, dim), dtype=complex)
    defect = np.empty(len(times))
    tops = np.empty((len(times), len(scn.bath)))
    if scn.uses_statevector:
        method = "statevector"
        psis = prop.evolve_state(state0, times)
        for k in range(len(times)):
            psi = psis[:, k]
            probs = np.abs(psi) ** 2
            states[k] = partial_trace_bath(psi, dim, bath_dim)
            defect[k] = abs(probs.sum() - 1.0)
            tops[k] = _top_populations(probs, scn)
    else:
        method = "density-matrix"
        for k, t in enumerate(times):
            rho = prop.evolve_density(state0, float(t))
            diag = rho.diagonal().real
            states[k] = partial_trace_bath(rho, dim, bath_dim)
            defect[k] = abs(np.trace(rho) - 1.0)
            tops[k] = _top_populations(diag, scn)
    result = OracleResult(
        times=times.copy(),
        states=states,
        rho_s0=scn.rho_s0,
        norm_defect=defect,
        top_population=tops,
        eig_residual=prop.residual,
        method=method,
        params=scn.to_dict(),
    )
    if np.max(defect) >= NORM_TOL:
        raise TruncationInadequate(f"norm defect {np.max(defect):.2e}", result)
    if np.max(tops) > scn.leak_tol:
        i = int(np.argmax(np.max(tops, axis=0)))
        raise TruncationInadequate(
            f"mode {i} top-level population {np.max(tops):.2e} exceeds leak_tol {scn.leak_tol:g}",
            result)
    return result


def comparison_table(result: OracleResult, gamma: GammaSeries) -> np.ndarray:
    """
    Array (T, dim, dim) of |rho^nm(t)| - |rho^nm(0)| exp(-(n-m)^2 Gamma(t)).

    Raises
    ------
    GridMismatch
        Time grids differ.
    """
    tg = np.asarray(gamma.times)
    if tg.shape != result.times.shape or not np.allclose(tg, result.times, rtol=1e-12, atol=0):
        raise GridMismatch("oracle and gamma series are sampled on different grids")
    dim = result.rho_s0.dim
    n = np.arange(dim)
    diff2 = (n[:, None] - n[None, :]) ** 2
    a0 = np.abs(result.rho_s0.entries)
    predicted = a0[None] * np.exp(-diff2[None] * np.asarray(gamma.values)[:, None, None])
    return np.abs(result.states) - predicted


def compare(result: OracleResult, gamma: GammaSeries) -> float:
    """Max over (n, m, t) of the magnitude mismatch against the dephasing law."""
    return float(np.max(np.abs(comparison_table(result, gamma))))
