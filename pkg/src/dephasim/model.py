"""
Domain types shared by the rate, evolution and oracle modules.

Units: hbar = k_B = 1, so frequencies, temperatures and inverse times all
share one unit.  Types are frozen dataclasses; construction does not check
invariants, :func:`validate` does.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

__all__ = [
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "Violation",
    "ValidationError",
    "SystemSpec",
    "BathMode",
    "FiniteBath",
    "Temperature",
    "OhmicSpectralDensity",
    "DensityMatrix",
    "GammaSeries",
    "validate",
    "as_temperature",
    "from_dict",
]


@dataclass(frozen=True)
class Tolerances:
    """Acceptance thresholds for :class:`DensityMatrix` validation."""

    hermitian: float = 1e-12
    trace: float = 1e-12
    eigenvalue_floor: float = -1e-10


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class Violation:
    code: str
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} ({self.field}): {self.message}"


class ValidationError(ValueError):
    """Raised by :func:`validate`; ``violations`` lists every broken invariant."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


@dataclass(frozen=True)
class SystemSpec:
    omega0: float
    dim: int = 2

    def to_dict(self) -> dict:
        return {"omega0": self.omega0, "dim": self.dim}


@dataclass(frozen=True)
class BathMode:
    lam: float
    omega: float

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "omega": self.omega}


@dataclass(frozen=True)
class FiniteBath:
    modes: tuple[BathMode, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))

    @classmethod
    def from_arrays(cls, lambdas: Sequence[float], omegas: Sequence[float]) -> "FiniteBath":
        if len(lambdas) != len(omegas):
            raise ValueError("lambdas and omegas differ in length")
        return cls(tuple(BathMode(float(l), float(w)) for l, w in zip(lambdas, omegas)))

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([m.lam for m in self.modes], dtype=float)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes], dtype=float)

    def __len__(self) -> int:
        return len(self.modes)

    def to_dict(self) -> dict:
        return {"modes": [m.to_dict() for m in self.modes]}


@dataclass(frozen=True)
class Temperature:
    kT: float = 0.0

    def to_dict(self) -> dict:
        return {"kT": self.kT}


def as_temperature(temp: "Temperature | float") -> Temperature:
    if isinstance(temp, Temperature):
        return temp
    return Temperature(float(temp))


@dataclass(frozen=True)
class OhmicSpectralDensity:
    """J(w) = C w exp(-w / cutoff_upper) for w > cutoff_lower, zero below."""

    coupling_c: float
    cutoff_upper: float
    cutoff_lower: float = 0.0

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        j = self.coupling_c * omega * np.exp(-omega / self.cutoff_upper)
        return np.where(omega >= self.cutoff_lower, j, 0.0)

    def to_dict(self) -> dict:
        return {
            "coupling_c": self.coupling_c,
            "cutoff_upper": self.cutoff_upper,
            "cutoff_lower": self.cutoff_lower,
        }


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=complex)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and bool(
            np.array_equal(self.entries, other.entries)
        )

    def __hash__(self):
        return hash(self.entries.tobytes())

    @classmethod
    def pure(cls, amplitudes: Sequence[complex]) -> "DensityMatrix":
        psi = np.asarray(amplitudes, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    def is_pure(self, tol: float = 1e-10) -> bool:
        w = np.linalg.eigvalsh(self.entries)
        return abs(w[-1] - 1.0) < tol

    def to_dict(self) -> dict:
        return {"real": self.entries.real.tolist(), "imag": self.entries.imag.tolist()}


@dataclass(frozen=True, eq=False)
class GammaSeries:
    times: np.ndarray
    values: np.ndarray
    method: str
    params: Mapping[str, Any] = field(default_factory=dict)
    errors: np.ndarray | None = None

    def __post_init__(self):
        for name in ("times", "values", "errors"):
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.array(val, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.times)

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "params": dict(self.params),
            "times": self.times.tolist(),
            "values": self.values.tolist(),
        }
        if self.errors is not None:
            out["errors"] = self.errors.tolist()
        return out


# --- validation ------------------------------------------------------------


def _check_system(x: SystemSpec, prefix: str = "system") -> list[Violation]:
    out = []
    if not (math.isfinite(x.omega0) and x.omega0 > 0):
        out.append(Violation("NonPositiveFrequency", f"{prefix}.omega0", f"omega0={x.omega0} must be > 0"))
    if int(x.dim) != x.dim or x.dim < 2:
        out.append(Violation("InvalidDimension", f"{prefix}.dim", f"dim={x.dim} must be an integer >= 2"))
    return out


def _check_mode(x: BathMode, prefix: str = "mode") -> list[Violation]:
    out = []
    if not (math.isfinite(x.omega) and x.omega > 0):
        out.append(Violation("NonPositiveFrequency", f"{prefix}.omega", f"omega={x.omega} must be > 0"))
    if not math.isfinite(x.lam):
        out.append(Violation("NonFiniteCoupling", f"{prefix}.lambda", f"lambda={x.lam} must be finite"))
    return out


def _check_bath(x: FiniteBath, prefix: str = "bath") -> list[Violation]:
    if len(x.modes) == 0:
        return [Violation("EmptyBath", f"{prefix}.modes", "at least one mode is required")]
    out = []
    for i, m in enumerate(x.modes):
        out.extend(_check_mode(m, f"{prefix}.modes[{i}]"))
    return out


def _check_temperature(x: Temperature, prefix: str = "temperature") -> list[Violation]:
    if not (math.isfinite(x.kT) and x.kT >= 0):
        return [Violation("NegativeTemperature", f"{prefix}.kT", f"kT={x.kT} must be >= 0")]
    return []


def _check_sd(x: OhmicSpectralDensity, prefix: str = "spectral_density") -> list[Violation]:
    out = []
    if not (math.isfinite(x.coupling_c) and x.coupling_c >= 0):
        out.append(Violation("NegativeCoupling", f"{prefix}.coupling_c", f"C={x.coupling_c} must be >= 0"))
    if not (math.isfinite(x.cutoff_upper) and x.cutoff_upper > 0):
        out.append(Violation("NonPositiveFrequency", f"{prefix}.cutoff_upper",
                             f"cutoff_upper={x.cutoff_upper} must be > 0"))
    if not (math.isfinite(x.cutoff_lower) and x.cutoff_lower >= 0):
        out.append(Violation("NonPositiveFrequency", f"{prefix}.cutoff_lower",
                             f"cutoff_lower={x.cutoff_lower} must be >= 0"))
    elif x.cutoff_lower >= x.cutoff_upper:
        out.append(Violation("CutoffOrderViolation", f"{prefix}.cutoff_lower",
                             f"cutoff_lower={x.cutoff_lower} must be < cutoff_upper={x.cutoff_upper}"))
    return out


def _check_density(x: DensityMatrix, tol: Tolerances, prefix: str = "rho") -> list[Violation]:
    rho = x.entries
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
        return [Violation("NotSquare", prefix, f"shape {rho.shape} is not square")]
    if not np.all(np.isfinite(rho)):
        return [Violation("NonFinite", prefix, "entries must be finite")]
    out = []
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > tol.hermitian:
        out.append(Violation("NonHermitian", prefix, f"max |rho - rho^H| = {herm:.3e}"))
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol.trace:
        out.append(Violation("TraceNotOne", prefix, f"trace = {tr:.15g}"))
    wmin = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if wmin < tol.eigenvalue_floor:
        out.append(Violation("NotPositive", prefix, f"smallest eigenvalue {wmin:.3e}"))
    return out


def _check_series(x: GammaSeries, prefix: str = "series") -> list[Violation]:
    out = []
    t, v = x.times, x.values
    if t.shape != v.shape or t.ndim != 1:
        return [Violation("ShapeMismatch", prefix, "times and values must be equal-length vectors")]
    if len(t) == 0:
        return [Violation("EmptyGrid", f"{prefix}.times", "series is empty")]
    if t[0] < 0:
        out.append(Violation("NegativeTime", f"{prefix}.times", "times must be >= 0"))
    if np.any(np.diff(t) <= 0):
        out.append(Violation("NonMonotonicGrid", f"{prefix}.times", "times must be strictly increasing"))
    if np.any(v < 0):
        out.append(Violation("NegativeGamma", f"{prefix}.values", "gamma must be >= 0"))
    if np.any(v[t == 0] != 0):
        out.append(Violation("NonZeroAtOrigin", f"{prefix}.values", "gamma(0) must equal 0"))
    return out


def validate(value, tol: Tolerances | None = None):
    """Return ``value`` unchanged if all its invariants hold.

    Raises
    ------
    ValidationError
        Listing every violated invariant, not just the first one.
    """
    tol = tol or DEFAULT_TOLERANCES
    if isinstance(value, SystemSpec):
        violations = _check_system(value)
    elif isinstance(value, BathMode):
        violations = _check_mode(value)
    elif isinstance(value, FiniteBath):
        violations = _check_bath(value)
    elif isinstance(value, Temperature):
        violations = _check_temperature(value)
    elif isinstance(value, OhmicSpectralDensity):
        violations = _check_sd(value)
    elif isinstance(value, DensityMatrix):
        violations = _check_density(value, tol)
    elif isinstance(value, GammaSeries):
        violations = _check_series(value)
    else:
        raise TypeError(f"no validator for {type(value).__name__}")
    if violations:
        raise ValidationError(violations)
    return value


# --- JSON representation ---------------------------------------------------


def density_from_dict(d: Mapping) -> DensityMatrix:
    real = np.asarray(d["real"], dtype=float)
    imag = np.asarray(d.get("imag", np.zeros_like(real)), dtype=float)
    return DensityMatrix(real + 1j * imag)


def from_dict(kind: str, d: Mapping):
    """Inverse of the ``to_dict`` methods; ``kind`` is the type name."""
    if kind == "SystemSpec":
        return SystemSpec(omega0=float(d["omega0"]), dim=int(d.get("dim", 2)))
    if kind == "BathMode":
        return BathMode(lam=float(d["lambda"]), omega=float(d["omega"]))
    if kind == "FiniteBath":
        return FiniteBath(tuple(from_dict("BathMode", m) for m in d["modes"]))
    if kind == "Temperature":
        return Temperature(kT=float(d.get("kT", 0.0)))
    if kind == "OhmicSpectralDensity":
        return OhmicSpectralDensity(
            coupling_c=float(d["coupling_c"]),
            cutoff_upper=float(d["cutoff_upper"]),
            cutoff_lower=float(d.get("cutoff_lower", 0.0)),
        )
    if kind == "DensityMatrix":
        return density_from_dict(d)
    if kind == "GammaSeries":
        return GammaSeries(
            times=d["times"], values=d["values"], method=d.get("method", "unknown"),
            params=d.get("params", {}), errors=d.get("errors"),
        )
    raise KeyError(kind)


def with_tolerances(**overrides) -> Tolerances:
    return replace(DEFAULT_TOLERANCES, **overrides)
