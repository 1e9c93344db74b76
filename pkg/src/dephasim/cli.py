"""
Command line entry point: ``dephasim <job> --config <path> [--out <path>] [--format csv|json]``.

Every output embeds the normalized configuration and the library version, and
contains nothing run-dependent, so identical configs give byte-identical files.
Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import __version__
from .continuum import (
    QuadratureConfig,
    RegimeWarning,
    ToleranceNotMet,
    gamma_decomposition,
    gamma_high_temperature,
    gamma_quadrature,
    gamma_quadrature_series,
    gamma_short_time,
)
from .evolution import DephasingMap, coherence_l1, dephase
from .finite_bath import (
    DEFAULT_MAX_DEN,
    DEFAULT_TOL,
    detect_periodicity,
    gamma_finite_series,
    verify_recurrence,
)
from .model import (
    GammaSeries,
    Tolerances,
    ValidationError,
    from_dict,
    validate,
)
from .oracle import (
    LEAK_TOL,
    MIXED_BUDGET,
    PURE_BUDGET,
    DimensionBudgetExceeded,
    GridMismatch,
    OracleResult,
    OracleScenario,
    TruncationInadequate,
    compare,
    evolve_exact,
)

JOBS = ("finite", "continuum", "closed_form", "evolve", "oracle", "periodicity", "compare")
SCHEMA_ID = "dephasim-config/1"


class ConfigError(ValueError):
    pass


class EmptySeries(ValueError):
    pass


def load_schema() -> dict:
    text = resources.files("dephasim").joinpath("schemas/run_config.schema.json").read_text()
    return json.loads(text)


# --- configuration -----------------------------------------------------------


def _norm_grid(g: dict) -> dict:
    out = {"start": float(g["start"]), "stop": float(g["stop"]), "count": int(g["count"]),
           "spacing": g.get("spacing", "linear")}
    if out["count"] > 1 and not out["stop"] > out["start"]:
        raise ConfigError("grid.stop must exceed grid.start")
    if out["start"] < 0:
        raise ConfigError("grid.start must be >= 0")
    if out["spacing"] == "log" and out["start"] <= 0:
        raise ConfigError("log grid needs start > 0")
    return out


def make_grid(g: dict) -> np.ndarray:
    if g["count"] == 1:
        return np.array([g["start"]])
    if g["spacing"] == "log":
        return np.geomspace(g["start"], g["stop"], g["count"])
    return np.linspace(g["start"], g["stop"], g["count"])


def _norm_model(kind: str, d: dict | None, default: dict | None = None) -> dict:
    if d is None:
        d = default
    return validate(from_dict(kind, d)).to_dict()


def _norm_quadrature(d: dict | None) -> dict:
    return QuadratureConfig(**(d or {})).to_dict()


def _norm_summary(d: dict | None) -> dict:
    d = d or {}
    return {"t_burn": float(d.get("t_burn", 1.0)),
            "band": [float(x) for x in d.get("band", [5.0, 15.0])]}


def _norm_rate(d: dict) -> dict:
    (kind, body), = d.items()
    if kind == "finite":
        return {"finite": {
            "system": _norm_model("SystemSpec", body["system"]),
            "bath": _norm_model("FiniteBath", body["bath"]),
            "temperature": _norm_model("Temperature", body.get("temperature"), {"kT": 0.0}),
        }}
    out = {
        "spectral_density": _norm_model("OhmicSpectralDensity", body["spectral_density"]),
        "temperature": _norm_model("Temperature", body.get("temperature"), {"kT": 0.0}),
    }
    if kind == "continuum":
        out["quadrature"] = _norm_quadrature(body.get("quadrature"))
    return {kind: out}


def _normalize_job(job: str, d: dict, tol: Tolerances) -> dict:
    temp = lambda: _norm_model("Temperature", d.get("temperature"), {"kT": 0.0})  # noqa: E731
    if job == "finite":
        return {"system": _norm_model("SystemSpec", d["system"]),
                "bath": _norm_model("FiniteBath", d["bath"]),
                "temperature": temp(), "grid": _norm_grid(d["grid"]),
                "summary": _norm_summary(d.get("summary"))}
    if job == "continuum":
        return {"spectral_density": _norm_model("OhmicSpectralDensity", d["spectral_density"]),
                "temperature": temp(), "grid": _norm_grid(d["grid"]),
                "quadrature": _norm_quadrature(d.get("quadrature")),
                "summary": _norm_summary(d.get("summary"))}
    if job == "closed_form":
        return {"spectral_density": _norm_model("OhmicSpectralDensity", d["spectral_density"]),
                "temperature": temp(), "grid": _norm_grid(d["grid"])}
    if job == "evolve":
        rho = validate(from_dict("DensityMatrix", d["rho0"]), tol)
        return {"rho0": rho.to_dict(), "rate": _norm_rate(d["rate"]), "grid": _norm_grid(d["grid"])}
    if job == "oracle":
        rho = validate(from_dict("DensityMatrix", d["rho0"]), tol)
        return {"system": _norm_model("SystemSpec", d["system"]),
                "bath": _norm_model("FiniteBath", d["bath"]),
                "cutoffs": [int(c) for c in d["cutoffs"]],
                "temperature": temp(), "rho0": rho.to_dict(),
                "grid": _norm_grid(d["grid"]),
                "pure_budget": int(d.get("pure_budget", PURE_BUDGET)),
                "mixed_budget": int(d.get("mixed_budget", MIXED_BUDGET)),
                "leak_tol": float(d.get("leak_tol", LEAK_TOL))}
    if job == "periodicity":
        return {"bath": _norm_model("FiniteBath", d["bath"]),
                "system": _norm_model("SystemSpec", d.get("system"), {"omega0": 1.0}),
                "tol": float(d.get("tol", DEFAULT_TOL)),
                "max_den": int(d.get("max_den", DEFAULT_MAX_DEN))}
    if job == "compare":
        return {"oracle": str(d["oracle"]), "gamma": str(d["gamma"])}
    raise ConfigError(f"unknown job {job!r}")


@dataclass
class RunConfig:
    job: str
    spec: dict
    format: str = "csv"
    path: str | None = None
    tolerances: dict = field(default_factory=lambda: Tolerances().__dict__.copy())

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_ID,
            self.job: copy.deepcopy(self.spec),
            "output": {"format": self.format, "path": self.path},
            "tolerances": dict(self.tolerances),
        }

    def emit(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def parse_config(data: dict | str) -> RunConfig:
    """Schema-check, validate and normalize a configuration document.

    Raises ``ConfigError`` or ``ValidationError`` on bad input.
    """
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    try:
        jsonschema.validate(data, load_schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {path}: {exc.message}") from None
    job = next(j for j in JOBS if j in data)
    tol = Tolerances(**{k: float(v) for k, v in data.get("tolerances", {}).items()})
    try:
        spec = _normalize_job(job, data[job], tol)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed {job} section: {exc}") from None
    out = data.get("output", {})
    return RunConfig(job=job, spec=spec, format=out.get("format", "csv"),
                     path=out.get("path"), tolerances=dict(tol.__dict__))


def load_config(path: str | os.PathLike) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} does not exist")
    return parse_config(p.read_text())


# --- output formatting ---------------------------------------------------------


def fmt(x: float) -> str:
    """17 significant digits: every double survives a text round trip."""
    return format(float(x), ".17g")


def _header(cfg: RunConfig, extra: dict | None = None) -> list[str]:
    lines = [f"# dephasim {__version__}",
             f"# job: {cfg.job}",
             "# config: " + json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))]
    for key, val in (extra or {}).items():
        lines.append(f"# {key}: " + json.dumps(val, sort_keys=True, separators=(",", ":")))
    return lines


def write_csv(cfg: RunConfig, columns: dict[str, np.ndarray], extra: dict | None = None) -> str:
    buf = io.StringIO()
    for line in _header(cfg, extra):
        buf.write(line + "\n")
    names = list(columns)
    buf.write(",".join(names) + "\n")
    cols = [np.asarray(columns[n]) for n in names]
    for row in zip(*cols):
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(cfg: RunConfig, result: dict) -> str:
    doc = {"dephasim_version": __version__, "job": cfg.job, "config": cfg.to_dict(),
           "result": _json_safe(result)}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def summarize(series: GammaSeries, t_burn: float = 1.0, band=(5.0, 15.0)) -> dict:
    """Mean, max, min over t >= t_burn and the fraction of samples inside ``band``."""
    t, v = np.asarray(series.times), np.asarray(series.values)
    if v.size == 0:
        raise EmptySeries("series has no samples")
    late = v[t >= t_burn]
    lo, hi = band
    return {
        "mean": float(np.mean(v)),
        "min_after_burn": float(np.min(late)) if late.size else None,
        "max": float(np.max(v)),
        "fraction_in_band": float(np.mean((v >= lo) & (v <= hi))),
        "t_burn": float(t_burn),
        "band": [float(lo), float(hi)],
        "returns_to_zero": bool(np.any(v[t > 0] <= 1e-10)),
    }


def emit_figure_data(series: GammaSeries, t_burn: float = 1.0, band=(5.0, 15.0),
                     header: list[str] | None = None) -> str:
    """CSV text of (t, gamma) preceded by a ``# summary:`` comment block."""
    summary = summarize(series, t_burn, band)
    buf = io.StringIO()
    for line in header or []:
        buf.write(line + "\n")
    buf.write("# summary: " + json.dumps(summary, sort_keys=True, separators=(",", ":")) + "\n")
    buf.write("t,gamma\n")
    for ti, gi in zip(series.times, series.values):
        buf.write(f"{fmt(ti)},{fmt(gi)}\n")
    return buf.getvalue()


def read_gamma_file(path: str | os.PathLike) -> GammaSeries:
    """Load a series written by the finite or continuum job (CSV or JSON)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        res = json.loads(text)["result"]
        return GammaSeries(times=res["times"], values=res["values"],
                           method=res.get("method", "unknown"))
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    names = rows[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in rows[1:]])
    if data.size == 0:
        raise EmptySeries(f"{path} holds no samples")
    return GammaSeries(times=data[:, names.index("t")], values=data[:, names.index("gamma")],
                       method="file")


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- jobs ------------------------------------------------------------------------


def _run_finite(cfg: RunConfig) -> str:
    s = cfg.spec
    series = gamma_finite_series(from_dict("FiniteBath", s["bath"]),
                                 from_dict("SystemSpec", s["system"]),
                                 from_dict("Temperature", s["temperature"]),
                                 make_grid(s["grid"]))
    summ = s["summary"]
    if cfg.format == "json":
        res = series.to_dict()
        res["summary"] = summarize(series, summ["t_burn"], summ["band"])
        return write_json(cfg, res)
    return emit_figure_data(series, summ["t_burn"], summ["band"], header=_header(cfg))


def _run_continuum(cfg: RunConfig) -> str:
    s = cfg.spec
    series = gamma_quadrature_series(from_dict("OhmicSpectralDensity", s["spectral_density"]),
                                     from_dict("Temperature", s["temperature"]),
                                     make_grid(s["grid"]), QuadratureConfig(**s["quadrature"]))
    summ = summarize(series, s["summary"]["t_burn"], s["summary"]["band"])
    if cfg.format == "json":
        res = series.to_dict()
        res["summary"] = summ
        return write_json(cfg, res)
    return write_csv(cfg, {"t": series.times, "gamma": series.values, "error": series.errors},
                     {"summary": summ})


def _run_closed_form(cfg: RunConfig) -> str:
    s = cfg.spec
    sd = from_dict("OhmicSpectralDensity", s["spectral_density"])
    temp = from_dict("Temperature", s["temperature"])
    times = make_grid(s["grid"])
    cols = {k: [] for k in ("gamma_vac", "gamma_therm", "gamma_total", "short_time",
                            "high_temperature")}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RegimeWarning)
        for t in times:
            dec = gamma_decomposition(sd, temp, float(t))
            cols["gamma_vac"].append(dec.vac)
            cols["gamma_therm"].append(dec.therm)
            cols["gamma_total"].append(dec.total)
            cols["short_time"].append(gamma_short_time(sd, temp, float(t)))
            cols["high_temperature"].append(gamma_high_temperature(sd, temp, float(t)))
    notes = sorted({str(w.message).split(" (")[0] for w in caught})
    meta = {"approximation": "valid for kT << cutoff_upper", "regime_warnings": notes}
    if cfg.format == "json":
        return write_json(cfg, {"times": times, **cols, **meta})
    return write_csv(cfg, {"t": times, **cols}, meta)


def _rate_fn(rate: dict):
    (kind, body), = rate.items()
    temp = from_dict("Temperature", body["temperature"])
    if kind == "finite":
        bath, system = from_dict("FiniteBath", body["bath"]), from_dict("SystemSpec", body["system"])
        return lambda times: gamma_finite_series(bath, system, temp, times).values
    sd = from_dict("OhmicSpectralDensity", body["spectral_density"])
    if kind == "continuum":
        qc = QuadratureConfig(**body["quadrature"])
        return lambda times: np.array([gamma_quadrature(sd, temp, float(t), qc).value
                                       for t in times])
    return lambda times: np.array([gamma_decomposition(sd, temp, float(t)).total
                                   for t in times])


def _run_evolve(cfg: RunConfig) -> str:
    s = cfg.spec
    tol = Tolerances(**cfg.tolerances)
    rho0 = from_dict("DensityMatrix", s["rho0"])
    times = make_grid(s["grid"])
    source = next(iter(s["rate"]))
    gammas = _rate_fn(s["rate"])(times)
    states = [dephase(rho0, DephasingMap(float(g), source), tol) for g in gammas]
    l1 = [coherence_l1(r) for r in states]
    if cfg.format == "json":
        return write_json(cfg, {
            "times": times, "gamma": gammas, "coherence_l1": l1,
            "states": [r.to_dict() for r in states],
        })
    return write_csv(cfg, {"t": times, "gamma": gammas, "coherence_l1": l1})


def _scenario(s: dict) -> OracleScenario:
    return OracleScenario(
        system=from_dict("SystemSpec", s["system"]),
        bath=from_dict("FiniteBath", s["bath"]),
        cutoffs=tuple(s["cutoffs"]),
        temp=from_dict("Temperature", s["temperature"]),
        rho_s0=from_dict("DensityMatrix", s["rho0"]),
        times=make_grid(s["grid"]),
        pure_budget=s["pure_budget"],
        mixed_budget=s["mixed_budget"],
        leak_tol=s["leak_tol"],
    )


def _run_oracle(cfg: RunConfig) -> str:
    result = evolve_exact(_scenario(cfg.spec))
    if cfg.format == "json":
        return write_json(cfg, result.to_dict())
    dim = result.rho_s0.dim
    cols = {k: [] for k in ("t", "n", "m", "real", "imag", "abs")}
    for k, t in enumerate(result.times):
        for n in range(dim):
            for m in range(dim):
                z = result.states[k, n, m]
                for key, val in zip(cols, (t, n, m, z.real, z.imag, abs(z))):
                    cols[key].append(val)
    diag = {"eig_residual": result.eig_residual,
            "max_norm_defect": float(result.norm_defect.max()),
            "max_top_population": float(result.top_population.max()),
            "method": result.method}
    return write_csv(cfg, cols, {"diagnostics": diag})


def _run_periodicity(cfg: RunConfig) -> str:
    s = cfg.spec
    bath = from_dict("FiniteBath", s["bath"])
    report = detect_periodicity(bath, s["tol"], s["max_den"])
    res = report.to_dict()
    if report.periodic:
        system = from_dict("SystemSpec", s["system"])
        res["residuals"] = [verify_recurrence(bath, system, report, k) for k in (1, 2, 3)]
    if cfg.format == "json":
        return write_json(cfg, res)
    return _kv_csv(cfg, res)


def _kv_csv(cfg: RunConfig, res: dict) -> str:
    buf = io.StringIO()
    for line in _header(cfg):
        buf.write(line + "\n")
    buf.write("key,value\n")
    for k in sorted(res):
        v = res[k]
        v = fmt(v) if isinstance(v, float) else json.dumps(_json_safe(v), separators=(";", ":"))
        buf.write(f"{k},{v}\n")
    return buf.getvalue()


def _run_compare(cfg: RunConfig) -> str:
    s = cfg.spec
    for key in ("oracle", "gamma"):
        if not Path(s[key]).is_file():
            raise ConfigError(f"compare.{key}: file {s[key]} does not exist")
    oracle_doc = json.loads(Path(s["oracle"]).read_text())
    result = OracleResult.from_dict(oracle_doc["result"])
    series = read_gamma_file(s["gamma"])
    res = {"max_deviation": compare(result, series), "n_times": len(result.times),
           "oracle": s["oracle"], "gamma": s["gamma"]}
    if cfg.format == "json":
        return write_json(cfg, res)
    return _kv_csv(cfg, res)


RUNNERS = {
    "finite": _run_finite,
    "continuum": _run_continuum,
    "closed_form": _run_closed_form,
    "evolve": _run_evolve,
    "oracle": _run_oracle,
    "periodicity": _run_periodicity,
    "compare": _run_compare,
}


def run(cfg: RunConfig, config_path: str | None = None) -> str:
    """Execute one job; write to ``cfg.path`` if set and return the text."""
    if cfg.path:
        out = Path(cfg.path).resolve()
        taken = [config_path] if config_path else []
        if cfg.job == "compare":
            taken += [cfg.spec["oracle"], cfg.spec["gamma"]]
        if any(out == Path(p).resolve() for p in taken):
            raise ConfigError(f"output path {cfg.path} collides with an input file")
    text = RUNNERS[cfg.job](cfg)
    if cfg.path:
        atomic_write(cfg.path, text)
    return text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dephasim", description=__doc__.strip().splitlines()[0])
    p.add_argument("job", choices=JOBS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output path (overrides output.path; '-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="overrides output.format")
    p.add_argument("--version", action="version", version=f"dephasim {__version__}")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.job != args.job:
            raise ConfigError(f"config describes job {cfg.job!r}, not {args.job!r}")
        if args.format:
            cfg.format = args.format
        if args.out:
            cfg.path = None if args.out == "-" else args.out
        text = run(cfg, args.config)
    except (ConfigError, ValidationError, DimensionBudgetExceeded, GridMismatch,
            EmptySeries, ValueError) as exc:
        print(f"dephasim: invalid input: {exc}", file=sys.stderr)
        return 1
    except (ToleranceNotMet, TruncationInadequate) as exc:
        print(f"dephasim: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if not cfg.path:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
