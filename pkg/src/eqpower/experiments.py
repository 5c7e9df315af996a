"""Experiment configuration, convergence sweeps and result persistence."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .acf import DEFAULT_COVERAGE, BandlimitedSinc, Exponential, Jakes, Tabulated, nyquist_rate
from .errors import EqPowerError, NumericalError
from .estimation import EstimationProblem, equal_allocation, mse, mse_equiv
from .linalg import weak_norm
from .optimizer import OptimizerConfig, optimize

__all__ = [
    "ConfigError",
    "SweepConfig",
    "load_config",
    "parse_schedule",
    "geometric_schedule",
    "build_acf",
    "build_problem",
    "ConvergenceRecord",
    "CSV_COLUMNS",
    "sweep_record",
    "run_sweep",
    "converged_at",
    "write_csv",
    "write_json",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = ("n", "mse_eq", "mse_opt", "gap", "rel_gap", "mse_equiv_eq", "weak_gap", "iters", "converged", "ms")
ACF_KINDS = ("exponential", "jakes", "sinc", "tabulated")


class ConfigError(EqPowerError, ValueError):
    """Invalid configuration file or flag combination."""


@dataclass
class SweepConfig:
    """Everything needed to reproduce a run.

    Power per sample is ``rho`` so ``P_T(n) = rho * n``. The peak is
    ``pmax`` when given, else ``pmax_mult * rho``.
    """

    acf: str = "exponential"
    decay: float = 1.0
    doppler: float = 1.0
    bandwidth: float = 1.0
    table: list | None = None
    table_period: float = 1.0
    coverage: float = DEFAULT_COVERAGE
    sigma2: float = 1.0
    rho: float = 1.0
    pmax: float | None = None
    pmax_mult: float = 10.0
    n: list = field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64])
    tol: float = 1e-6
    gtol: float = 1e-9
    ftol: float = 1e-12
    max_iters: int = 5000
    seed: int = 0
    trials: int = 100
    workers: int = 1
    timing: bool = False
    format: str = "csv"
    out: str | None = None

    def validate(self) -> "SweepConfig":
        if self.acf not in ACF_KINDS:
            raise ConfigError(f"acf must be one of {ACF_KINDS}, got {self.acf!r}")
        if self.acf == "tabulated" and not self.table:
            raise ConfigError("tabulated ACF needs a 'table' of values")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        ns = [int(v) for v in self.n]
        if not ns or any(v < 1 for v in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError(f"n schedule must be strictly increasing positive integers, got {self.n}")
        self.n = ns
        for name in ("sigma2", "rho", "tol", "gtol", "ftol", "pmax_mult"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive number, got {value!r}")
        if self.pmax is not None and self.rho > self.pmax:
            raise ConfigError(f"rho={self.rho} exceeds the peak power pmax={self.pmax}")
        if self.pmax is None and self.pmax_mult < 1:
            raise ConfigError("pmax_mult must be >= 1 so that equal power is feasible")
        if self.max_iters < 1 or self.workers < 1:
            raise ConfigError("max_iters and workers must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        return self

    @property
    def peak_power(self) -> float:
        return self.pmax if self.pmax is not None else self.pmax_mult * self.rho

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(max_iterations=self.max_iters, g_tol=self.gtol, f_tol=self.ftol)

    def updated(self, **overrides) -> "SweepConfig":
        """Copy with the non-None ``overrides`` applied (flags beat file values)."""
        values = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(values) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return dataclasses.replace(self, **values)


def load_config(path) -> SweepConfig:
    """Read a YAML mapping of SweepConfig fields (``-`` and ``_`` both accepted)."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    data = {str(k).replace("-", "_"): v for k, v in data.items()}
    if "n" in data:
        data["n"] = parse_schedule(data["n"])
    if "n_range" in data:
        data["n"] = geometric_schedule(data.pop("n_range"))
    return SweepConfig().updated(**data)


def parse_schedule(spec) -> list[int]:
    """``"84,96,128"``, ``"1..128"``, mixtures of both, an int or a list."""
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, (list, tuple)):
        return [int(v) for v in spec]
    out = []
    try:
        for part in str(spec).split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise ConfigError(f"cannot parse n schedule {spec!r}") from None
    return out


def geometric_schedule(spec) -> list[int]:
    """``"lo:hi:factor"`` -> sorted distinct ``round(lo * factor**k) <= hi``."""
    try:
        lo, hi, factor = (float(v) for v in str(spec).split(":"))
    except ValueError:
        raise ConfigError(f"n range must look like lo:hi:factor, got {spec!r}") from None
    if lo < 1 or hi < lo or factor <= 1:
        raise ConfigError(f"bad n range {spec!r}: need 1 <= lo <= hi and factor > 1")
    out, v = [], lo
    while round(v) <= hi:
        if not out or round(v) > out[-1]:
            out.append(int(round(v)))
        v *= factor
    return out


def build_acf(config: SweepConfig):
    try:
        if config.acf == "exponential":
            return Exponential(config.decay)
        if config.acf == "jakes":
            return Jakes(config.doppler)
        if config.acf == "sinc":
            return BandlimitedSinc(config.bandwidth)
        return Tabulated(config.table_period, config.table)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_problem(config: SweepConfig, n: int) -> EstimationProblem:
    acf = build_acf(config)
    try:
        rate = nyquist_rate(acf, config.coverage)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return EstimationProblem.sampled(
        acf, n, rate=rate, sigma2=config.sigma2, rho=config.rho, peak_power=config.peak_power
    )


@dataclass
class ConvergenceRecord:
    n: int
    mse_eq: float = math.nan
    mse_opt: float = math.nan
    gap: float = math.nan
    rel_gap: float = math.nan
    mse_equiv_eq: float = math.nan
    weak_gap: float = math.nan
    iters: int = 0
    converged: bool = False
    ms: float | None = None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def sweep_record(config: SweepConfig, n: int) -> ConvergenceRecord:
    """One sweep row. Numerical failures become a row with ``status`` set."""
    start = time.perf_counter()
    try:
        problem = build_problem(config, n)
        p_eq = equal_allocation(problem)
        e_eq = mse(problem, p_eq).mse
        res = optimize(problem, config.optimizer_config())
        e_equiv = mse_equiv(problem, p_eq).mse
        weak_gap = weak_norm(problem.circulant.dense - problem.toeplitz.dense)
    except NumericalError as exc:
        log.warning("n=%d failed: %s", n, exc)
        return ConvergenceRecord(n, status=f"error: {exc}")
    ms = (time.perf_counter() - start) * 1e3 if config.timing else None
    gap = e_eq - res.mse_opt
    return ConvergenceRecord(
        n=n,
        mse_eq=e_eq,
        mse_opt=res.mse_opt,
        gap=gap,
        rel_gap=gap / e_eq,
        mse_equiv_eq=e_equiv,
        weak_gap=weak_gap,
        iters=res.iterations,
        converged=res.converged,
        ms=ms,
    )


def run_sweep(config: SweepConfig) -> list[ConvergenceRecord]:
    """Records for every scheduled n, ordered by n whatever the worker count."""
    config.validate()
    ns = list(config.n)
    if config.workers == 1:
        records = [sweep_record(config, n) for n in ns]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(lambda n: sweep_record(config, n), ns))
    return sorted(records, key=lambda r: r.n)


def converged_at(records, tol: float = 1e-6):
    """Smallest n with ``rel_gap <= tol`` that also holds at every larger n.

    Failed rows are ignored. Returns None if the last row misses ``tol``.
    """
    good = [r for r in records if r.ok]
    found = None
    for r in reversed(good):
        if r.rel_gap <= tol:
            found = r.n
        else:
            break
    return found


def _cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def write_csv(records, fh) -> None:
    """CSV with the fixed ``CSV_COLUMNS`` header; failed rows are skipped."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        if not r.ok:
            log.warning("skipping n=%d in CSV output (%s)", r.n, r.status)
            continue
        writer.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    return v


def write_json(records, fh, metadata=None) -> None:
    rows = [{k: _json_value(v) for k, v in dataclasses.asdict(r).items()} for r in records]
    json.dump({"metadata": metadata or {}, "records": rows}, fh, indent=2)
    fh.write("\n")


def config_metadata(config: SweepConfig) -> dict:
    meta = dataclasses.asdict(config)
    meta.pop("out", None)
    meta["peak_power"] = config.peak_power
    try:
        meta["rate_hz"] = nyquist_rate(build_acf(config), config.coverage)
    except (ConfigError, ValueError):
        pass
    return meta


def open_output(path):
    """File handle for ``path`` or None for stdout; parent dirs are created."""
    if path is None:
        return None
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return open(p, "w", newline="")
