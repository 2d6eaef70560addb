"""Parameter-grid studies and the figure datasets.

Every grid point runs the same pipeline: Gibbs state at ``beta = 1/kT`` ->
evolution to ``t`` -> observables. Points are independent, so they may be
evaluated in any order or in parallel; records always come back in row-major
grid order.
"""
from __future__ import annotations

import io
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .dynamics import (
    DEFAULT_TOL,
    IntegrationError,
    evolve_closed_form,
    evolve_ode,
    thermal_spectrum,
)
from .model import ModelParams, ParameterError, gibbs_state, validate_density
from .observables import (
    NumericalError,
    entanglement,
    specific_heat_from_spectrum,
    specific_heat_normalized,
)

PARAM_NAMES = ("t", "kT", "J", "Jz", "Dz", "gamma0", "gamma")
OBSERVABLES = ("c_n", "concurrence", "eof", "eigenvalues", "trace_residual")
METHODS = ("ode", "closed_form", "both")
SPACINGS = ("linear", "log", "values")

# Library defaults; no parameter values come with the reference figures.
DEFAULTS = {
    "t": 0.0,
    "kT": 1.0,
    "J": 1.0,
    "Jz": 0.5,
    "Dz": 0.5,
    "gamma0": 0.1,
    "gamma": 1.0,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Axis:
    name: str
    min: float = 0.0
    max: float = 0.0
    points: int = 2
    spacing: str = "linear"
    values: tuple = ()

    def __post_init__(self):
        if self.name not in PARAM_NAMES:
            raise ConfigError(f"unknown axis {self.name!r}; valid names: {', '.join(PARAM_NAMES)}")
        if self.spacing not in SPACINGS:
            raise ConfigError(f"axis {self.name}: spacing must be one of {SPACINGS}")
        if self.spacing == "values":
            if len(self.values) < 1:
                raise ConfigError(f"axis {self.name}: explicit values list is empty")
            return
        if self.points < 2:
            raise ConfigError(f"axis {self.name}: points must be >= 2, got {self.points}")
        if self.spacing == "log" and not (self.min > 0 and self.max > 0):
            raise ConfigError(f"axis {self.name}: log spacing needs positive bounds")

    @classmethod
    def explicit(cls, name, values):
        values = tuple(float(v) for v in values)
        return cls(name, min(values), max(values), len(values), "values", values)

    def grid(self) -> np.ndarray:
        if self.spacing == "values":
            return np.array(self.values, dtype=float)
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)

    def describe(self) -> str:
        if self.spacing == "values":
            return f"{self.name} values " + " ".join(_fmt(v) for v in self.values)
        return f"{self.name} {_fmt(self.min)} {_fmt(self.max)} {self.points} {self.spacing}"


@dataclass(frozen=True)
class SweepConfig:
    axes: tuple
    fixed: dict = field(default_factory=dict)
    observables: tuple = ("c_n", "concurrence", "eof")
    method: str = "closed_form"
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not 1 <= len(self.axes) <= 2:
            raise ConfigError(f"a sweep needs 1 or 2 axes, got {len(self.axes)}")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate sweep axes: {names}")
        for key in self.fixed:
            if key not in PARAM_NAMES:
                raise ConfigError(f"unknown parameter {key!r}; valid names: {', '.join(PARAM_NAMES)}")
        for obs in self.observables:
            if obs not in OBSERVABLES:
                raise ConfigError(f"unknown observable {obs!r}; valid: {', '.join(OBSERVABLES)}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 1e-12 <= self.tol <= 1e-4:
            raise ConfigError(f"tol must lie in [1e-12, 1e-4], got {self.tol!r}")

    def fixed_values(self) -> dict:
        swept = {a.name for a in self.axes}
        out = {k: v for k, v in DEFAULTS.items() if k not in swept}
        out.update({k: v for k, v in self.fixed.items() if k not in swept})
        return out

    def grid_points(self):
        """Row-major list of coordinate tuples."""
        return list(itertools.product(*(a.grid() for a in self.axes)))


@dataclass
class ObservableRecord:
    coords: dict
    params: dict
    method: str
    c_n: float = math.nan
    clipped: bool = False
    concurrence: float = math.nan
    eof: float = math.nan
    eigenvalues: tuple = (math.nan,) * 4
    min_eigenvalue: float = math.nan
    trace_residual: float = math.nan
    discrepancy: float = math.nan
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def _model(values: dict) -> ModelParams:
    return ModelParams(values["J"], values["Jz"], values["Dz"], values["gamma0"], values["gamma"])


def evaluate_point(values: dict, method: str = "closed_form", tol: float = DEFAULT_TOL) -> ObservableRecord:
    """Run the full pipeline for one parameter set (keys as ``PARAM_NAMES``)."""
    values = {**DEFAULTS, **values}
    rec = ObservableRecord(coords={}, params=dict(values), method=method)
    try:
        params = _model(values)
        kT, t = values["kT"], values["t"]
        if not (kT > 0 and math.isfinite(kT)):
            raise ParameterError(f"invariant kT > 0 violated (kT={kT!r})")
        if not t >= 0:
            raise ParameterError(f"invariant t >= 0 violated (t={t!r})")
        beta = 1.0 / kT
        rho0 = gibbs_state(params, beta)
        if method in ("closed_form", "both"):
            rho = evolve_closed_form(rho0, params, t).rho_t
            # exact spectrum of the evolved thermal state
            heat = specific_heat_from_spectrum(thermal_spectrum(params, beta, t), beta)
        if method in ("ode", "both"):
            rho_ode = evolve_ode(rho0, params, t, tol=tol).rho_t
            if method == "ode":
                rho = rho_ode
                heat = specific_heat_normalized(rho, beta)
            else:
                rec.discrepancy = float(np.max(np.abs(rho - rho_ode)))
        ent = entanglement(rho)
        rep = validate_density(rho)
    except (IntegrationError, NumericalError, ParameterError, ValueError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
        return rec
    rec.c_n = heat.c_n
    rec.clipped = heat.clipped
    rec.eigenvalues = tuple(float(x) for x in heat.eigenvalues)
    rec.concurrence = ent.concurrence
    rec.eof = ent.eof
    rec.min_eigenvalue = rep.min_eigenvalue
    rec.trace_residual = rep.trace_residual
    return rec


def run_sweep(config: SweepConfig, workers: int = 1, order=None) -> list:
    """Evaluate every grid point; records are returned in row-major order.

    ``order`` optionally permutes the evaluation sequence (a list of grid
    indices); it never changes the result.
    """
    fixed = config.fixed_values()
    names = [a.name for a in config.axes]
    points = config.grid_points()

    def task(idx):
        coords = dict(zip(names, (float(x) for x in points[idx])))
        rec = evaluate_point({**fixed, **coords}, config.method, config.tol)
        rec.coords = coords
        return idx, rec

    sequence = range(len(points)) if order is None else list(order)
    if sorted(sequence) != list(range(len(points))):
        raise ValueError("order must be a permutation of the grid indices")
    results = [None] * len(points)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for idx, rec in pool.map(task, sequence):
                results[idx] = rec
    else:
        for idx in sequence:
            results[idx] = task(idx)[1]
    return results


# -- figures -----------------------------------------------------------------

FIGURE_TIMES = (0.0, 1.0, 2.0, 5.0, 10.0)
_KT = Axis("kT", 0.05, 5.0, 31, "log")
_T = Axis("t", 0.0, 20.0, 21, "linear")
_BETA_01 = {"kT": 10.0}


def _figure_configs():
    return {
        "fig1a": SweepConfig((Axis.explicit("t", FIGURE_TIMES), _KT), {}, ("c_n",)),
        "fig1b": SweepConfig((_T, _KT), {}, ("c_n",)),
        "fig2": SweepConfig((_KT, Axis("J", 0.5, 10.0, 20, "linear")), {"t": 0.0}, ("c_n",)),
        "fig3a": SweepConfig((Axis("J", 0.5, 14.0, 28, "linear"), _T), _BETA_01, ("eof",)),
        "fig3b": SweepConfig(
            (Axis("J", 0.5, 14.0, 28, "linear"), Axis("Jz", 0.0, 5.0, 21, "linear")),
            {**_BETA_01, "t": 0.0},
            ("eof",),
        ),
        "fig4a": SweepConfig((Axis("Dz", 0.05, 5.0, 100, "linear"), _T), _BETA_01, ("eof",)),
        "fig4b": SweepConfig((Axis.explicit("t", FIGURE_TIMES), _KT), {}, ("eof",)),
    }


FIGURES = tuple(_figure_configs())


def figure_config(fig_id: str, fixed=None, **overrides) -> SweepConfig:
    """Sweep configuration for one figure, with optional overrides.

    ``fixed`` updates the fixed parameter map; keyword overrides replace other
    :class:`SweepConfig` fields (``axes``, ``observables``, ``method``, ``tol``).
    """
    configs = _figure_configs()
    if fig_id not in configs:
        raise ConfigError(f"unknown figure {fig_id!r}; choose from {', '.join(FIGURES)}")
    cfg = configs[fig_id]
    if fixed:
        cfg = replace(cfg, fixed={**cfg.fixed, **fixed})
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


@dataclass
class Dataset:
    config: SweepConfig
    records: list
    label: str = "sweep"

    @property
    def failures(self) -> int:
        return sum(1 for r in self.records if not r.ok)

    def columns(self):
        cols = [a.name for a in self.config.axes]
        obs = self.config.observables
        if "c_n" in obs:
            cols += ["c_n", "clipped"]
        if "concurrence" in obs:
            cols.append("concurrence")
        if "eof" in obs:
            cols.append("eof")
        if "eigenvalues" in obs:
            cols += ["eig1", "eig2", "eig3", "eig4"]
        cols.append("min_eig")
        if "trace_residual" in obs:
            cols.append("trace_residual")
        if self.config.method == "both":
            cols.append("discrepancy")
        cols.append("status")
        return cols

    def rows(self):
        cols = self.columns()
        for rec in self.records:
            values = dict(rec.coords)
            values.update(
                c_n=rec.c_n,
                clipped=int(rec.clipped),
                concurrence=rec.concurrence,
                eof=rec.eof,
                min_eig=rec.min_eigenvalue,
                trace_residual=rec.trace_residual,
                discrepancy=rec.discrepancy,
                status="ok" if rec.ok else rec.error.replace(",", ";"),
            )
            for k, lam in enumerate(rec.eigenvalues, 1):
                values[f"eig{k}"] = lam
            yield [values[c] for c in cols]

    def header_lines(self):
        from .cli import config_text

        lines = [
            f"xxzdm {__version__} dataset: {self.label}",
            "parameter defaults are library choices, not published values",
            f"backend method={self.config.method} tol={_fmt(self.config.tol)}",
            "config (feed the lines below, without '# ', back to --config to reproduce):",
        ]
        lines += config_text(self.config.fixed_values(), self.config).splitlines()
        return ["# " + line if line else "#" for line in lines]

    def to_csv(self, stream=None) -> str:
        buf = io.StringIO() if stream is None else stream
        for line in self.header_lines():
            buf.write(line + "\n")
        buf.write(",".join(self.columns()) + "\n")
        for row in self.rows():
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue() if stream is None else ""


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def figure_dataset(fig_id: str, fixed=None, workers: int = 1, **overrides) -> Dataset:
    cfg = figure_config(fig_id, fixed, **overrides)
    return Dataset(cfg, run_sweep(cfg, workers=workers), label=fig_id)
