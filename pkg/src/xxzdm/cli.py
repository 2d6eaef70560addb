"""Command-line front end for the dissipative XXZ dimer toolkit.

Config files are flat ``key = value`` lines grouped under ``[model]``,
``[sweep]`` and ``[output]`` headers, with ``#`` comments::

    [model]
    J = 1
    kT = 0.5

    [sweep]
    axis = kT 0.05 5 31 log
    axis = t values 0 1 2 5 10
    observables = c_n, eof
    method = closed_form

    [output]
    tol = 1e-9

Exit status: 0 success, 1 usage/config error, 2 numerical failure,
3 sweep finished with failed points.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DEFAULT_TOL, IntegrationError, evolve_closed_form_trajectory, evolve_ode_trajectory
from .model import ModelParams, ParameterError, gibbs_state, validate_density
from .sweep import (
    DEFAULTS,
    FIGURES,
    METHODS,
    OBSERVABLES,
    PARAM_NAMES,
    Axis,
    ConfigError,
    Dataset,
    SweepConfig,
    _fmt,
    evaluate_point,
    figure_config,
    run_sweep,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_PARTIAL = 0, 1, 2, 3

SECTIONS = {
    "model": PARAM_NAMES,
    "sweep": ("axis", "observables", "method", "points", "workers"),
    "output": ("path", "tol"),
}
VALID_KEYS = tuple(k for keys in SECTIONS.values() for k in keys)
SECTION_OF = {k: s for s, keys in SECTIONS.items() for k in keys}

DEFAULT_OBSERVABLES = ("c_n", "concurrence", "eof")


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))
    axes: list = field(default_factory=list)
    observables: tuple = DEFAULT_OBSERVABLES
    method: str = "closed_form"
    points: int = 21
    workers: int = 1
    path: str = "-"
    tol: float = DEFAULT_TOL

    @property
    def params(self) -> ModelParams:
        v = self.values
        return ModelParams(v["J"], v["Jz"], v["Dz"], v["gamma0"], v["gamma"])

    def sweep_config(self) -> SweepConfig | None:
        if not self.axes:
            return None
        return SweepConfig(tuple(self.axes), dict(self.values), tuple(self.observables), self.method, self.tol)


def _float(key, raw, where):
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse value {raw!r} for key {key!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{where}: value for {key!r} must be finite")
    return value


def _int(key, raw, where):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse integer {raw!r} for key {key!r}") from None


def _parse_axis(raw, where):
    parts = raw.split()
    if len(parts) >= 2 and parts[1] == "values":
        if len(parts) < 3:
            raise ConfigError(f"{where}: axis {parts[0]!r} lists no values")
        return Axis.explicit(parts[0], [_float("axis", p, where) for p in parts[2:]])
    if len(parts) not in (4, 5):
        raise ConfigError(f"{where}: axis must read 'name min max points [linear|log]' or 'name values v1 v2 ...'")
    name, lo, hi, n = parts[:4]
    spacing = parts[4] if len(parts) == 5 else "linear"
    return Axis(name, _float("axis", lo, where), _float("axis", hi, where), _int("axis", n, where), spacing)


def _apply(cfg: RunConfig, key: str, raw: str, where: str, section: str | None = None):
    if key not in SECTION_OF:
        raise ConfigError(f"{where}: unknown key {key!r}; valid keys: {', '.join(VALID_KEYS)}")
    if section is not None and SECTION_OF[key] != section:
        raise ConfigError(f"{where}: key {key!r} belongs in [{SECTION_OF[key]}], not [{section}]")
    raw = raw.strip()
    if key in PARAM_NAMES:
        cfg.values[key] = _float(key, raw, where)
    elif key == "axis":
        axis = _parse_axis(raw, where)
        cfg.axes = [a for a in cfg.axes if a.name != axis.name] + [axis]
    elif key == "observables":
        obs = tuple(o.strip() for o in raw.split(",") if o.strip())
        for o in obs:
            if o not in OBSERVABLES:
                raise ConfigError(f"{where}: unknown observable {o!r}; valid: {', '.join(OBSERVABLES)}")
        cfg.observables = obs
    elif key == "method":
        if raw not in METHODS:
            raise ConfigError(f"{where}: method must be one of {', '.join(METHODS)}")
        cfg.method = raw
    elif key == "points":
        cfg.points = _int(key, raw, where)
    elif key == "workers":
        cfg.workers = _int(key, raw, where)
    elif key == "path":
        cfg.path = raw
    elif key == "tol":
        cfg.tol = _float(key, raw, where)


def _validate(cfg: RunConfig):
    v = cfg.values
    try:
        cfg.params
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    if not v["kT"] > 0:
        raise ConfigError(f"invariant kT > 0 violated (kT={v['kT']!r})")
    if not v["t"] >= 0:
        raise ConfigError(f"invariant t >= 0 violated (t={v['t']!r})")
    if not 1e-12 <= cfg.tol <= 1e-4:
        raise ConfigError(f"invariant 1e-12 <= tol <= 1e-4 violated (tol={cfg.tol!r})")
    if cfg.points < 2:
        raise ConfigError(f"invariant points >= 2 violated (points={cfg.points})")
    if cfg.workers < 1:
        raise ConfigError(f"invariant workers >= 1 violated (workers={cfg.workers})")
    cfg.sweep_config()  # validates axes


def parse_config(text: str = "", overrides=()) -> RunConfig:
    """Parse config text, then apply ``key=value`` overrides on top."""
    cfg = RunConfig()
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"{where}: unknown section [{section}]; valid: {', '.join(SECTIONS)}")
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        _apply(cfg, key.strip(), raw, where, section)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        _apply(cfg, key.strip(), raw, f"override {item!r}")
    _validate(cfg)
    return cfg


def config_text(values: dict, sweep: SweepConfig | None = None, tol: float | None = None) -> str:
    """Inverse of :func:`parse_config` for the fields a run depends on."""
    lines = ["[model]"]
    lines += [f"{k} = {_fmt(values[k])}" for k in PARAM_NAMES if k in values]
    if sweep is not None:
        lines += ["", "[sweep]"]
        lines += [f"axis = {a.describe()}" for a in sweep.axes]
        lines.append(f"observables = {', '.join(sweep.observables)}")
        lines.append(f"method = {sweep.method}")
        tol = sweep.tol
    if tol is not None:
        lines += ["", "[output]", f"tol = {_fmt(tol)}"]
    return "\n".join(lines) + "\n"


# -- subcommands ---------------------------------------------------------------


def _write(text: str, path: str):
    if path in ("-", ""):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _cmd_evolve(cfg: RunConfig) -> int:
    t_final = cfg.values["t"]
    times = np.linspace(0.0, t_final, cfg.points)
    params = cfg.params
    rho0 = gibbs_state(params, 1.0 / cfg.values["kT"])
    method = "ode" if cfg.method == "both" else cfg.method
    try:
        if method == "ode":
            states, _ = evolve_ode_trajectory(rho0, params, times, tol=cfg.tol)
        else:
            states = evolve_closed_form_trajectory(rho0, params, times)
    except IntegrationError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    cols = ["t"]
    for i in range(4):
        for j in range(4):
            cols += [f"rho{i + 1}{j + 1}_re", f"rho{i + 1}{j + 1}_im"]
    cols += ["trace_residual", "hermiticity_residual", "min_eig"]
    out = [f"# xxzdm evolve method={method} tol={_fmt(cfg.tol)}"]
    out += ["# " + ln if ln else "#" for ln in config_text(cfg.values, tol=cfg.tol).splitlines()]
    out.append(",".join(cols))
    for t, rho in zip(times, states):
        rep = validate_density(rho)
        row = [t]
        for z in rho.ravel():
            row += [z.real, z.imag]
        row += [rep.trace_residual, rep.hermiticity_residual, rep.min_eigenvalue]
        out.append(",".join(_fmt(x) for x in row))
    _write("\n".join(out) + "\n", cfg.path)
    return EXIT_OK


def _cmd_observe(cfg: RunConfig) -> int:
    rec = evaluate_point(cfg.values, cfg.method, cfg.tol)
    cols = list(PARAM_NAMES) + [
        "c_n", "clipped", "concurrence", "eof", "eig1", "eig2", "eig3", "eig4",
        "min_eig", "trace_residual", "status",
    ]
    vals = [cfg.values[k] for k in PARAM_NAMES] + [
        rec.c_n, int(rec.clipped), rec.concurrence, rec.eof, *rec.eigenvalues,
        rec.min_eigenvalue, rec.trace_residual, "ok" if rec.ok else rec.error.replace(",", ";"),
    ]
    out = [f"# xxzdm observe method={cfg.method} tol={_fmt(cfg.tol)}"]
    out += ["# " + ln if ln else "#" for ln in config_text(cfg.values, tol=cfg.tol).splitlines()]
    out += [",".join(cols), ",".join(_fmt(v) for v in vals)]
    _write("\n".join(out) + "\n", cfg.path)
    if not rec.ok:
        print(f"error: numerical failure at {cfg.values}: {rec.error}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _emit_dataset(ds: Dataset, cfg: RunConfig) -> int:
    _write(ds.to_csv(), cfg.path)
    if ds.failures:
        bad = next(r for r in ds.records if not r.ok)
        print(f"warning: {ds.failures} grid point(s) failed; first at {bad.coords}: {bad.error}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_sweep(cfg: RunConfig) -> int:
    sweep = cfg.sweep_config()
    if sweep is None:
        raise ConfigError("sweep needs at least one 'axis' entry in [sweep] (or axis=... override)")
    return _emit_dataset(Dataset(sweep, run_sweep(sweep, workers=cfg.workers), "sweep"), cfg)


def _cmd_figure(cfg: RunConfig, fig_id: str, explicit: set) -> int:
    base = figure_config(fig_id)
    fixed = {k: cfg.values[k] for k in PARAM_NAMES if k in explicit}
    changes = {"tol": cfg.tol}
    if "method" in explicit:
        changes["method"] = cfg.method
    if "observables" in explicit:
        changes["observables"] = tuple(cfg.observables)
    if "axis" in explicit:
        axes = {a.name: a for a in base.axes}
        for a in cfg.axes:
            if a.name not in axes:
                raise ConfigError(f"figure {fig_id} has no axis {a.name!r}; axes: {', '.join(axes)}")
            axes[a.name] = a
        changes["axes"] = tuple(axes[a.name] for a in base.axes)
    sweep = figure_config(fig_id, fixed, **changes)
    return _emit_dataset(Dataset(sweep, run_sweep(sweep, workers=cfg.workers), fig_id), cfg)


def _cmd_selfcheck(cfg: RunConfig) -> int:
    from .selfcheck import run_all

    lines, ok = run_all()
    _write("\n".join(lines) + "\n", cfg.path)
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="flat key = value config file")
    common.add_argument("-s", "--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    common.add_argument("-o", "--output", help="output file (default: standard output)")
    common.add_argument("--tol", type=float, help="integrator tolerance")
    for name in PARAM_NAMES:
        common.add_argument(f"--{name}", type=float, metavar="X", help=f"set {name}")
    common.add_argument("--method", choices=METHODS)

    parser = argparse.ArgumentParser(prog="xxzdm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = [
        sub.add_parser("evolve", parents=[common], help="time series of the density matrix from the Gibbs state"),
        sub.add_parser("observe", parents=[common], help="observables at a single parameter point"),
        sub.add_parser("sweep", parents=[common], help="1D/2D parameter grid to CSV"),
        sub.add_parser("figure", parents=[common], help="dataset behind one figure"),
        sub.add_parser("selfcheck", parents=[common], help="run the built-in oracle cross-checks"),
    ]
    subs[3].add_argument("fig_id", choices=FIGURES)
    # added last so the figure id is consumed first
    for p in subs:
        p.add_argument("overrides", nargs="*", metavar="KEY=VALUE", help="inline overrides")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the CLI reserves 2 for numerics
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    overrides = list(args.sets) + list(args.overrides)
    for name in PARAM_NAMES:
        value = getattr(args, name)
        if value is not None:
            overrides.append(f"{name}={value!r}")
    if args.method:
        overrides.append(f"method={args.method}")
    if args.tol is not None:
        overrides.append(f"tol={args.tol!r}")
    if args.output:
        overrides.append(f"path={args.output}")
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(text, overrides)
        explicit = {o.split("=", 1)[0].strip() for o in overrides}
        explicit |= _keys_in(text)
        if args.command == "evolve":
            return _cmd_evolve(cfg)
        if args.command == "observe":
            return _cmd_observe(cfg)
        if args.command == "sweep":
            return _cmd_sweep(cfg)
        if args.command == "figure":
            return _cmd_figure(cfg, args.fig_id, explicit)
        return _cmd_selfcheck(cfg)
    except (ConfigError, ParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _keys_in(text: str) -> set:
    keys = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if "=" in line and not line.startswith("["):
            keys.add(line.split("=", 1)[0].strip())
    return keys


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
