"""Experiment configuration and parameter sweeps.

A config is an INI file with sections ``[experiment]``, ``[channel]``,
``[constraints]``, optional ``[geometry]``, ``[numerics]`` and
``[output]``.  Exactly one variable is swept; every other parameter is
fixed by its section.
"""

from __future__ import annotations

import configparser
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .bounds import (
    BoundConfig,
    ConstraintSet,
    lower_bound_1,
    lower_bound_2,
    lower_bound_3,
    timing_rate_given_x,
    upper_bound,
)
from .capacity import blahut_arimoto, discretize_cb, discretize_jtac, tb_rate
from .channel import ChannelGeometry, ChannelParams, arrival_matrix, c_from_geometry, c_table_relation
from .errors import ConfigError, DomainError, InfeasibleConstraintError, JTACError

METHODS = ("lb1", "lb2", "lb3", "ub", "ba_jtac", "ba_cb", "tb", "timing")
SWEEP_VARS = ("M", "c", "m", "n", "D")
METHOD_COLUMNS = {
    "lb1": ("lb1",),
    "lb2": ("lb2_r1", "lb2_r2"),
    "lb3": ("lb3",),
    "ub": ("ub",),
    "ba_jtac": ("ba_jtac",),
    "ba_cb": ("ba_cb",),
    "tb": ("tb",),
    "timing": ("timing_given_x",),
}
DIAGNOSTIC_COLUMNS = (
    "c", "m", "n", "M", "E_m",
    "mu", "phi", "c_prime", "u",
    "argmax_lb1", "argmax_lb2", "argmax_lb3", "argmax_tb",
    "gap_ba_jtac", "gap_ba_cb",
)
# diagnostics measured in nats, converted with the rates
RATE_LIKE_DIAGNOSTICS = ("gap_ba_jtac", "gap_ba_cb")


@dataclass(frozen=True)
class ExperimentConfig:
    """One figure-style sweep.

    ``channel`` holds ``c, T_s, n, m, tau_x, lambda0`` (``tau_x`` may be
    None for ``T_s / 2``); ``geometry`` holds ``d`` and ``c_relation``
    (``"table"`` for ``d^2/D`` or ``"text"`` for ``d^2/(2D)``) and is
    required when sweeping ``D``.
    """

    name: str
    sweep_var: str
    values: tuple
    methods: tuple
    channel: dict
    M: float
    xi: float
    bounds: BoundConfig = BoundConfig()
    x_grid_size: int = 32
    ba_tol: float = 1e-7
    tb_mode: str = "uniform"
    workers: int = 1
    geometry: dict | None = None
    output_dir: str = "out"
    formats: tuple = ("csv", "svg")
    title: str = ""
    plot_x: str = "sweep_value"

    def __post_init__(self):
        if self.sweep_var not in SWEEP_VARS:
            raise ConfigError(f"sweep must be one of {SWEEP_VARS}, got {self.sweep_var!r}")
        if not self.values:
            raise ConfigError("sweep grid is empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("sweep grid must be strictly increasing")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown or missing methods {bad}; choose from {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods listed twice")
        if "ub" in self.methods and not self.channel.get("lambda0", 0) > 0:
            raise ConfigError("method ub needs lambda0 > 0")
        if self.sweep_var in ("m", "n") and any(int(v) != v or v < 1 for v in self.values):
            raise ConfigError(f"{self.sweep_var} grid must hold positive integers")
        if self.sweep_var == "D" and self.geometry is None:
            raise ConfigError("sweeping D needs a [geometry] section")
        if self.geometry is not None and self.geometry.get("c_relation") not in ("table", "text"):
            raise ConfigError("geometry c_relation must be 'table' or 'text'")
        if not 0 < self.xi <= 1:
            raise ConfigError(f"xi must lie in (0, 1], got {self.xi}")
        if self.x_grid_size < 2 or not self.ba_tol > 0 or self.workers < 1:
            raise ConfigError("x_grid_size >= 2, ba_tol > 0 and workers >= 1 are required")
        for f in self.formats:
            if f not in ("csv", "svg"):
                raise ConfigError(f"unknown output format {f!r}")

    @property
    def rate_columns(self) -> tuple:
        return tuple(col for m in self.methods for col in METHOD_COLUMNS[m])


@dataclass
class SweepRow:
    """Rates (nats) per column, diagnostics and a status string for one grid point."""

    sweep_var: str
    sweep_value: float
    rates: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    status: str = "ok"


# --------------------------------------------------------------------------
# config loading


def _floats(text, key):
    try:
        return tuple(float(v) for v in text.replace("\n", ",").split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _number(section, key, default=None, kind=float):
    if key not in section:
        if default is None:
            raise ConfigError(f"missing key {key!r} in [{section.name}]")
        return default
    try:
        value = kind(section[key])
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {section[key]!r} is not a valid {kind.__name__}") from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"[{section.name}] {key} must be finite")
    return value


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    for sec in ("experiment", "channel", "constraints"):
        if sec not in parser:
            raise ConfigError(f"missing section [{sec}]")
    known = {"experiment", "channel", "constraints", "geometry", "numerics", "output"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"unknown sections {sorted(extra)}")

    for sec in ("numerics", "output"):
        if sec not in parser:
            parser.add_section(sec)
    exp, ch, cons = parser["experiment"], parser["channel"], parser["constraints"]
    num, out = parser["numerics"], parser["output"]
    sweep = exp.get("sweep", "").strip()
    values = _floats(exp.get("values", ""), "values")
    methods = tuple(m.strip() for m in exp.get("methods", "").split(",") if m.strip())

    channel = {
        "c": _number(ch, "c", 1.0) if sweep in ("c", "D") else _number(ch, "c"),
        "T_s": _number(ch, "T_s", 10.0),
        "n": _number(ch, "n", 1, int) if sweep == "n" else _number(ch, "n", kind=int),
        "m": _number(ch, "m", 1, int) if sweep == "m" else _number(ch, "m", kind=int),
        "tau_x": _number(ch, "tau_x") if "tau_x" in ch else None,
        "lambda0": _number(ch, "lambda0", 0.0),
    }
    geometry = None
    if "geometry" in parser:
        g = parser["geometry"]
        geometry = {"d": _number(g, "d"), "c_relation": g.get("c_relation", "text").strip()}
    if "xi" in cons and "E_m" in cons:
        raise ConfigError("give either xi or E_m in [constraints], not both")
    M = _number(cons, "M", 1.0) if sweep == "M" else _number(cons, "M")
    xi = _number(cons, "xi") if "xi" in cons else _number(cons, "E_m") / M

    def numeric(key, default, kind=float):
        return _number(num, key, default, kind)

    try:
        bounds = BoundConfig(
            taylor_order_r=numeric("taylor_order_r", 4, int),
            root_tol=numeric("root_tol", 1e-10),
            y_tail_mass=numeric("y_tail_mass", 1e-12),
            variant=num.get("variant", "corrected").strip(),
        )
        return ExperimentConfig(
            name=exp.get("name", Path(path).stem).strip(),
            sweep_var=sweep,
            values=values,
            methods=methods,
            channel=channel,
            M=M,
            xi=xi,
            bounds=bounds,
            x_grid_size=numeric("x_grid_size", 32, int),
            ba_tol=numeric("ba_tol", 1e-7),
            tb_mode=num.get("tb_mode", "uniform").strip(),
            workers=numeric("workers", 1, int),
            geometry=geometry,
            output_dir=out.get("dir", "out").strip(),
            formats=tuple(f.strip() for f in out.get("formats", "csv, svg").split(",") if f.strip()),
            title=exp.get("title", "").strip(),
            plot_x=exp.get("plot_x", "sweep_value").strip(),
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------
# evaluation


def point_parameters(cfg: ExperimentConfig, value: float):
    """Channel parameters and constraints at one grid value."""
    ch = dict(cfg.channel)
    M = cfg.M
    if cfg.sweep_var == "M":
        M = value
    elif cfg.sweep_var == "c":
        ch["c"] = value
    elif cfg.sweep_var == "m":
        ch["m"] = int(value)
    elif cfg.sweep_var == "n":
        ch["n"] = int(value)
    elif cfg.sweep_var == "D":
        geom = ChannelGeometry(cfg.geometry["d"], value)
        ch["c"] = c_table_relation(geom) if cfg.geometry["c_relation"] == "table" else c_from_geometry(geom)
    params = ChannelParams.slotted(ch["c"], ch["T_s"], ch["n"], ch["m"], tau_x=ch["tau_x"], lambda0=ch["lambda0"])
    return params, ConstraintSet.from_ratio(M, cfg.xi)


def _record(row, method, exc):
    kind = "infeasible" if isinstance(exc, (InfeasibleConstraintError, DomainError)) else "error"
    msg = str(exc).replace("\n", " ")
    row.status = f"{kind}:{method}: {msg}" if row.status == "ok" else f"{row.status}; {kind}:{method}: {msg}"


def evaluate_point(cfg: ExperimentConfig, value: float) -> SweepRow:
    """Evaluate every selected method at one grid value; failures go to ``status``."""
    row = SweepRow(cfg.sweep_var, float(value))
    try:
        params, cons = point_parameters(cfg, value)
    except JTACError as exc:
        _record(row, "params", exc)
        return row
    A = arrival_matrix(params)
    lam = params.lambda0
    row.diagnostics.update({"c": params.c, "m": params.m, "n": params.n, "M": cons.M, "E_m": cons.E_m})

    def attempt(method, fn):
        try:
            fn()
        except (JTACError, ArithmeticError, ValueError) as exc:
            _record(row, method, exc)

    def lb1():
        r = lower_bound_1(A, cons, cfg.bounds)
        row.rates["lb1"] = r.nats
        row.diagnostics.update(mu=r.details["mu"], argmax_lb1=r.argmax_interval)

    def lb2():
        r = lower_bound_2(A, cons, cfg.bounds)
        row.rates.update(lb2_r1=r.r1.nats, lb2_r2=r.r2.nats)
        row.diagnostics.update(phi=r.phi, c_prime=r.c_prime, argmax_lb2=r.argmax_interval)

    def lb3():
        r = lower_bound_3(A, cons, cfg.bounds)
        row.rates["lb3"] = r.nats
        row.diagnostics.update(u=r.u, argmax_lb3=r.argmax_interval)

    def ub():
        row.rates["ub"] = upper_bound(A, cons, lam).nats

    def ba_jtac():
        ch = discretize_jtac(A, cons, cfg.x_grid_size, lam, cfg.bounds.y_tail_mass)
        r = blahut_arimoto(ch, cost_cap=cons.E_m, tol=cfg.ba_tol)
        row.rates["ba_jtac"] = r.nats
        row.diagnostics["gap_ba_jtac"] = r.gap

    def ba_cb():
        ch = discretize_cb(A, cons, cfg.x_grid_size, lam, cfg.bounds.y_tail_mass)
        r = blahut_arimoto(ch, cost_cap=cons.E_m, tol=cfg.ba_tol)
        row.rates["ba_cb"] = r.nats
        row.diagnostics["gap_ba_cb"] = r.gap

    def tb():
        r = tb_rate(A, cons.E_m, lam, mode=cfg.tb_mode, y_tail_mass=cfg.bounds.y_tail_mass)
        row.rates["tb"] = r.nats
        row.diagnostics["argmax_tb"] = r.argmax_interval

    def timing():
        row.rates["timing_given_x"] = timing_rate_given_x(A, cons.E_m).nats

    table = {"lb1": lb1, "lb2": lb2, "lb3": lb3, "ub": ub, "ba_jtac": ba_jtac, "ba_cb": ba_cb, "tb": tb, "timing": timing}
    for method in cfg.methods:
        attempt(method, table[method])
    return row


def run_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    """Evaluate the whole grid; rows come back in grid order whatever ``cfg.workers`` is."""
    if cfg.workers == 1:
        return [evaluate_point(cfg, v) for v in cfg.values]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(evaluate_point, [cfg] * len(cfg.values), cfg.values))


def with_output_dir(cfg: ExperimentConfig, directory) -> ExperimentConfig:
    return replace(cfg, output_dir=str(directory))
