"""Command line front end: configuration files, sweeps and figure recipes.

A configuration is a TOML (or JSON) document::

    [scenario]            # base scenario, shared by every curve
    kind = "LS"           # LS TS TS_BLOCK DLSR DMDR DMDR_BLOCK SMSR
    n = 16                # bacteria
    cap_n = 10            # receptors per bacterium
    m = 1                 # molecule types / transmitters
    peak = 80.0           # A_s in nM (per user for MAC kinds)
    alpha_s = 0.5         # average-to-peak ratio
    a_ne = 0.0            # environment noise, nM
    grid_size = 101       # points per input axis (optional)

    [kinetics]            # raw rates, reduced to ratios internally
    gamma = 0.0004        # association, 1/(nM min)
    kappa = 0.1           # dissociation, 1/min
    gamma_block = 0.0     # cross-blocking association, 1/(nM min)
    kappa_block = 1.0     # unblocking, 1/min

    [sweep]
    var = "A_s"           # A_s | A_ne | m
    values = [1, 10, 100]

    [solver]
    tol = 1e-7
    max_iter = 100000
    starts = 5            # random restarts for MAC alternation
    seed = 0
    mode = "product"      # or "cooperative"

    [output]
    path = "out.csv"
    format = "csv"        # csv | json

    [[curve]]
    name = "LS"
    quantity = "capacity"
    # any [scenario] or [kinetics] key may be overridden per curve

Quantities: ``capacity``, ``binary_capacity``, ``kl_upper``,
``lower_binary``, ``equal_rate``, ``time_division``, ``noise_inner`` and
``smsr_inner``.  The last three emit one row per rate pair.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .capacity import DEFAULT_MAX_ITER, DEFAULT_TOL, exhaustive_binary_capacity, scenario_capacity
from .channels import (
    MAC_KINDS,
    MAX_OUTCOMES,
    ScenarioSpec,
    build_bic,
    build_channel,
    output_alphabet_size,
)
from .errors import ConfigError, ConvergenceError, DomainError, UnsupportedError
from .kinetics import ConcentrationVector, Kinetics, blocking_steady_state, labeling_steady_state
from .simulate import ChainModel, combine_estimates, gillespie_occupancy

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "COLUMNS",
    "QUANTITIES",
    "load_config",
    "config_from_dict",
    "validate_config",
    "point_spec",
    "run_experiment",
    "format_results",
    "list_recipes",
    "recipe_config",
    "export_channel",
    "main",
]

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

COLUMNS = ("sweep_var", "sweep_value", "curve", "value_nats", "lower_ci", "upper_ci", "meta_json")
SWEEP_VARS = {"A_s": "peak", "A_ne": "a_ne", "m": "m"}
QUANTITIES = (
    "capacity", "binary_capacity", "kl_upper", "lower_binary",
    "equal_rate", "time_division", "noise_inner", "smsr_inner",
)
SCENARIO_KEYS = ("kind", "n", "cap_n", "m", "peak", "alpha_s", "a_ne", "grid_size")
KINETIC_KEYS = ("gamma", "kappa", "gamma_block", "kappa_block")
CURVE_KEYS = SCENARIO_KEYS + KINETIC_KEYS + ("name", "quantity", "points", "alpha_points")
SOLVER_KEYS = ("tol", "max_iter", "starts", "seed", "mode")

DEFAULT_SCENARIO = {
    "kind": "LS", "n": 16, "cap_n": 10, "m": 1,
    "peak": 80.0, "alpha_s": 0.5, "a_ne": 0.0, "grid_size": None,
}
DEFAULT_KINETICS = {"gamma": 0.0004, "kappa": 0.1, "gamma_block": 0.0, "kappa_block": 1.0}
DEFAULT_SOLVER = {"tol": DEFAULT_TOL, "max_iter": DEFAULT_MAX_ITER, "starts": 5, "seed": 0, "mode": "product"}

LOW_BLOCKING = {"gamma_block": 0.0003, "kappa_block": 0.15}
HIGH_BLOCKING = {"gamma_block": 0.0005, "kappa_block": 0.01}

_BIC_KINDS = ("LS", "TS")
_PAIR_KINDS = ("DLSR", "DMDR_BLOCK")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: dict
    kinetics: dict
    sweep_var: str
    sweep_values: tuple
    solver: dict
    curves: tuple
    output_path: str = None
    output_format: str = "csv"
    force: bool = False


@dataclass(frozen=True)
class ResultRow:
    sweep_var: str
    sweep_value: float
    curve: str
    value_nats: float
    lower_ci: float = None
    upper_ci: float = None
    meta: dict = field(default_factory=dict)

    def cells(self):
        return (
            self.sweep_var, _num(self.sweep_value), self.curve, _num(self.value_nats),
            _num(self.lower_ci), _num(self.upper_ci), _dumps(self.meta),
        )


def _num(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


# configuration -------------------------------------------------------------


def load_config(path: str) -> dict:
    """Read a TOML or JSON configuration file into a plain dict.

    Raises ``OSError`` on I/O failure and :class:`ConfigError` on bad syntax.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        if str(path).endswith(".json"):
            return json.loads(data.decode("utf-8"))
        return tomllib.loads(data.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc


def _unknown_keys(section, allowed, where):
    return [f"unknown key {k!r} in {where}" for k in section if k not in allowed]


def config_from_dict(raw: dict, overrides: dict = None, force: bool = False) -> ExperimentConfig:
    """Merge a raw config with flag overrides and defaults, then validate.

    An override of the swept variable replaces the sweep by that single
    value.  Raises :class:`ConfigError` listing every violation.
    """
    raw = copy.deepcopy(raw or {})
    problems = _unknown_keys(raw, ("scenario", "kinetics", "sweep", "solver", "output", "curve"), "config")
    scenario = dict(DEFAULT_SCENARIO)
    scenario.update(raw.get("scenario", {}))
    problems += _unknown_keys(raw.get("scenario", {}), SCENARIO_KEYS, "[scenario]")
    kinetics = dict(DEFAULT_KINETICS)
    kinetics.update(raw.get("kinetics", {}))
    problems += _unknown_keys(raw.get("kinetics", {}), KINETIC_KEYS, "[kinetics]")
    solver = dict(DEFAULT_SOLVER)
    solver.update(raw.get("solver", {}))
    problems += _unknown_keys(raw.get("solver", {}), SOLVER_KEYS, "[solver]")
    sweep = raw.get("sweep", {})
    problems += _unknown_keys(sweep, ("var", "values"), "[sweep]")
    var = sweep.get("var", "A_s")
    base_key = SWEEP_VARS.get(var)
    values = sweep.get("values")
    if values is None:
        values = [scenario.get(base_key)] if base_key else []
    output = raw.get("output", {})
    problems += _unknown_keys(output, ("path", "format"), "[output]")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in SCENARIO_KEYS:
            scenario[key] = value
            if key == base_key:
                values = [value]
        elif key in ("output_path", "output_format"):
            output = dict(output, **{key.split("_", 1)[1]: value})
        else:
            raise ConfigError([f"unknown override {key!r}"])

    curves = raw.get("curve") or [{"name": scenario["kind"], "quantity": "capacity"}]
    if isinstance(curves, dict):
        curves = [curves]
    for idx, c in enumerate(curves):
        problems += _unknown_keys(c, CURVE_KEYS, f"curve #{idx}")
    try:
        values = tuple(int(v) if var == "m" else float(v) for v in values)
    except (TypeError, ValueError):
        problems.append(f"sweep values must be numbers, got {values!r}")
        values = ()
    cfg = ExperimentConfig(
        scenario=scenario,
        kinetics=kinetics,
        sweep_var=var,
        sweep_values=values,
        solver=solver,
        curves=tuple(dict(c) for c in curves),
        output_path=output.get("path"),
        output_format=output.get("format", "csv"),
        force=bool(force),
    )
    problems += validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def _curve_settings(cfg: ExperimentConfig, curve: dict, value):
    scen = dict(cfg.scenario)
    kin = dict(cfg.kinetics)
    for k, v in curve.items():
        if k in SCENARIO_KEYS:
            scen[k] = v
        elif k in KINETIC_KEYS:
            kin[k] = v
    key = SWEEP_VARS.get(cfg.sweep_var)
    if key is not None:
        scen[key] = value
    return scen, kin


def point_spec(cfg: ExperimentConfig, curve: dict, value) -> ScenarioSpec:
    """The scenario one curve describes at one sweep value."""
    scen, kin = _curve_settings(cfg, curve, value)
    m = scen["m"]
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ConfigError([f"m must be a positive integer, got {m!r}"])
    try:
        kinetics = Kinetics.from_rates(m, kin["gamma"], kin["kappa"], kin["gamma_block"], kin["kappa_block"])
    except DomainError as exc:
        raise ConfigError([f"kinetics: {exc}"]) from exc
    a_ne = scen["a_ne"]
    return ScenarioSpec(
        scen["kind"], scen["n"], scen["cap_n"], m, scen["peak"],
        alpha_s=scen["alpha_s"], a_ne=float(a_ne), kinetics=kinetics, grid_size=scen["grid_size"],
    )


def _curve_name(curve: dict, idx: int) -> str:
    return str(curve.get("name") or f"{curve.get('kind', 'curve')}-{idx}")


def _applicability(spec: ScenarioSpec, quantity: str):
    if quantity in ("kl_upper", "lower_binary") and spec.kind not in _BIC_KINDS:
        return f"{quantity} applies to LS and TS only, not {spec.kind}"
    if quantity == "lower_binary" and spec.a_ne != 0:
        return "lower_binary assumes a_ne = 0"
    if quantity in ("equal_rate", "time_division", "noise_inner", "smsr_inner"):
        if spec.m != 2:
            return f"{quantity} is a two-user bound (m = 2)"
        if spec.a_ne != 0:
            return f"{quantity} assumes a_ne = 0"
        wanted = ("SMSR",) if quantity == "smsr_inner" else _PAIR_KINDS
        if spec.kind not in wanted:
            return f"{quantity} applies to {wanted}, not {spec.kind}"
        if quantity == "equal_rate" and (spec.peak[0] != spec.peak[1] or spec.alpha_s[0] != spec.alpha_s[1]):
            return "equal_rate needs equal peaks and average ratios"
    if quantity == "binary_capacity" and spec.kind in MAC_KINDS and spec.m > 2:
        return "binary_capacity supports at most two users"
    return None


def validate_config(cfg: ExperimentConfig) -> list:
    """Every problem with a configuration (empty when it can run)."""
    out = []
    if cfg.sweep_var not in SWEEP_VARS:
        out.append(f"sweep variable must be one of {tuple(SWEEP_VARS)}, got {cfg.sweep_var!r}")
        return out
    vals = cfg.sweep_values
    if not vals:
        out.append("sweep has no values")
    if any(not (math.isfinite(v) and v > 0) for v in vals):
        out.append("sweep values must be positive and finite")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        out.append("sweep values must be strictly increasing")
    if cfg.output_format not in ("csv", "json"):
        out.append(f"output format must be csv or json, got {cfg.output_format!r}")
    s = cfg.solver
    if not (isinstance(s["tol"], (int, float)) and s["tol"] > 0):
        out.append("solver tol must be positive")
    if not (isinstance(s["max_iter"], int) and s["max_iter"] >= 1):
        out.append("solver max_iter must be a positive integer")
    if not (isinstance(s["starts"], int) and s["starts"] >= 0):
        out.append("solver starts must be a non-negative integer")
    if not isinstance(s["seed"], int):
        out.append("solver seed must be an integer")
    if s["mode"] not in ("product", "cooperative"):
        out.append("solver mode must be product or cooperative")
    for idx, curve in enumerate(cfg.curves):
        name = _curve_name(curve, idx)
        quantity = curve.get("quantity", "capacity")
        if quantity not in QUANTITIES:
            out.append(f"curve {name}: unknown quantity {quantity!r}")
            continue
        for value in vals:
            try:
                spec = point_spec(cfg, curve, value)
            except ConfigError as exc:
                msgs = [f"curve {name}: {v}" for v in exc.violations]
                out += [m for m in msgs if m not in out]
                break
            reason = _applicability(spec, quantity)
            if reason:
                out.append(f"curve {name}: {reason}")
                break
            if quantity in ("capacity", "binary_capacity") and not cfg.force:
                size = output_alphabet_size(spec.replace(grid_size=2) if quantity == "binary_capacity" else spec)
                if size > MAX_OUTCOMES:
                    out.append(
                        f"curve {name}: output alphabet of {size} symbols at "
                        f"{cfg.sweep_var}={value} exceeds {MAX_OUTCOMES}; use --force"
                    )
                    break
    return out


# evaluation ----------------------------------------------------------------


def _spec_meta(spec: ScenarioSpec, cfg: ExperimentConfig, quantity: str) -> dict:
    return {
        "quantity": quantity,
        "kind": spec.kind,
        "n": spec.n,
        "cap_n": spec.cap_n,
        "m": spec.m,
        "peak": list(spec.peak),
        "alpha_s": list(spec.alpha_s),
        "a_ne": spec.a_ne,
        "kd": spec.kinetics.kd,
        "block_ratio": spec.kinetics.block_ratio,
        "grid_size": spec.grid_size,
        "tol": cfg.solver["tol"],
        "max_iter": cfg.solver["max_iter"],
        "seed": cfg.solver["seed"],
        "starts": cfg.solver["starts"],
        "mode": cfg.solver["mode"],
    }


def _bic_params(spec: ScenarioSpec):
    return bounds.BoundParams(
        spec.receptors, spec.input_peaks[0], spec.alpha_s[0], spec.a_ne, float(spec.kinetics.kd[0])
    )


def _mac_params(spec: ScenarioSpec):
    return bounds.MacBoundParams(
        spec.n, spec.cap_n, spec.peak, spec.alpha_s, kinetics=spec.kinetics, a_ne=spec.a_ne
    )


def _evaluate(task):
    cfg, idx, value = task
    curve = cfg.curves[idx]
    name = _curve_name(curve, idx)
    quantity = curve.get("quantity", "capacity")
    spec = point_spec(cfg, curve, value)
    meta = _spec_meta(spec, cfg, quantity)
    row = lambda v, lo=None, hi=None, **extra: ResultRow(  # noqa: E731
        cfg.sweep_var, value, name, v, lo, hi, dict(meta, **extra)
    )
    limit = None if cfg.force else MAX_OUTCOMES
    solver = cfg.solver

    if quantity == "capacity":
        res = scenario_capacity(
            spec, solver["tol"], solver["max_iter"], solver["starts"], solver["seed"], solver["mode"], limit
        )
        return [row(res.capacity, res.capacity, res.upper, iterations=res.iterations,
                    gap=res.gap, constraint_slack=res.constraint_slack)]
    if quantity == "binary_capacity":
        on_off = spec.replace(grid_size=2)
        channel = build_channel(on_off, limit)
        value_, alphas = exhaustive_binary_capacity(channel, spec.alpha_s)
        if spec.kind == "TS":
            value_ *= spec.m
        return [row(value_, grid_size=2, on_probability=list(alphas))]
    if quantity == "kl_upper":
        ub = bounds.kl_upper_bound(_bic_params(spec))
        scale = spec.m if spec.kind == "TS" else 1
        return [row(ub.value * scale, vacuous=ub.vacuous)]
    if quantity == "lower_binary":
        scale = spec.m if spec.kind == "TS" else 1
        return [row(bounds.lower_bound_binary(_bic_params(spec)) * scale)]

    bp = _mac_params(spec)
    if quantity == "equal_rate":
        point, root = bounds.lemma3_equal_rate_point(bp, spec.kind)
        return [row(point.r1, r1=point.r1, r2=point.r2, total=point.total, alpha=point.params["alpha"],
                    root=root.alpha, residual=root.residual, interior=root.interior)]
    points = int(curve.get("points", 11))
    if quantity == "time_division":
        c1, c2 = bounds.lemma2_individual_capacities(bp, spec.kind)
        frontier = bounds.time_division_frontier(c1, c2, points)
    elif quantity == "smsr_inner":
        _, frontier, _ = bounds.lemma8_smsr_inner(bp, points)
    else:
        grid = int(curve.get("alpha_points", 6))
        frontier = [
            bounds.lemma3_noise_inner(bp, spec.kind, a1, a2)
            for a1 in np.linspace(0.0, spec.alpha_s[0], grid)
            for a2 in np.linspace(0.0, spec.alpha_s[1], grid)
        ]
    return [row(p.total, r1=p.r1, r2=p.r2, label=p.label, params=p.params) for p in frontier]


def _worker_count(workers=None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("MOLCAP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError([f"MOLCAP_THREADS must be an integer, got {env!r}"]) from exc
    return os.cpu_count() or 1


def run_experiment(cfg: ExperimentConfig, workers: int = None) -> list:
    """Evaluate every curve at every sweep point.

    Rows come back in sweep order, then curve order, whatever the pool size.
    Raises :class:`ConvergenceError` if any solver fails to converge.
    """
    tasks = [(cfg, idx, v) for v in cfg.sweep_values for idx in range(len(cfg.curves))]
    n = min(_worker_count(workers), len(tasks))
    if n <= 1:
        chunks = [_evaluate(t) for t in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=n) as pool:
            chunks = list(pool.map(_evaluate, tasks))
    return [r for chunk in chunks for r in chunk]


def format_results(rows, fmt: str = "csv") -> str:
    """Serialise rows; identical rows always give identical text."""
    if fmt == "json":
        body = [dict(zip(COLUMNS[:-1], r.cells()[:-1]), meta=_plain(r.meta)) for r in rows]
        return json.dumps({"columns": list(COLUMNS), "rows": body}, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in rows:
        writer.writerow(r.cells())
    return buf.getvalue()


def _summary(rows, bits: bool) -> str:
    unit, scale = ("bits", 1 / math.log(2)) if bits else ("nats", 1.0)
    lines = [f"{'sweep':>12}  {'curve':<24} {unit:>14}"]
    for r in rows:
        lines.append(f"{r.sweep_value:>12.6g}  {r.curve:<24} {r.value_nats * scale:>14.8g}")
    return "\n".join(lines) + "\n"


# recipes -------------------------------------------------------------------

_DECADES = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000]


def _recipes() -> dict:
    ts = [{"name": f"TS m={m}", "kind": "TS", "m": m, "quantity": "capacity"} for m in (2, 4, 8, 16)]
    fig5 = {
        "scenario": {"kind": "LS", "n": 16, "cap_n": 10, "m": 1, "alpha_s": 0.5, "a_ne": 0.0},
        "sweep": {"var": "A_s", "values": sorted(_DECADES + [80])},
        "curve": [{"name": "LS", "quantity": "capacity"}] + ts,
    }
    fig5b = copy.deepcopy(fig5)
    fig5b["scenario"]["a_ne"] = 5.0
    blocking = lambda label, rates: dict(  # noqa: E731
        {"name": f"TS m=2 {label}", "kind": "TS_BLOCK", "m": 2, "quantity": "capacity"}, **rates
    )
    fig6 = {
        "scenario": {"kind": "LS", "n": 16, "cap_n": 10, "m": 1, "alpha_s": 0.5, "a_ne": 0.0},
        "sweep": {"var": "A_s", "values": list(_DECADES)},
        "curve": [
            {"name": "LS", "quantity": "capacity"},
            blocking("no blocking", {"gamma_block": 0.0, "kappa_block": 1.0}),
            blocking("low blocking", LOW_BLOCKING),
            blocking("high blocking", HIGH_BLOCKING),
        ],
    }
    fig7 = {
        "scenario": {"kind": "LS", "n": 16, "cap_n": 10, "m": 1, "peak": 80.0, "alpha_s": 0.5},
        "sweep": {"var": "A_ne", "values": [float(f"{v:.6g}") for v in np.geomspace(1, 50, 20)]},
        "curve": [{"name": "capacity", "quantity": "capacity"}, {"name": "KL upper bound", "quantity": "kl_upper"}],
    }
    fig8 = {
        "scenario": {"kind": "LS", "n": 2, "cap_n": 10, "m": 1, "alpha_s": 0.5, "a_ne": 0.0},
        "sweep": {"var": "A_s", "values": list(range(10, 201, 10))},
        "curve": [{"name": "capacity", "quantity": "capacity"},
                  {"name": "binary lower bound", "quantity": "lower_binary"}],
    }
    mac = {"n": 6, "cap_n": 10, "m": 2, "alpha_s": 0.5, "a_ne": 0.0}
    totalcap = {
        "scenario": dict(mac, kind="DLSR"),
        "sweep": {"var": "A_s", "values": list(_DECADES)},
        "curve": [
            {"name": "DLSR", "kind": "DLSR", "quantity": "capacity"},
            {"name": "DMDR", "kind": "DMDR", "quantity": "capacity"},
            dict({"name": "DMDR low blocking", "kind": "DMDR_BLOCK", "quantity": "capacity"}, **LOW_BLOCKING),
            dict({"name": "DMDR high blocking", "kind": "DMDR_BLOCK", "quantity": "capacity"}, **HIGH_BLOCKING),
            {"name": "SMSR", "kind": "SMSR", "quantity": "capacity"},
        ],
    }
    totalcap5 = copy.deepcopy(totalcap)
    totalcap5["scenario"]["a_ne"] = 5.0
    fig9 = {
        "scenario": dict(mac, kind="DLSR"),
        "sweep": {"var": "A_s", "values": list(_DECADES)},
        "curve": [
            {"name": f"{k} {label}", "kind": k, "quantity": q}
            for k in ("DLSR", "DMDR", "SMSR")
            for label, q in (("continuous", "capacity"), ("binary", "binary_capacity"))
        ],
    }
    regions_curves = []
    for label, kind, rates in (
        ("DLSR", "DLSR", {}),
        ("DMDR low blocking", "DMDR_BLOCK", LOW_BLOCKING),
        ("DMDR high blocking", "DMDR_BLOCK", HIGH_BLOCKING),
    ):
        for q in ("time_division", "noise_inner"):
            regions_curves.append(dict({"name": f"{label} {q}", "kind": kind, "quantity": q}, **rates))
        regions_curves.append(
            dict({"name": f"{label} binary total", "kind": kind, "quantity": "capacity", "grid_size": 2}, **rates)
        )
    regions_curves.append({"name": "SMSR time_division", "kind": "SMSR", "quantity": "smsr_inner"})
    regions_curves.append({"name": "SMSR binary total", "kind": "SMSR", "quantity": "capacity", "grid_size": 2})
    regions = {
        "scenario": dict(mac, kind="DLSR", peak=100.0),
        "sweep": {"var": "A_s", "values": [100.0]},
        "curve": regions_curves,
    }
    equalrate = {
        "scenario": dict(mac, kind="DLSR"),
        "sweep": {"var": "A_s", "values": list(_DECADES)},
        "curve": [
            {"name": "DLSR", "kind": "DLSR", "quantity": "equal_rate"},
            dict({"name": "DMDR low blocking", "kind": "DMDR_BLOCK", "quantity": "equal_rate"}, **LOW_BLOCKING),
            dict({"name": "DMDR high blocking", "kind": "DMDR_BLOCK", "quantity": "equal_rate"}, **HIGH_BLOCKING),
        ],
    }
    return {
        "fig5a": ("LS and TS (m = 2, 4, 8, 16) capacity versus A_s, no noise", fig5),
        "fig5b": ("LS and TS (m = 2, 4, 8, 16) capacity versus A_s, A_ne = 5", fig5b),
        "fig6": ("LS and two-colony TS with no, low and high blocking", fig6),
        "fig7": ("capacity and KL upper bound versus A_ne, N' = 160, A_s' = 80", fig7),
        "fig8": ("capacity and on/off lower bound versus A_s', N' = 20", fig8),
        "fig9": ("MAC total capacity with continuous and on/off inputs", fig9),
        "totalcap0": ("MAC total capacity of DLSR, DMDR and SMSR, no noise", totalcap),
        "totalcap5": ("MAC total capacity of DLSR, DMDR and SMSR, A_ne = 5", totalcap5),
        "regions": ("two-user inner bounds and on/off total capacity at A_s = 100", regions),
        "equalrate": ("equal-rate point of the interference-as-noise region versus A_s", equalrate),
    }


def list_recipes() -> dict:
    """Recipe name to one-line description."""
    return {name: desc for name, (desc, _) in _recipes().items()}


def recipe_config(name: str) -> dict:
    """Raw configuration dict of a named recipe."""
    catalog = _recipes()
    if name not in catalog:
        raise ConfigError([f"unknown recipe {name!r}; available: {', '.join(catalog)}"])
    return copy.deepcopy(catalog[name][1])


# channel export ------------------------------------------------------------


def export_channel(cfg: ExperimentConfig, path: str, curve: int = 0, point: int = 0) -> int:
    """Write one curve's channel matrix at one sweep point as CSV.

    Lines starting with ``#`` carry the metadata.  Each data row holds the
    input coordinates followed by ``P(y | x)`` for every output symbol.
    Returns the number of rows written.
    """
    if not (0 <= curve < len(cfg.curves)) or not (0 <= point < len(cfg.sweep_values)):
        raise ConfigError([f"no curve {curve} / sweep point {point} in this configuration"])
    spec = point_spec(cfg, cfg.curves[curve], cfg.sweep_values[point])
    channel = build_channel(spec, None if cfg.force else MAX_OUTCOMES)
    header = {
        "kind": spec.kind,
        "receptors_per_output": spec.receptors,
        "kd": spec.kinetics.kd,
        "block_ratio": spec.kinetics.block_ratio,
        "a_ne": spec.a_ne,
        "input_peaks": list(spec.input_peaks),
        "grid_size": spec.grid_size,
        "inputs": channel.num_inputs,
        "outputs": channel.num_outputs,
    }
    dim = channel.inputs.dim
    with open(path, "w", newline="") as fh:
        for key in sorted(header):
            fh.write(f"# {key}: {_dumps(header[key])}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(dim)] + [f"y{j}" for j in range(channel.num_outputs)])
        points = np.asarray(channel.inputs.points, dtype=float).reshape(channel.num_inputs, dim)
        for x, row in zip(points, channel.prob):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in row])
    return channel.num_inputs


# command line --------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(prog="molcap", description="Capacity of ligand-receptor molecular channels.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_source(p):
        p.add_argument("config", nargs="?", help="TOML or JSON configuration file")
        p.add_argument("--recipe", help="use a built-in recipe instead of a file")
        p.add_argument("--peak", type=float, help="A_s, peak concentration (nM)")
        p.add_argument("--alpha-s", type=float, help="average-to-peak ratio")
        p.add_argument("--a-ne", type=float, help="environment noise (nM)")
        p.add_argument("--n", type=int, help="number of bacteria")
        p.add_argument("--cap-n", type=int, help="receptors per bacterium")
        p.add_argument("--m", type=int, help="molecule types / transmitters")
        p.add_argument("--grid-size", type=int, help="points per input axis")
        p.add_argument("--force", action="store_true", help="allow output alphabets above 1e7 symbols")

    run = sub.add_parser("run", help="evaluate a configuration or recipe")
    add_source(run)
    run.add_argument("-o", "--output", help="result file ('-' for stdout)")
    run.add_argument("--format", choices=("csv", "json"))
    run.add_argument("--bits", action="store_true", help="show the summary table in bits")
    run.add_argument("--workers", type=int, help="worker processes (default: MOLCAP_THREADS or CPU count)")

    rec = sub.add_parser("recipes", help="list built-in recipes")
    rec.add_argument("--show", metavar="NAME", help="print a recipe as a JSON configuration")

    val = sub.add_parser("validate", help="check a configuration without running it")
    add_source(val)

    exp = sub.add_parser("export-channel", help="dump a channel matrix as CSV")
    add_source(exp)
    exp.add_argument("-o", "--output", required=True)
    exp.add_argument("--curve", type=int, default=0, help="curve index")
    exp.add_argument("--point", type=int, default=0, help="sweep point index")

    sim = sub.add_parser("simulate-oracle", help="compare simulated receptor occupancy to closed forms")
    sim.add_argument("--chain", choices=("blocking", "labeling"), default="blocking")
    sim.add_argument("--x", type=float, nargs="+", default=[100.0, 100.0], help="concentration per type (nM)")
    sim.add_argument("--a-ne", type=float, default=0.0)
    sim.add_argument("--kd", type=float, default=250.0)
    sim.add_argument("--block-ratio", type=float, default=0.002)
    sim.add_argument("--receptor", type=int, default=0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--replicas", type=int, default=1)
    return parser


def _source_config(args) -> ExperimentConfig:
    if (args.config is None) == (args.recipe is None):
        raise ConfigError(["give exactly one of a configuration file or --recipe"])
    raw = recipe_config(args.recipe) if args.recipe else load_config(args.config)
    overrides = {
        "peak": args.peak, "alpha_s": args.alpha_s, "a_ne": args.a_ne, "n": args.n,
        "cap_n": args.cap_n, "m": args.m, "grid_size": args.grid_size,
    }
    for key in ("output", "format"):
        if getattr(args, key, None) is not None:
            overrides[f"output_{'path' if key == 'output' else 'format'}"] = getattr(args, key)
    return config_from_dict(raw, overrides, force=args.force)


def _cmd_run(args, out, err) -> int:
    cfg = _source_config(args)
    rows = run_experiment(cfg, args.workers)
    text = format_results(rows, cfg.output_format)
    if cfg.output_path in (None, "-"):
        out.write(text)
        err.write(_summary(rows, args.bits))
    else:
        with open(cfg.output_path, "w", newline="") as fh:
            fh.write(text)
        out.write(_summary(rows, args.bits))
    return EXIT_OK


def _cmd_recipes(args, out, err) -> int:
    if args.show:
        out.write(json.dumps(recipe_config(args.show), indent=2) + "\n")
        return EXIT_OK
    for name, desc in list_recipes().items():
        out.write(f"{name:<10} {desc}\n")
    return EXIT_OK


def _cmd_validate(args, out, err) -> int:
    cfg = _source_config(args)
    out.write(f"ok: {len(cfg.curves)} curves x {len(cfg.sweep_values)} sweep points\n")
    return EXIT_OK


def _cmd_export(args, out, err) -> int:
    cfg = _source_config(args)
    n = export_channel(cfg, args.output, args.curve, args.point)
    out.write(f"wrote {n} rows to {args.output}\n")
    return EXIT_OK


def _cmd_simulate(args, out, err) -> int:
    m = len(args.x)
    if args.replicas < 1:
        raise ConfigError(["replicas must be at least 1"])
    try:
        k = Kinetics.uniform(m, args.kd, args.block_ratio)
        c = ConcentrationVector(args.x, [args.a_ne] * m)
        model = ChainModel(args.chain, args.receptor)
        est = combine_estimates(
            gillespie_occupancy(model, c, k, seed=args.seed + r) for r in range(args.replicas)
        )
        if args.chain == "blocking":
            p_bind, p_block = blocking_steady_state(args.receptor, c, k)
            predicted = {"full": p_bind, "empty": 1.0 - p_bind - p_block}
            for j, label in enumerate(est.labels):
                if label.startswith("blocked"):
                    other = int(label[len("blocked"):])
                    share = k.block_ratio[args.receptor, other] * c.total[other]
                    denom = c.total[args.receptor] / k.kd[args.receptor] + sum(
                        k.block_ratio[args.receptor, o] * c.total[o] for o in range(m) if o != args.receptor
                    ) + 1.0
                    predicted[label] = share / denom
        else:
            predicted = {f"label{j}": labeling_steady_state(j, c, args.kd) for j in range(m)}
            predicted["empty"] = 1.0 - sum(predicted.values())
    except DomainError as exc:
        raise ConfigError([str(exc)]) from exc
    states = {}
    for label in est.labels:
        se = est.std_error(label)
        sim, pred = est[label], float(predicted[label])
        states[label] = {"simulated": sim, "std_error": se, "closed_form": pred,
                         "z": (sim - pred) / se if se > 0 else 0.0}
    report = {
        "chain": args.chain, "x": args.x, "a_ne": args.a_ne, "kd": args.kd,
        "block_ratio": args.block_ratio, "seed": est.seed, "generator": est.generator,
        "replicas": args.replicas, "simulated_time": est.total_time, "states": states,
    }
    out.write(json.dumps(_plain(report), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "recipes": _cmd_recipes,
    "validate": _cmd_validate,
    "export-channel": _cmd_export,
    "simulate-oracle": _cmd_simulate,
}


def main(argv=None, out=None, err=None) -> int:
    """Entry point; returns the process exit code."""
    out = out or sys.stdout
    err = err or sys.stderr
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args, out, err)
    except ConfigError as exc:
        err.write("configuration error:\n" + "".join(f"  - {v}\n" for v in exc.violations))
        return EXIT_CONFIG
    except (UnsupportedError, DomainError) as exc:
        err.write(f"configuration error:\n  - {exc}\n")
        return EXIT_CONFIG
    except ConvergenceError as exc:
        err.write(f"solver did not converge: {exc}\n")
        return EXIT_SOLVER
    except OSError as exc:
        err.write(f"I/O error: {exc.filename or ''}: {exc.strerror or exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
