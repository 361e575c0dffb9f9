"""Command-line front end.

Every run is described by a flat ``key = value`` document: an optional
config file plus ``--key value`` overrides, which win.  Unknown keys are an
error.  Results are tables in CSV or JSON; both start with the fully
resolved configuration so that each output file documents its own run.

Exit codes: 0 success, 2 configuration error, 3 convergence failure,
4 infeasible request.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .analytic import pt_closed, pt_detuned
from .errors import (ConfigError, ConvergenceError, Infeasible, MappingInvalid,
                     OptimizationFailure)
from .model import PulseSpec, Shape, SystemParams, level_scheme

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INFEASIBLE = 0, 2, 3, 4
COMMANDS = ("single", "pair", "sweep", "delay-scan", "gain", "circuit")


# --------------------------------------------------------------------------
# Configuration schema

def _float(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise ValueError("nan is not allowed")
    return value


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError("expected an integer")
    return int(value)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _floats(text: str) -> tuple:
    return tuple(_float(part) for part in text.split(",") if part.strip())


def _choice(*allowed: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        low = text.strip().lower()
        if low not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}")
        return low
    return parse


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    doc: str


def _schema() -> dict:
    shape = _choice("decaying", "inverting")
    return {
        # Scattering center (frequencies in units of omega1).
        "omega2": Key(_float, 1.0, "transition frequency of qubit 2"),
        "coupling_j": Key(_float, 0.01, "ZZ coupling J"),
        "tau1": Key(_float, 200.0, "lifetime of qubit 1 from its line"),
        "tau2": Key(_float, 1.0e4, "lifetime of qubit 2 from its line"),
        "gamma_r": Key(_float, 0.0, "relaxation rate of both qubits"),
        "gamma_phi": Key(_float, 0.0, "pure dephasing rate of both qubits"),
        "t2_star": Key(_float, None, "sets gamma_r = gamma_phi with gamma_r/2 + gamma_phi = 1/t2_star"),
        # Pulses.  Carriers are offsets from the resonant defaults omega1 + 2J and omega2 + 2J.
        "tau_t": Key(_float, None, "target length (required for single and pair)"),
        "target_shape": Key(shape, "inverting", "target pulse shape"),
        "target_detuning": Key(_float, 0.0, "target carrier minus omega1 + 2J"),
        "tau_c": Key(_float, None, "control length (default tau2)"),
        "control_shape": Key(shape, "inverting", "control pulse shape"),
        "control_detuning": Key(_float, 0.0, "control carrier minus omega2 + 2J"),
        "delay": Key(_float, 0.0, "lead of the control over the target"),
        # Engine.
        "backend": Key(_choice("hierarchy", "trajectories"), "hierarchy", "engine backend"),
        "time_step": Key(_float, None, "largest (hierarchy) or fixed (trajectories) step"),
        "t_span": Key(_float, None, "simulation window"),
        "n_modes": Key(_int, None, "time bins per line (trajectories)"),
        "n_traj": Key(_int, 1000, "jump trajectories (trajectories)"),
        "seed": Key(_int, 0, "master random seed"),
        "rtol": Key(_float, 1e-8, "relative tolerance of the integrator"),
        "atol": Key(_float, 1e-12, "absolute tolerance of the integrator"),
        "convergence_tol": Key(_float, None, "if set, verify the result under refinement"),
        # Method and optimizer.
        "method": Key(_choice("engine", "pheno"), None, "engine or reduced model (per-command default)"),
        "constraint": Key(_choice("independent", "identical"), "independent", "pulse-length constraint"),
        "optimize_delay": Key(_bool, False, "also optimize the delay"),
        "xatol": Key(_float, 1e-3, "optimizer tolerance in log10 units"),
        # Sweep grid.
        "gamma_r_min": Key(_float, 1e-8, "smallest relaxation rate of the sweep"),
        "gamma_r_max": Key(_float, 1e-4, "largest relaxation rate of the sweep"),
        "gamma_phi_min": Key(_float, 1e-8, "smallest dephasing rate of the sweep"),
        "gamma_phi_max": Key(_float, 1e-4, "largest dephasing rate of the sweep"),
        "n_gamma_r": Key(_int, 8, "relaxation grid points"),
        "n_gamma_phi": Key(_int, 8, "dephasing grid points"),
        # Delay scan and gain.
        "delays": Key(_floats, (0.0, 1e3, 1e4, 1e5), "comma-separated delays to scan"),
        "reoptimize": Key(_bool, True, "re-optimize pulse lengths at each delay"),
        "budget": Key(_float, 0.05, "allowed perturbation probability of the control"),
        # Circuit.
        "mode": Key(_choice("derive", "solve"), "derive", "circuit mode"),
        "c_j1": Key(_float, None, "shunt capacitance of transmon 1"),
        "c_j2": Key(_float, None, "shunt capacitance of transmon 2"),
        "c_g1": Key(_float, None, "line capacitance of transmon 1"),
        "c_g2": Key(_float, None, "line capacitance of transmon 2"),
        "c_m": Key(_float, None, "coupling capacitance (derive)"),
        "e_j1": Key(_float, None, "Josephson energy of transmon 1 (derive)"),
        "e_j2": Key(_float, None, "Josephson energy of transmon 2 (derive)"),
        "e_jm": Key(_float, None, "Josephson energy of the coupler (derive)"),
        "omega": Key(_float, None, "common transmon frequency (solve)"),
        "j_zz": Key(_float, None, "target ZZ coupling (solve)"),
    }


SCHEMA = _schema()
FLAG_KEYS = {"method": "method", "backend": "backend", "seed": "seed"}
DEFAULT_METHOD = {"single": "engine", "pair": "engine", "sweep": "pheno",
                  "delay-scan": "pheno", "gain": "pheno", "circuit": "pheno"}


def read_config_text(text: str, source: str = "config") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: key {key!r} given twice")
        raw[key] = (value, f"{source}:{lineno}")
    return raw


def parse_overrides(tokens: list) -> dict:
    raw = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        body = tok[2:]
        if "=" in body:
            key, value = body.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"option {tok!r} needs a value")
            key, value = body, tokens[i + 1]
            i += 2
        key = key.replace("-", "_")
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r} (from {tok!r})")
        raw[key] = (value, f"option --{key}")
    return raw


def resolve(raw: dict) -> dict:
    """Typed configuration with defaults filled in."""
    cfg = {key: spec.default for key, spec in SCHEMA.items()}
    for key, (text, where) in raw.items():
        try:
            cfg[key] = SCHEMA[key].parse(text)
        except ValueError as exc:
            raise ConfigError(f"{where}: invalid value {text!r} for {key!r}: {exc}") from None
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg[k] is None]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")


# --------------------------------------------------------------------------
# Building library objects from a configuration

def system_params(cfg: dict) -> SystemParams:
    rates = dict(gamma_r=cfg["gamma_r"], gamma_phi=cfg["gamma_phi"])
    if cfg["t2_star"] is not None:
        if cfg["gamma_r"] or cfg["gamma_phi"]:
            raise ConfigError("give either t2_star or gamma_r/gamma_phi, not both")
        if not cfg["t2_star"] > 0.0:
            raise ConfigError("t2_star must be > 0")
        g = 1.0 / cfg["t2_star"]
        rates = dict(gamma_r=g / 1.5, gamma_phi=g / 1.5)
    try:
        return SystemParams(omega2=cfg["omega2"], coupling_j=cfg["coupling_j"],
                            tau1=cfg["tau1"], tau2=cfg["tau2"], **rates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def pulses(cfg: dict, params: SystemParams, tau_t: float, tau_c: Optional[float] = None):
    lv = level_scheme(params)
    try:
        target = PulseSpec(shape=Shape.parse(cfg["target_shape"]),
                           carrier=lv.f_gg_eg + cfg["target_detuning"], width=tau_t)
        control = PulseSpec(shape=Shape.parse(cfg["control_shape"]),
                            carrier=lv.f_gg_ge + cfg["control_detuning"],
                            width=tau_c if tau_c is not None else (cfg["tau_c"] or params.tau2))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return target, control


def engine_config(cfg: dict):
    from .engine import EngineConfig

    return EngineConfig(backend=cfg["backend"], time_step=cfg["time_step"], t_span=cfg["t_span"],
                        n_modes=cfg["n_modes"], n_traj=cfg["n_traj"], rng_seed=cfg["seed"],
                        rtol=cfg["rtol"], atol=cfg["atol"],
                        convergence_tol=cfg["convergence_tol"])


def _ratio(p_tc: float, p_t: float) -> float:
    return p_tc / p_t if p_t >= 1e-12 else math.inf


# --------------------------------------------------------------------------
# Commands.  Each returns a list of row dictionaries.

def cmd_single(cfg: dict) -> list:
    from .engine import scatter_single

    _require(cfg, "tau_t")
    params = system_params(cfg)
    target, _ = pulses(cfg, params, cfg["tau_t"])
    out = scatter_single(params, target, engine_config(cfg))
    detuning = level_scheme(params).f_gg_eg - target.carrier
    closed = (pt_closed(params, target.width) if detuning == 0.0
              else pt_detuned(params, target.width, detuning))
    return [{
        "p_t": out.p_t, "p_r": out.p_r, "p_loss": out.p_loss,
        "p_t_flux": out.p_t_flux, "p_r_flux": out.p_r_flux, "sigma": out.sigma,
        "p_t_closed": closed.p_t, "p_r_closed": closed.p_r, "p_loss_closed": closed.p_loss,
        "diff_p_t": out.p_t - closed.p_t, "diff_p_r": out.p_r - closed.p_r,
    }]


def cmd_pair(cfg: dict) -> list:
    from .engine import scatter_pair, scatter_single
    from .pheno import p_e_overlap, pheno_pt

    _require(cfg, "tau_t")
    params = system_params(cfg)
    target, control = pulses(cfg, params, cfg["tau_t"])
    target = target.replace(delay=cfg["delay"])
    if cfg["method"] == "pheno":
        from .analytic import pt_detuned_closed

        detuning = level_scheme(params).f_gg_eg - target.carrier
        p_t = pt_detuned_closed(params, target.width, detuning).p_t
        p_tc = pheno_pt(params, target, control)
        row = {"p_tc": p_tc, "p_e": p_e_overlap(params, target, control)}
    else:
        ecfg = engine_config(cfg)
        pair = scatter_pair(params, target, control, ecfg)
        p_t = scatter_single(params, target, ecfg).p_t
        p_tc = pair.p_tc
        row = pair.as_dict()
    row.update({"p_t": p_t, "c_s": p_tc - p_t, "r_s": _ratio(p_tc, p_t)})
    return [row]


def _optimize(cfg: dict, params: SystemParams, delay_mode):
    from .pheno import optimize_pulses

    return optimize_pulses(params, cfg["constraint"], delay_mode, cfg["method"],
                           cfg=engine_config(cfg) if cfg["method"] == "engine" else None,
                           target_shape=cfg["target_shape"], xatol=cfg["xatol"])


def _sweep_point(args) -> dict:
    cfg, i, j, g_r, g_phi = args
    from .pheno import DelayMode

    row = {"i": i, "j": j, "gamma_r": g_r, "gamma_phi": g_phi}
    mode = DelayMode.optimized() if cfg["optimize_delay"] else DelayMode.fixed(cfg["delay"])
    try:
        params = system_params({**cfg, "gamma_r": g_r, "gamma_phi": g_phi, "t2_star": None})
        m = _optimize(cfg, params, mode)
        row.update(m.as_dict())
        row["error"] = ""
    except (ConfigError, ConvergenceError, OptimizationFailure, ValueError) as exc:
        row.update({k: math.nan for k in ("c_s", "r_s", "p_t", "p_tc", "tau_t_opt",
                                          "tau_c_opt", "delay_opt")})
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _grid(lo: float, hi: float, n: int) -> np.ndarray:
    if n == 1 and lo > 0.0:
        return np.array([lo])
    if n < 1 or not (lo > 0.0 and hi >= lo):
        raise ConfigError(f"bad sweep range [{lo!r}, {hi!r}] with {n!r} points")
    return np.logspace(math.log10(lo), math.log10(hi), n)


def _run_parallel(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # ``map`` returns results in task order, whatever the finishing order.
        return list(pool.map(fn, tasks))


def cmd_sweep(cfg: dict, jobs: int = 1) -> list:
    g_r = _grid(cfg["gamma_r_min"], cfg["gamma_r_max"], cfg["n_gamma_r"])
    g_phi = _grid(cfg["gamma_phi_min"], cfg["gamma_phi_max"], cfg["n_gamma_phi"])
    system_params(cfg)
    tasks = [(cfg, i, j, float(a), float(b)) for i, a in enumerate(g_r) for j, b in enumerate(g_phi)]
    return _run_parallel(_sweep_point, tasks, jobs)


def _delay_point(args) -> dict:
    cfg, k, delay = args
    from .pheno import DelayMode, metrics

    params = system_params(cfg)
    if cfg["reoptimize"]:
        m = _optimize(cfg, params, DelayMode.fixed(delay))
        tau_t, tau_c = m.tau_t_opt, m.tau_c_opt
    else:
        _require(cfg, "tau_t")
        tau_t = cfg["tau_t"]
        tau_c = cfg["tau_c"] or params.tau2
        p = params.replace(tau2=tau_c)
        target, control = pulses(cfg, p, tau_t, tau_c)
        m = metrics(p, target, control, delay, method=cfg["method"],
                    cfg=engine_config(cfg) if cfg["method"] == "engine" else None)
    return {"k": k, "delay": delay, "c_s": m.c_s, "r_s": m.r_s, "p_t": m.p_t,
            "p_tc": m.p_tc, "tau_t": tau_t, "tau_c": tau_c}


def cmd_delay_scan(cfg: dict, jobs: int = 1) -> list:
    if not cfg["delays"]:
        raise ConfigError("delays is empty")
    system_params(cfg)
    tasks = [(cfg, k, float(d)) for k, d in enumerate(cfg["delays"])]
    return _run_parallel(_delay_point, tasks, jobs)


def cmd_gain(cfg: dict) -> list:
    from .pheno import DelayMode, gain, perturbation_probability

    params = system_params(cfg)
    if cfg["tau_t"] is None:
        m = _optimize({**cfg, "method": "pheno"}, params, DelayMode.fixed(cfg["delay"]))
        tau_t, tau_c = m.tau_t_opt, m.tau_c_opt
        params = params.replace(tau2=tau_c)
    else:
        tau_t, tau_c = cfg["tau_t"], cfg["tau_c"] or params.tau2
    target, control = pulses(cfg, params, tau_t, tau_c)
    budget = cfg["budget"]
    if not 0.0 <= budget < 1.0:
        raise ConfigError(f"budget must be in [0, 1), got {budget!r}")
    p_pert = perturbation_probability(params, target, control, cfg["delay"])
    n = gain(params, target, control, budget, cfg["delay"])
    return [{"n_scat": n, "p_pert": p_pert, "budget": budget, "tau_t": tau_t, "tau_c": tau_c,
             "gamma": params.gamma}]


def cmd_circuit(cfg: dict) -> list:
    from .circuit import Capacitances, CircuitParams, derive, solve_coupling

    _require(cfg, "c_j1", "c_j2", "c_g1", "c_g2")
    try:
        if cfg["mode"] == "solve":
            _require(cfg, "omega", "j_zz")
            caps = Capacitances(cfg["c_j1"], cfg["c_j2"], cfg["c_g1"], cfg["c_g2"])
            cp = solve_coupling(caps, cfg["omega"], cfg["j_zz"])
        else:
            _require(cfg, "c_m", "e_j1", "e_j2", "e_jm")
            cp = CircuitParams(cfg["c_j1"], cfg["c_j2"], cfg["c_g1"], cfg["c_g2"], cfg["c_m"],
                               cfg["e_j1"], cfg["e_j2"], cfg["e_jm"])
    except (Infeasible, MappingInvalid):
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    row = {k: getattr(cp, k) for k in ("c_j1", "c_j2", "c_g1", "c_g2", "c_m",
                                       "e_j1", "e_j2", "e_jm")}
    row.update(derive(cp).as_dict())
    return [row]


# --------------------------------------------------------------------------
# Output

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _config_value(value):
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    return _cell(value)


def _json_value(value):
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, tuple):
        return list(value)
    return value


def render(command: str, cfg: dict, rows: list, fmt: str) -> str:
    if fmt == "json":
        doc = {
            "program": "photon_transistor",
            "version": __version__,
            "command": command,
            "config": {k: _json_value(cfg[k]) for k in sorted(cfg)},
            "rows": [{k: _json_value(v) for k, v in row.items()} for row in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# photon_transistor {__version__} {command}\n")
    for key in sorted(cfg):
        buf.write(f"# {key} = {_config_value(cfg[key])}\n")
    columns = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(k)) for k in columns])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photon-transistor",
        description="Single-photon transistor simulations: scattering runs, contrast "
                    "sweeps, delay scans, gain estimates and circuit design.",
        epilog="Any configuration key can also be given as --key value; run with "
               "'keys' as the command to list them.")
    parser.add_argument("command", choices=COMMANDS + ("keys",))
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--output", help="output file (default: standard output)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--method", choices=("engine", "pheno"))
    parser.add_argument("--backend", choices=("hierarchy", "trajectories"))
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker processes for sweeps (default: all cores)")
    parser.add_argument("--seed", type=int)
    return parser


def run(argv: Optional[list] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if args.command == "keys":
        for key, spec in SCHEMA.items():
            stdout.write(f"{key} = {_config_value(spec.default)}    # {spec.doc}\n")
        return EXIT_OK
    try:
        raw = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}") from None
            raw.update(read_config_text(text, source=args.config))
        raw.update(parse_overrides(extra))
        for flag, key in FLAG_KEYS.items():
            value = getattr(args, flag)
            if value is not None:
                raw[key] = (str(value), f"option --{flag}")
        cfg = resolve(raw)
        if cfg["method"] is None:
            cfg["method"] = DEFAULT_METHOD[args.command]
        jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        handlers = {
            "single": lambda: cmd_single(cfg),
            "pair": lambda: cmd_pair(cfg),
            "sweep": lambda: cmd_sweep(cfg, jobs),
            "delay-scan": lambda: cmd_delay_scan(cfg, jobs),
            "gain": lambda: cmd_gain(cfg),
            "circuit": lambda: cmd_circuit(cfg),
        }
        rows = handlers[args.command]()
        text = render(args.command, cfg, rows, args.format)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, OptimizationFailure) as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        print("hint: lower time_step, raise n_modes or loosen convergence_tol", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (Infeasible, MappingInvalid) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
