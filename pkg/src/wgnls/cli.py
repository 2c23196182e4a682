"""Command-line runner: experiments, verification suites and parameter sweeps.

Every run writes ``manifest.json`` plus flat ``series/*.csv`` files with
columns ``t, series, value`` and, where states are kept,
``checkpoints/*.jsonl``.  Exit status is 0 iff every asserted criterion
passes; 2 flags a configuration error, 3 a grid or stability guard, 4 a
numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import jsonschema
import numpy as np

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_GUARD, EXIT_NUMERIC = 0, 1, 2, 3, 4

_NUMBER = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_MODES = {"type": "object",
          "patternProperties": {"^-?[0-9]+$": {"oneOf": [
              {"type": "number"},
              {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}]}},
          "additionalProperties": False}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "grid": {"type": "object", "additionalProperties": False,
                 "required": ["L", "n_x", "p_max"],
                 "properties": {"L": _POS, "n_x": {"type": "integer", "minimum": 2},
                                "p_max": _POS_INT, "n_y": _POS_INT}},
        "data": {"type": "object", "additionalProperties": False,
                 "properties": {"modes": _MODES, "width": _POS, "amplitude": _NUMBER,
                                "random": {"type": "object", "additionalProperties": False,
                                           "properties": {"p_max": _POS_INT,
                                                          "decay": _NUMBER}}}},
        "run": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
    },
}

# experiments whose config must carry a grid section
_NEEDS_GRID = {"resonant", "waveguide"}


class ConfigError(ValueError):
    pass


# -- configuration ---------------------------------------------------------------------------

def _field_name(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            path = f"{path}.{missing[0]}" if path else missing[0]
    elif err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        if extra:
            path = f"{path}.{extra[0]}" if path else extra[0]
    return path or "<root>"


def validate_config(cfg: dict, experiment: str | None = None) -> None:
    """Raise :class:`ConfigError` naming the offending field."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"config error at {_field_name(err)}: {err.message}")
    if experiment in _NEEDS_GRID and "grid" not in cfg:
        raise ConfigError(f"config error at grid: required for {experiment}")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``key.sub=value`` overrides; values are parsed as JSON when possible."""
    cfg = json.loads(json.dumps(cfg))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"config error at {key}: {p} is not a section")
        node[parts[-1]] = _parse_value(value)
    return cfg


def load_config(path, overrides=(), experiment: str | None = None) -> dict:
    cfg = {}
    if path:
        try:
            cfg = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    cfg = apply_overrides(cfg, overrides)
    validate_config(cfg, experiment)
    return cfg


def _dataclass_from(cls, base, section: dict, prefix: str):
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(section) - names)
    if unknown:
        raise ConfigError(f"config error at {prefix}.{unknown[0]}: unknown parameter")
    vals = {}
    for k, v in section.items():
        current = getattr(base, k)
        vals[k] = tuple(tuple(x) if isinstance(x, list) else x for x in v) \
            if isinstance(current, tuple) and isinstance(v, list) else v
    return replace(base, **vals)


def _modes(data: dict, default: dict) -> dict:
    raw = data.get("modes")
    if raw is None:
        return default
    return {int(p): complex(*v) if isinstance(v, list) else complex(v) for p, v in raw.items()}


# -- output ---------------------------------------------------------------------------------

class RunWriter:
    """Collects the files of one run and writes its manifest."""

    def __init__(self, out: Path, experiment: str, config: dict, seed: int):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.experiment, self.config, self.seed = experiment, config, seed
        self.files: list[str] = []
        self.t0 = time.perf_counter()

    def series(self, name: str, rows) -> Path:
        path = self.out / "series" / f"{name}.csv"
        path.parent.mkdir(exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "series", "value"])
            for t, s, v in rows:
                w.writerow([repr(float(t)), s, repr(float(v))])
        self.files.append(str(path.relative_to(self.out)))
        return path

    def checkpoints(self, name: str, records) -> Path:
        from .spectral import write_jsonl
        path = self.out / "checkpoints" / f"{name}.jsonl"
        path.parent.mkdir(exist_ok=True)
        write_jsonl(path, records)
        self.files.append(str(path.relative_to(self.out)))
        return path

    def manifest(self, criteria: dict, extra: dict | None = None) -> dict:
        m = {"experiment": self.experiment, "config": self.config, "seed": self.seed,
             "build": build_stamp(), "wall_clock_s": time.perf_counter() - self.t0,
             "criteria": criteria, "passed": all(criteria.values()), "files": self.files}
        if extra:
            m.update(extra)
        (self.out / "manifest.json").write_text(json.dumps(m, indent=2, default=_jsonable))
        return m


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


def build_stamp() -> dict:
    try:
        pkg = version("artifact")
    except PackageNotFoundError:
        pkg = "unknown"
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True,
                             text=True, cwd=Path(__file__).parent, timeout=5).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return {"version": pkg, "git": rev or "unknown", "numpy": np.__version__}


def _field_records(times, states):
    from .spectral import field_to_record
    return [field_to_record(s, time=float(t)) for t, s in zip(times, states)]


# -- experiments ----------------------------------------------------------------------------

def run_verify(args, cfg, writer: RunWriter) -> dict:
    from .criteria import CRITERIA, SUITES
    ids = ([int(i) for i in args.criteria.split(",")] if args.criteria
           else list(SUITES[args.suite]))
    results, rows = {}, []
    for cid in ids:
        r = CRITERIA[cid]()
        print(r.line(), flush=True)
        results[f"{cid}:{r.name}"] = r.passed
        for k, v in _flatten(r.metrics).items():
            rows.append((cid, f"{k}", v))
        rows.append((cid, "seconds", r.seconds))
    writer.series("criteria", rows)
    return results


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple, np.ndarray)):
            for i, x in enumerate(np.ravel(np.asarray(v, dtype=float))):
                out[f"{key}[{i}]"] = x
        elif isinstance(v, (bool, np.bool_)):
            out[key] = float(v)
        elif isinstance(v, (int, float, np.number)):
            out[key] = float(v)
    return out


def run_szego(args, cfg, writer: RunWriter) -> dict:
    from .szego import evolve_szego, hs_norm_nonneg, random_szego_states
    run = {"T": 100.0, "tol": 1e-10, "P": 128, "n_snap": 101, "s": 1.0}
    run.update(cfg.get("run", {}))
    data = cfg.get("data", {})
    if "random" in data:
        rng = np.random.default_rng(writer.seed)
        r = data["random"]
        v0 = random_szego_states(1, r.get("p_max", 10), rng, r.get("decay", 2.0))[0]
        v0 /= np.linalg.norm(v0)
    else:
        modes = _modes(data, {0: 0.1, 1: 1.0})
        if min(modes) < 0:
            raise ConfigError("config error at data.modes: Szegő data live on modes >= 0")
        v0 = np.zeros(max(modes) + 1, complex)
        for p, c in modes.items():
            v0[p] = c
    traj = evolve_szego(v0, run["T"], run["tol"], P=int(run["P"]), n_snap=int(run["n_snap"]))
    states = np.stack(traj.states)
    rows = [(t, k, traj.invariants[k][i]) for i, t in enumerate(traj.times)
            for k in ("mass", "momentum", "hamiltonian")]
    rows += [(t, f"H^{run['s']}", h) for t, h in zip(traj.times, hs_norm_nonneg(states, run["s"]))]
    writer.series("szego", rows)
    writer.checkpoints("szego", [{"t": float(t), "re": s.real.tolist(), "im": s.imag.tolist()}
                                 for t, s in zip(traj.times, states)])
    return {f"{k} drift < 100 tol": traj.drift(k) < 100 * run["tol"]
            for k in ("mass", "momentum", "hamiltonian")}


def _grid_from(cfg):
    from .spectral import build_grid
    g = cfg["grid"]
    return build_grid(g["L"], g["n_x"], g["p_max"], g.get("n_y"))


def run_resonant(args, cfg, writer: RunWriter) -> dict:
    from .experiments import gaussian_profile_field, resonant_evolve, z_conservation_audit
    from .norms import cylinder_norm
    run = {"tau_end": 20.0, "tol": 1e-12, "method": "direct", "n_snap": 21}
    run.update(cfg.get("run", {}))
    grid = _grid_from(cfg)
    data = cfg.get("data", {})
    G0 = gaussian_profile_field(grid, _modes(data, {1: 1.0, 3: 0.5}),
                                data.get("width", 1.5), data.get("amplitude", 1.0))
    traj = resonant_evolve(G0, run["tau_end"], run["tol"], run["method"],
                           n_snap=int(run["n_snap"]))
    rows = [(t, n, cylinder_norm(f, n)) for t, f in zip(traj.times, traj.states)
            for n in ("L2", "Z")]
    writer.series("resonant", rows)
    writer.checkpoints("resonant", _field_records(traj.times, traj.states))
    rep = z_conservation_audit(traj)
    writer.series("trace_audit", [(run["tau_end"], k, v) for k, v in rep.items()])
    return {"trace drift < 1e-6": rep["trace_drift_rel"] < 1e-6}


def run_waveguide(args, cfg, writer: RunWriter) -> dict:
    from .experiments import gaussian_profile_field
    from .waveguide import SplitStepConfig, evolve_waveguide
    run = {"T": 10.0, "dt": 1e-3, "checkpoint_every": 1000}
    run.update(cfg.get("run", {}))
    grid = _grid_from(cfg)
    data = cfg.get("data", {})
    U0 = gaussian_profile_field(grid, _modes(data, {1: 1.0, -1: 0.6, 3: 0.4}),
                                data.get("width", 2.0), data.get("amplitude", 0.5))
    step = SplitStepConfig(dt=run["dt"], checkpoint_every=int(run["checkpoint_every"]))
    traj = evolve_waveguide(U0, run["T"], step)
    rows = [(t, k, traj.invariants[k][i]) for i, t in enumerate(traj.times)
            for k in ("mass", "energy", "even_leakage")]
    writer.series("waveguide", rows)
    writer.checkpoints("waveguide", _field_records(traj.times, traj.states))
    return {"mass drift < 1e-6": traj.drift("mass") < 1e-6,
            "energy drift < 1e-6": traj.drift("energy") < 1e-6}


def _scatter_config(cfg):
    from .experiments import ScatteringConfig
    base = ScatteringConfig()
    grid = cfg.get("grid", {})
    base = replace(base, **{k: grid[k] for k in ("L", "n_x", "p_max") if k in grid})
    data = cfg.get("data", {})
    if "modes" in data:
        base = replace(base, modes=tuple((p, c) for p, c in _modes(data, {}).items()))
    for k in ("width",):
        if k in data:
            base = replace(base, **{k: data[k]})
    if "amplitude" in data:
        base = replace(base, eps=data["amplitude"])
    return _dataclass_from(ScatteringConfig, base, cfg.get("run", {}), "run")


def run_scatter(args, cfg, writer: RunWriter) -> dict:
    from .experiments import modified_scattering_run
    sc = _scatter_config(cfg)
    res = modified_scattering_run(sc)
    writer.series("scatter", res.rows())
    writer.series("scatter_summary", [(sc.T, "ratio", res.fits["ratio"])])
    return {f"d/d0 < {sc.threshold}": res.fits["passed"]}


def _cascade_config(cfg):
    from .experiments import CascadeConfig
    base = CascadeConfig()
    grid = cfg.get("grid", {})
    base = replace(base, **{k: grid[k] for k in ("L", "n_x") if k in grid})
    if "p_max" in grid:
        base = replace(base, full_p_max=grid["p_max"])
    return _dataclass_from(CascadeConfig, base, cfg.get("run", {}), "run")


def run_cascade(args, cfg, writer: RunWriter) -> dict:
    from .experiments import cascade_experiment
    cc = _cascade_config(cfg)
    res = cascade_experiment(cc)
    rows = [(r["eps"], "sup", r["sup"]) for r in res["rows"]]
    rows += [(r["eps"], "argsup_tau", r["argsup_tau"]) for r in res["rows"]]
    writer.series("cascade", rows)
    crit = {}
    if len(res["rows"]) > 1:
        crit["strictly increasing"] = res["strictly_increasing"]
    if "full" in res:
        f = res["full"]
        writer.series("cascade_full", [(t, "full", a) for t, a in zip(f["t"], f["full"])]
                      + [(t, "resonant", b) for t, b in zip(f["t"], f["resonant"])])
        crit[f"full flow within {cc.band:.0%}"] = f["within_band"]
    return crit


EXPERIMENTS = {"szego": run_szego, "resonant": run_resonant, "waveguide": run_waveguide,
               "scatter": run_scatter, "cascade": run_cascade}

# headline scalar per experiment, used by sweep aggregates
_HEADLINE = {"cascade": ("series/cascade.csv", "sup"),
             "scatter": ("series/scatter_summary.csv", "ratio")}


# -- sweep ----------------------------------------------------------------------------------

def _sweep_key(experiment: str, param: str) -> str:
    # convenient short names for the sweepable parameters
    if param == "eps":
        return {"cascade": "run.eps_list", "scatter": "run.eps"}.get(experiment, f"run.{param}")
    return param if "." in param else f"run.{param}"


def _child(job):
    experiment, cfg, out, seed = job
    os.environ.setdefault("OMP_NUM_THREADS", "1")
    writer = RunWriter(out, experiment, cfg, seed)
    crit = EXPERIMENTS[experiment](None, cfg, writer)
    return writer.manifest(crit)


def run_sweep(args, cfg, writer: RunWriter) -> dict:
    name, _, values = args.param.partition("=")
    if not values:
        raise ConfigError("--param must look like name=v1,v2,...")
    vals = [_parse_value(v) for v in values.split(",")]
    key = _sweep_key(args.experiment, name)
    jobs = []
    for v in vals:
        value = [v] if key == "run.eps_list" else v
        child_cfg = apply_overrides(cfg, [f"{key}={json.dumps(value)}"])
        if args.experiment == "cascade" and name == "eps":
            child_cfg = apply_overrides(child_cfg, ["run.full_eps=null"])
        validate_config(child_cfg, args.experiment)
        jobs.append((args.experiment, child_cfg, writer.out / f"{name}={v}", writer.seed))
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            manifests = list(pool.map(_child, jobs))
    else:
        manifests = [_child(j) for j in jobs]
    crit, rows = {}, []
    headline = _HEADLINE.get(args.experiment)
    xs, ys = [], []
    for v, m, job in sorted(zip(vals, manifests, jobs), key=lambda z: z[0]):
        for k, ok in m["criteria"].items():
            crit[f"{name}={v}: {k}"] = ok
        if headline:
            path = Path(job[2]) / headline[0]
            with path.open() as fh:
                val = next(float(r["value"]) for r in csv.DictReader(fh)
                           if r["series"] == headline[1])
            rows.append((v, headline[1], val))
            xs.append(float(v))
            ys.append(val)
    if len(xs) > 1 and args.experiment == "cascade":
        # smaller eps must give a larger sup
        if name == "eps":
            crit["sup strictly increasing as eps decreases"] = bool(np.all(np.diff(ys) < 0))
    elif len(xs) > 1 and args.experiment == "scatter" and name == "eps":
        crit["ratio increasing in eps"] = bool(np.all(np.diff(ys) > 0))
    if len(xs) > 1 and all(x > 0 for x in xs) and all(y > 0 for y in ys):
        slope, icpt = np.polyfit(np.log(xs), np.log(ys), 1)
        rows.append((np.nan, "fit_slope", slope))
        rows.append((np.nan, "fit_prefactor", float(np.exp(icpt))))
    writer.series("aggregate", rows)
    writer.children = [str(Path(j[2]).relative_to(writer.out) / "manifest.json") for j in jobs]
    return crit


# -- entry point ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. grid.n_x=2048")
    common.add_argument("--out", default="runs/latest", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--seed", type=int, default=None, help="seed for random data")
    parser = argparse.ArgumentParser(prog="wgnls", parents=[common],
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    from .criteria import SUITES
    v = sub.add_parser("verify", parents=[common], help="run acceptance criteria")
    v.add_argument("--suite", choices=sorted(SUITES), default="fast")
    v.add_argument("--criteria", help="comma-separated criterion ids (overrides --suite)")
    for name, helptext in (("szego", "Szegő flow with invariant monitoring"),
                           ("resonant", "resonant system with trace-norm audit"),
                           ("waveguide", "full flow by Strang splitting"),
                           ("scatter", "full flow against the resonant prediction"),
                           ("cascade", "norm growth along the resonant flow")):
        sub.add_parser(name, parents=[common], help=helptext)
    s = sub.add_parser("sweep", parents=[common], help="run an experiment over a parameter list")
    s.add_argument("--param", required=True, help="name=v1,v2,... e.g. eps=0.2,0.1,0.05")
    s.add_argument("experiment", choices=sorted(EXPERIMENTS))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .spectral import WrapTimeError
    from .trajectory import IntegrationError
    from .waveguide import StabilityError
    experiment = args.experiment if args.command == "sweep" else args.command
    try:
        cfg = load_config(args.config, args.set, experiment)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        writer = RunWriter(Path(args.out), args.command if args.command != "sweep"
                           else f"sweep:{args.experiment}", cfg, seed)
        if args.command == "verify":
            crit = run_verify(args, cfg, writer)
        elif args.command == "sweep":
            crit = run_sweep(args, cfg, writer)
        else:
            crit = EXPERIMENTS[args.command](args, cfg, writer)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WrapTimeError, StabilityError) as exc:
        print(f"guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except IntegrationError as exc:
        print(f"numerical failure in {experiment}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    extra = {"children": writer.children} if hasattr(writer, "children") else None
    m = writer.manifest(crit, extra)
    for k, ok in crit.items():
        print(f"{'PASS' if ok else 'FAIL'}  {k}")
    print(f"manifest: {writer.out / 'manifest.json'}")
    return EXIT_OK if m["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
