"""Command line entry point: ``eqfuller {marks,index,sweep,check}``.

Every command reads one JSON config.  Keys (all optional unless noted)::

    marks:  group        {"builtin": "cyclic", "n": 2} or {"order", "mul", "names"}
    index:  system       "hopf_z2" or {"name": ..., "options": {...}}   (required)
            lambda       parameter value(s), default from the system
            region       {"kind": "ball", "radius": 3.0} | box | shell
            window       [a, b]                                          (required)
            seeds        {"per_axis", "random", "periods", "points", "period_seeds"}
            tolerances   {"rtol": 1e-11, "atol": 1e-12}
    sweep:  family       {"name": "hopf_param", "options": {...}} or {"harness": "flip"}
            region, window, tolerances, seeds as for index
            grid         {"n": 101, "lo": 0.0, "hi": 1.0} or an explicit list
            bracket_tol  1e-4,  reseed_every 10
    check:  system       as for index; equivariance {"n_samples": 64, "tol": 1e-8}
            z2           [{"h0": 1, "h_lambda": [1], "h_vv": 0, "lambda0": [0]}]
            s1           [{"a0", "a_lambda", "a_rr", "b0", "b_lambda", "b_rr", "lambda0", "s"}]

Exit codes: 0 success, 1 bad config, 2 degenerate field (index),
3 invariance violation and 4 inadmissible homotopy (sweep).
"""
import argparse
import json
import logging
import os
import sys
import tempfile
from fractions import Fraction

import numpy as np

from . import __version__
from .dynamics import DEFAULT_OPTIONS, IntegratorOptions, check_equivariance
from .errors import (ConfigError, DegenerateField, EqFullerError, GroupError, Inadmissible,
                     InvarianceViolation)
from .fuller_index import flip_map_harness, fuller_index, solution_property_holds
from .group_theory import group_from_json, lattice_summary, realized_classes
from .homotopy_sweep import (BRACKET_TOL, RESEED_EVERY, default_grid, sweep_family,
                             sweep_map_family, verify_invariance)
from .nondeg_criteria import s1_nondegenerate, z2_nondegenerate
from .periodic_orbits import orbits_to_csv
from .regions import EssentialWindow, Region
from .systems import builtin_system

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DEGENERATE = 2
EXIT_VIOLATION = 3
EXIT_INADMISSIBLE = 4

log = logging.getLogger("eqfuller")


# -- config ------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg


def _field(cfg, key, required=False, default=None):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing field '{key}'")
        return default
    return cfg[key]


def _system(spec, key="system"):
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"field '{key}' must be a name or {{\"name\": ..., \"options\": ...}}")
    return builtin_system(spec["name"], **spec.get("options", {}))


def _window(cfg, default_radius=3.0) -> EssentialWindow:
    region = Region.from_json(_field(cfg, "region", default={"kind": "ball",
                                                             "radius": default_radius}))
    win = _field(cfg, "window", required=True)
    try:
        a, b = (float(v) for v in win)
    except (TypeError, ValueError):
        raise ConfigError("field 'window' must be [a, b]") from None
    if not 0 < a < b:
        raise ConfigError(f"field 'window': need 0 < a < b, got [{a}, {b}]")
    return EssentialWindow(region, a, b)


def _options(cfg) -> IntegratorOptions:
    tol = _field(cfg, "tolerances", default={})
    return IntegratorOptions(float(tol.get("rtol", DEFAULT_OPTIONS.rtol)),
                             float(tol.get("atol", DEFAULT_OPTIONS.atol)))


def _seeds(cfg, seed):
    spec = dict(_field(cfg, "seeds", default={}))
    if seed is not None:
        spec["seed"] = seed
    spec.setdefault("seed", 0)
    return spec


def _lam(cfg, system):
    lam = _field(cfg, "lambda")
    return system.lam_vector(None if lam is None else np.atleast_1d(lam))


def _grid(cfg):
    g = _field(cfg, "grid", default={})
    if isinstance(g, list):
        return np.asarray(g, dtype=float)
    return default_grid(int(g.get("n", 101)), float(g.get("lo", 0.0)), float(g.get("hi", 1.0)))


# -- output ------------------------------------------------------------------

def write_atomic(path, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Fraction):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=_default) + "\n"


def _report(cfg, command, body) -> dict:
    return {"tool": "eqfuller", "version": __version__, "command": command,
            "config": cfg, **body}


# -- commands ----------------------------------------------------------------

def marks_table_text(lattice) -> str:
    names = [lattice.name(c.class_id) for c in lattice.classes]
    width = max(len(n) for n in names) + 2
    lines = [" " * width + "".join(n.rjust(width) for n in names)]
    for i, n in enumerate(names):
        lines.append(n.ljust(width) + "".join(str(v).rjust(width) for v in lattice.marks[i]))
    return "\n".join(lines)


def cmd_marks(cfg, out, threads=1, seed=None) -> int:
    try:
        group = group_from_json(_field(cfg, "group", default={"builtin": "trivial"}))
    except (GroupError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"field 'group': {exc}") from None
    lattice = group.lattice
    print(marks_table_text(lattice))
    write_atomic(os.path.join(out, "marks.json"),
                 _dump(_report(cfg, "marks", {"lattice": lattice_summary(lattice)})))
    return EXIT_OK


def cmd_index(cfg, out, threads=1, seed=None) -> int:
    system = _system(_field(cfg, "system", required=True))
    window = _window(cfg)
    lam = _lam(cfg, system)
    grid_spec = _seeds(cfg, seed)
    resolved = dict(cfg, seeds=grid_spec)
    try:
        result = fuller_index(system, lam, window, grid_spec=grid_spec, threads=threads,
                              options=_options(cfg))
    except DegenerateField as exc:
        write_atomic(os.path.join(out, "index.json"),
                     _dump(_report(resolved, "index", {"error": "DegenerateField",
                                                       "message": str(exc),
                                                       "details": exc.report})))
        print(f"degenerate field: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    body = result.to_json()
    body["solution_property"] = solution_property_holds(result)
    # classes that are no point's isotropy always carry coefficient 0
    lattice = system.action.group.lattice
    body["unrealized_classes"] = [lattice.name(c) for c, ok
                                  in enumerate(realized_classes(system.action)) if not ok]
    write_atomic(os.path.join(out, "index.json"), _dump(_report(resolved, "index", body)))
    write_atomic(os.path.join(out, "orbits.csv"), orbits_to_csv(result.orbits))
    print(json.dumps({"index": body["index"]}))
    return EXIT_OK


def cmd_sweep(cfg, out, threads=1, seed=None) -> int:
    family = _field(cfg, "family", required=True)
    grid = _grid(cfg)
    bracket_tol = float(_field(cfg, "bracket_tol", default=BRACKET_TOL))
    resolved = dict(cfg)
    if isinstance(family, dict) and "harness" in family:
        if family["harness"] != "flip":
            raise ConfigError(f"field 'family.harness': unknown harness {family['harness']!r}")
        harness = flip_map_harness(radius_Dp=float(family.get("radius_Dp", 0.5)))
        win = _field(cfg, "window", required=True)
        result = sweep_map_family(harness, (float(win[0]), float(win[1])), grid, bracket_tol)
    else:
        system = _system(family, "family")
        window = _window(cfg)
        grid_spec = _seeds(cfg, seed)
        resolved["seeds"] = grid_spec
        result = sweep_family(system, window, grid, grid_spec, threads,
                              int(_field(cfg, "reseed_every", default=RESEED_EVERY)),
                              bracket_tol, _options(cfg))
    sweep = result.to_json()
    try:
        verdict = verify_invariance(result)
        code = EXIT_OK
    except Inadmissible as exc:
        verdict = {"verdict": "inadmissible", "message": str(exc)}
        code = EXIT_INADMISSIBLE
    except InvarianceViolation as exc:
        verdict = {"verdict": "violation", "message": str(exc),
                   "bracket": exc.bracket,
                   "before": exc.before.to_json() if exc.before is not None else None,
                   "after": exc.after.to_json() if exc.after is not None else None}
        code = EXIT_VIOLATION
    for c in sweep["certificates"]:
        c.pop("_values", None)
    write_atomic(os.path.join(out, "branches.csv"), result.branches_csv())
    write_atomic(os.path.join(out, "events.json"),
                 _dump(_report(resolved, "sweep", {"events": sweep["events"],
                                                   "branches": sweep["branches"]})))
    write_atomic(os.path.join(out, "trace.json"),
                 _dump(_report(resolved, "sweep", {"trace": sweep["trace"]})))
    write_atomic(os.path.join(out, "sweep.json"),
                 _dump(_report(resolved, "sweep", {"verdict": verdict, "sweep": sweep})))
    print(json.dumps({"verdict": verdict["verdict"], "events": len(sweep["events"])}))
    return code


def _z2_h(spec):
    h0 = float(spec.get("h0", 1.0))
    hl = np.atleast_1d(np.asarray(spec.get("h_lambda", [0.0]), dtype=float))
    hvv = float(spec.get("h_vv", 0.0))

    def h(v, lam):
        lam = np.atleast_1d(lam)
        return h0 + float(hl @ lam[:hl.size]) + hvv * v * v
    return h


def _s1_coeff(spec, key):
    c0 = float(spec.get(f"{key}0", 1.0 if key == "a" else 0.0))
    cl = np.atleast_1d(np.asarray(spec.get(f"{key}_lambda", [0.0]), dtype=float))
    crr = float(spec.get(f"{key}_rr", 0.0))

    def fn(x, y, lam):
        lam = np.atleast_1d(lam)
        return c0 + float(cl @ lam[:cl.size]) + crr * (x * x + y * y)
    return fn


def cmd_check(cfg, out, threads=1, seed=None) -> int:
    body = {}
    if "system" in cfg:
        system = _system(cfg["system"])
        eq = dict(_field(cfg, "equivariance", default={}))
        tol = float(eq.get("tol", 1e-8))
        rseed = int(eq.get("seed", 0 if seed is None else seed))
        residual = check_equivariance(system, int(eq.get("n_samples", 64)), _lam(cfg, system),
                                      seed=rseed)
        body["equivariance"] = {"system": system.name, "residual": residual, "tol": tol,
                                "seed": rseed, "pass": residual < tol}
    body["z2"] = []
    for spec in _field(cfg, "z2", default=[]):
        lam0 = spec.get("lambda0", [0.0])
        body["z2"].append({"spec": spec, "verdict": z2_nondegenerate(_z2_h(spec), lam0)})
    body["s1"] = []
    for spec in _field(cfg, "s1", default=[]):
        lam0 = spec.get("lambda0", [0.0])
        verdict = s1_nondegenerate(_s1_coeff(spec, "a"), _s1_coeff(spec, "b"), lam0,
                                   spec.get("s"))
        body["s1"].append({"spec": spec, "verdict": verdict})
    write_atomic(os.path.join(out, "check.json"), _dump(_report(cfg, "check", body)))
    print(json.dumps({k: ([e["verdict"] for e in v] if isinstance(v, list) else v)
                      for k, v in body.items()}, default=_default))
    return EXIT_OK


COMMANDS = {"marks": cmd_marks, "index": cmd_index, "sweep": cmd_sweep, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eqfuller",
                                     description="Equivariant Fuller index of symmetric flows.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for seeding")
    parser.add_argument("--seed", type=int, default=None,
                        help="unsigned 64-bit seed for random seed points")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args.out, args.threads, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EqFullerError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
