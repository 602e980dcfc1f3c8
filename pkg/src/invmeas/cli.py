"""Command-line batch runner.

A run reads one JSON config holding a system (inline or a catalog name), a
mandatory seed and exactly one command block, then writes CSV/JSON artifacts
and a manifest into the output directory. Exit status: 0 on success, 2 when
an ``--expect-*`` hook is contradicted, 1 on any error.
"""
from __future__ import annotations

import argparse
import hashlib
import importlib.metadata
import json
import logging
import math
import os
import platform
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import catalog
from .conditions import (Verdict, check_contraction, check_interval_conditions,
                         check_recurrence_criterion, check_recurrence_empirical, check_unbounded)
from .estimate import (CONSISTENT, DISTINCT, DEFAULT_TOL, MeasureProfile,
                       measure_profile, merge_all, ratio_estimate, uniqueness_test)
from .homeo import diffeo_from_config
from .orbit import (atom_equality_check, enumerate_orbit, induced_kernel, kernel_to_csv,
                    reversal_check)
from .system import RandomSystem, TrajectorySpec, default_threads, map_streams, run_trajectory

log = logging.getLogger("invmeas")

COMMANDS = ("simulate", "estimate", "check", "uniqueness", "orbit")
EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2


class ConfigError(ValueError):
    pass


# -- output helpers ----------------------------------------------------------

def _fmt(x) -> str:
    return "%.17g" % x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Verdict):
        return obj.value
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _profile_rows(obj):
    if isinstance(obj, MeasureProfile):
        hist, ref = obj.histogram, obj.reference_mass
    else:
        hist, ref = obj, obj.in_window
    if hist.in_window == 0:
        return hist, []
    e = hist.edges
    return hist, [(e[i], e[i + 1], int(hist.counts[i]), hist.counts[i] / ref)
                  for i in range(hist.bins)]


def emit_plotdata(obj, path) -> list[Path]:
    """Write ``<path>.dat`` (bin centre, ratio) and ``<path>.csv``.

    The CSV has columns bin_lo, bin_hi, count, ratio_to_reference. A plain
    histogram is referenced to its in-window mass. A histogram with no
    mass in the window produces header-only files and a warning.
    """
    path = Path(path)
    stem = path.with_suffix("")
    hist, rows = _profile_rows(obj)
    if not rows:
        log.warning("histogram on %s has no mass in the window; writing empty %s", hist.window, stem)
    dat, csv_path = stem.with_suffix(".dat"), stem.with_suffix(".csv")
    try:
        with open(dat, "w") as fh:
            fh.write("# bin_centre ratio_to_reference\n")
            for lo, hi, _, r in rows:
                fh.write(f"{_fmt(0.5 * (lo + hi))} {_fmt(r)}\n")
        with open(csv_path, "w") as fh:
            fh.write("bin_lo,bin_hi,count,ratio_to_reference\n")
            for lo, hi, c, r in rows:
                fh.write(f"{_fmt(lo)},{_fmt(hi)},{c},{_fmt(r)}\n")
    except OSError as exc:
        raise OSError(f"cannot write plot data to {stem}: {exc}") from exc
    return [csv_path, dat]


# -- config ------------------------------------------------------------------

def _interval(block, key, required=True):
    v = block.get(key)
    if v is None:
        if required:
            raise ConfigError(f"missing field '{key}'")
        return None
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v)):
        raise ConfigError(f"field '{key}' must be a [lo, hi] pair of numbers")
    if not v[0] <= v[1]:
        raise ConfigError(f"field '{key}' is not well ordered: {v}")
    return [float(v[0]), float(v[1])]


def _need(block, key, cmd):
    if key not in block:
        raise ConfigError(f"missing field '{cmd}.{key}'")
    return block[key]


def load_config(path):
    """Parse the config file; returns (config dict, command name, raw bytes)."""
    raw = Path(path).read_bytes()
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    blocks = [c for c in COMMANDS if c in cfg]
    if len(blocks) != 1:
        raise ConfigError(f"{path}: need exactly one command block of {COMMANDS}, found {blocks}")
    if "system" not in cfg:
        raise ConfigError(f"{path}: missing field 'system'")
    seed = cfg.get("seed", cfg[blocks[0]].get("seed") if isinstance(cfg[blocks[0]], dict) else None)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"{path}: field 'seed' is mandatory and must be an integer")
    cfg["seed"] = seed
    return cfg, blocks[0], raw


def resolve_system(spec):
    """System config or catalog name -> (RandomSystem, CatalogEntry or None)."""
    if isinstance(spec, str):
        entry = catalog.build(spec)
        return entry.system, entry
    if isinstance(spec, dict):
        try:
            return RandomSystem.from_config(spec), None
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"system: malformed map entry ({exc})") from None
    raise ConfigError("field 'system' must be a catalog name or an object")


# -- commands ----------------------------------------------------------------

def cmd_simulate(system, block, seed, out, threads, entry):
    start = float(_need(block, "start", "simulate"))
    steps = int(_need(block, "steps", "simulate"))
    spec = TrajectorySpec(start, steps, seed, int(block.get("stream_index", 0)))
    files = []
    if block.get("record", False):
        path = out / "trajectory.csv"
        with open(path, "w") as fh:
            fh.write("step,state\n")
            k = [0]

            def visit(x):
                fh.write(f"{k[0]},{_fmt(x)}\n")
                k[0] += 1

            final = run_trajectory(system, spec, visit)
        files.append(path)
    else:
        final = run_trajectory(system, spec)
    write_json(out / "report.json", {"command": "simulate", "start": start, "steps": steps,
                                     "seed": seed, "final_state": final})
    return files + [out / "report.json"], None


def cmd_estimate(system, block, seed, out, threads, entry):
    window = _interval(block, "window")
    bins = int(_need(block, "bins", "estimate"))
    steps = int(_need(block, "steps", "estimate"))
    ref = _interval(block, "reference_cell", required=False) or window
    starts = [float(x) for x in block.get("starts", [block.get("start", 0.0)])]
    trials = int(block.get("trials", 1))
    burn_in = block.get("burn_in")
    jobs = [(i, t, x) for i, x in enumerate(starts) for t in range(trials)]

    def one(job):
        i, t, x = job
        return measure_profile(system, x, window, bins, ref, steps, seed, burn_in,
                               stream_index=i * trials + t)

    profiles = map_streams(one, jobs, threads)
    files, summary = [], []
    for i, x in enumerate(starts):
        mine = profiles[i * trials:(i + 1) * trials]
        hist = merge_all([p.histogram for p in mine])
        merged = MeasureProfile(hist, tuple(ref), sum(p.reference_mass for p in mine), x, seed)
        files += emit_plotdata(merged, out / f"profile_{i}.csv")
        summary.append({"start": x, "in_window": hist.in_window, "below": hist.below,
                        "above": hist.above, "total_steps": hist.total_steps,
                        "reference_mass": merged.reference_mass})
    report = {"command": "estimate", "window": window, "bins": bins, "steps": steps,
              "trials": trials, "reference_cell": ref, "seed": seed, "profiles": summary}
    if "ratio" in block:
        r = block["ratio"]
        phi, Phi = _interval(r, "phi"), _interval(r, "Phi")
        est = ratio_estimate(system, TrajectorySpec(starts[0], steps, seed, len(jobs)), phi, Phi,
                             burn_in)
        report["ratio"] = {"phi": phi, "Phi": Phi, "value": est.value,
                           "numerator_mass": est.numerator_mass,
                           "denominator_mass": est.denominator_mass, "n": est.n,
                           "batch_dispersion": est.batch_dispersion}
    write_json(out / "report.json", report)
    return files + [out / "report.json"], None


def cmd_uniqueness(system, block, seed, out, threads, entry):
    defaults = (entry.checks.get("uniqueness", {}) if entry else {})
    b = {**defaults, **block}
    for key in ("starts", "window", "bins", "steps"):
        _need(b, key, "uniqueness")
    res = uniqueness_test(system, b["starts"], _interval(b, "window"), int(b["bins"]),
                          int(b["steps"]), int(b.get("trials", 1)), seed,
                          float(b.get("tol", DEFAULT_TOL)), b.get("burn_in"), threads)
    write_json(out / "report.json", {"command": "uniqueness", "seed": seed, "parameters": b,
                                     **res.to_dict()})
    return [out / "report.json"], res.verdict


def _interval_system(block, entry):
    if "interval_system" in block:
        return [(diffeo_from_config(e["map"]), float(e["weight"])) for e in block["interval_system"]]
    return entry.interval_system if entry else None


def cmd_check(system, block, seed, out, threads, entry):
    defaults = entry.checks if entry else {}
    which = block.get("conditions") or ["U", "C", "R_criterion", "R_empirical", "interval"]
    reports = []
    for c in which:
        if c == "U":
            u = {**defaults.get("unbounded", {}), **block.get("unbounded", {})}
            reports.append(check_unbounded(system, float(u.get("grid_lo", -100.0)),
                                           float(u.get("grid_hi", 100.0)),
                                           int(u.get("grid_points", 4096))))
        elif c == "C":
            cb = {**defaults.get("contraction", {}), **block.get("contraction", {})}
            if "target" not in cb or "compactK" not in cb:
                log.info("skipping C: no target/compactK given")
                continue
            reports.append(check_contraction(system, _interval(cb, "target"), _interval(cb, "compactK"),
                                             int(cb.get("max_word_len", 12)),
                                             int(cb.get("node_budget", 10**6))))
        elif c == "R_criterion":
            reports.append(check_recurrence_criterion(system))
        elif c == "R_empirical":
            rb = {**defaults.get("recurrence", {}), **block.get("recurrence", {})}
            if "candidate_I" not in rb:
                log.info("skipping R_empirical: no candidate_I given")
                continue
            reports.append(check_recurrence_empirical(system, _interval(rb, "candidate_I"),
                                                      rb.get("starts", [0.0]),
                                                      int(rb.get("steps", 100_000)),
                                                      int(rb.get("trials", 4)), seed))
        elif c == "interval":
            base = _interval_system(block, entry)
            if base is None:
                log.info("skipping interval conditions: no interval system")
                continue
            reports.extend(check_interval_conditions(base))
        else:
            raise ConfigError(f"check.conditions: unknown condition {c!r}")
    dicts = [r.to_dict() for r in reports]
    write_json(out / "report.json", {"command": "check", "seed": seed, "reports": dicts})
    negative = any(r.verdict == Verdict.EVIDENCE_AGAINST for r in reports)
    return [out / "report.json"], "negative" if negative else "positive"


def cmd_orbit(system, block, seed, out, threads, entry):
    defaults = entry.checks.get("orbit", {}) if entry else {}
    b = {**defaults, **block}
    window = _interval(b, "windowK")
    sl = enumerate_orbit(system, float(_need(b, "x0", "orbit")), window,
                         int(b.get("max_depth", 256)), int(b.get("max_points", 10_000)))
    report = {"command": "orbit", "seed": seed, "points": list(sl.points), "closed": sl.closed,
              "generation_depth": sl.generation_depth, "windowK": window}
    files = []
    method = b.get("method", "exact" if sl.closed else "none")
    if method != "none":
        kw = {} if method == "exact" else {"horizon": int(b.get("horizon", 10**6)), "seed": seed,
                                          "excursions": int(b.get("excursions", 10**5)),
                                          "threads": threads}
        kern = induced_kernel(system, sl, method, **kw)
        kernel_to_csv(kern, out / "kernel.csv")
        files.append(out / "kernel.csv")
        report["escape_mass"] = kern.escape_mass
        if b.get("reversal", True):
            rc = reversal_check(system, sl, method, **kw)
            report["reversal_max_deviation"] = rc["max_deviation"]
        if b.get("atoms", True):
            report["atoms"] = atom_equality_check(kern)
    write_json(out / "report.json", report)
    return files + [out / "report.json"], None


HANDLERS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "check": cmd_check,
            "uniqueness": cmd_uniqueness, "orbit": cmd_orbit}


# -- driver ------------------------------------------------------------------

def _versions():
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "numba", "scipy"):
        try:
            out[pkg] = importlib.metadata.version(pkg)
        except importlib.metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, raw_config: bytes, seed, command, files, wall_time) -> Path:
    path = out / "manifest.json"
    write_json(path, {"config_sha256": hashlib.sha256(raw_config).hexdigest(), "seed": seed,
                      "command": command, "versions": _versions(), "wall_time": wall_time,
                      "files": [{"name": Path(f).name, "sha256": _sha256(f)} for f in files]})
    return path


def _exit_for(command, outcome, expect_unique, expect_distinct) -> int:
    if outcome is None or not (expect_unique or expect_distinct):
        return EXIT_OK
    if command == "uniqueness":
        if expect_unique and outcome != CONSISTENT:
            return EXIT_NEGATIVE
        if expect_distinct and outcome != DISTINCT:
            return EXIT_NEGATIVE
        return EXIT_OK
    # check: a hypothesis with evidence against it voids the uniqueness guarantee
    if expect_unique and outcome == "negative":
        return EXIT_NEGATIVE
    if expect_distinct and outcome != "negative":
        return EXIT_NEGATIVE
    return EXIT_OK


def run(command, config_path, out_dir=None, threads=None, expect_unique=False,
        expect_distinct=False) -> int:
    """Execute one config; returns the process exit status."""
    t0 = time.perf_counter()
    cfg, block_name, raw = load_config(config_path)
    if command != block_name:
        raise ConfigError(f"{config_path}: verb '{command}' does not match command block '{block_name}'")
    block = cfg[block_name]
    if not isinstance(block, dict):
        raise ConfigError(f"field '{block_name}' must be an object")
    out = Path(out_dir or cfg.get("output", {}).get("directory", "out"))
    out.mkdir(parents=True, exist_ok=True)
    system, entry = resolve_system(cfg["system"])
    files, outcome = HANDLERS[command](system, block, cfg["seed"], out, threads or default_threads(),
                                       entry)
    write_manifest(out, raw, cfg["seed"], command, files, time.perf_counter() - t0)
    return _exit_for(command, outcome, expect_unique, expect_distinct)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="invmeas", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON config file")
        s.add_argument("--out", help="output directory (overrides output.directory)")
        s.add_argument("--threads", type=int, help="worker threads; results do not depend on it")
        g = s.add_mutually_exclusive_group()
        g.add_argument("--expect-unique", action="store_true")
        g.add_argument("--expect-distinct", action="store_true")
    c = sub.add_parser("catalog")
    c.add_argument("action", choices=("list", "dump"))
    c.add_argument("name", nargs="?")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("INVMEAS_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "catalog":
            if args.action == "list":
                for name in catalog.names():
                    print(f"{name}\t{catalog.build(name).provenance}")
                return EXIT_OK
            if not args.name:
                raise ConfigError("catalog dump needs an entry name")
            print(json.dumps(_jsonable(catalog.entry_config(catalog.build(args.name))), indent=2))
            return EXIT_OK
        return run(args.command, args.config, args.out, args.threads, args.expect_unique,
                   args.expect_distinct)
    except ConfigError as exc:
        print(f"invmeas: config error: {exc}", file=sys.stderr)
    except Exception as exc:  # noqa: BLE001 - report and map to exit 1
        tb = traceback.extract_tb(exc.__traceback__)
        where = Path(tb[-1].filename).stem if tb else "?"
        print(f"invmeas: {type(exc).__name__} in {where}: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
