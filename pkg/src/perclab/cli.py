"""Command-line front end: ``theory``, ``simulate``, ``compare``, ``enumerate``, ``circuits``.

Exit codes: 0 ok, 1 a flagged check under ``--strict``, 2 usage or config error.
Configs are JSON and parsed strictly; every problem found is listed before exiting.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import theory
from .circuits import innermost_open_circuit, is_valid_circuit, outermost_open_circuit
from .confradius import GreenCalibration, cluster_radius_fn
from .events import EventSpec, batch_evaluate
from .experiments import (
    EstimatePlan,
    atomic_write_text,
    doubling_test,
    exact_event_probabilities,
    manifest,
    ratio_with_ci,
    rows_to_csv,
    run_estimates,
    write_run,
)
from .lattice import build_region
from .percolation import MAX_ENUM_SITES, BitConfig, sample_config

EXIT_OK, EXIT_FLAGGED, EXIT_USAGE = 0, 1, 2

DEMO_ENUMERATE = {
    "region": {"mesh": 1.0, "halfwidth": 4.0, "anchor": [0.0, -3.0]},
    "support": [2, 3, 4, 5, 6, 7, 10, 11, 12, 13, 14, 15],
    "seed": 1,
    "n": 20000,
    "events": [
        {"kind": k, "marks": {"u1": -1.0, "u2": 2.0, "w": [0.5, 0.8660254037844386], "s1": 1.0, "s2": 0.5, "s3": 1.0}}
        for k in ("TwoPointBB", "TwoPointBI", "ThreePoint", "E_II", "E_pt_II", "E_IR", "E_combined")
    ],
}


class ConfigError(Exception):
    def __init__(self, problems: list):
        super().__init__("; ".join(problems))
        self.problems = problems


# --- strict config parsing ------------------------------------------------------------------


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_pair(v) -> bool:
    return isinstance(v, list) and len(v) == 2 and all(_is_num(x) for x in v)


_CHECKS = {
    "num": (_is_num, "a finite number"),
    "int": (_is_int, "an integer"),
    "bool": (lambda v: isinstance(v, bool), "true or false"),
    "pair": (_is_pair, "a [re, im] pair"),
    "str": (lambda v: isinstance(v, str), "a string"),
    "list": (lambda v: isinstance(v, list), "a list"),
    "dict": (lambda v: isinstance(v, dict), "an object"),
}


def _check_fields(d, schema: dict, where: str, problems: list) -> bool:
    """``schema`` maps key -> (type tag, required). Appends every problem; True if ``d`` is usable."""
    if not isinstance(d, dict):
        problems.append(f"{where}: expected an object")
        return False
    for k in sorted(set(d) - set(schema)):
        problems.append(f"{where}: unknown field {k!r}")
    ok = True
    for k, (tag, required) in schema.items():
        if k not in d:
            if required:
                problems.append(f"{where}: missing field {k!r}")
                ok = False
            continue
        test, desc = _CHECKS[tag]
        if not test(d[k]):
            problems.append(f"{where}.{k}: expected {desc}")
            ok = False
    return ok


_REGION = {"mesh": ("num", True), "halfwidth": ("num", False), "anchor": ("pair", False)}


def _parse_events(raw, problems: list) -> list:
    events = []
    if not isinstance(raw, list) or not raw:
        problems.append("events: expected a non-empty list")
        return events
    for k, e in enumerate(raw):
        try:
            events.append(EventSpec.from_json(e))
        except (ValueError, TypeError, KeyError) as exc:
            problems.append(f"events[{k}]: {exc}")
    names = [e.name for e in events]
    dup = sorted({x for x in names if names.count(x) > 1})
    if dup:
        problems.append(f"events: duplicate names {dup}")
    return events


def _region_kwargs(d: dict) -> dict:
    r = d["region"]
    out = {"mesh": float(r["mesh"])}
    if "halfwidth" in r:
        out["halfwidth"] = float(r["halfwidth"])
    if "anchor" in r:
        out["anchor"] = complex(*r["anchor"])
    return out


def parse_simulate(d) -> tuple:
    """``(plan, options)`` from a simulate config, or :class:`ConfigError` with all problems."""
    problems: list = []
    schema = {
        "seed": ("int", True), "n": ("int", True), "region": ("dict", True), "events": ("list", True),
        "force_open": ("bool", False), "check_margin": ("bool", False), "doubling": ("bool", False),
        "ratios": ("list", False), "calibration": ("str", False), "walk_budget": ("int", False),
    }
    _check_fields(d, schema, "config", problems)
    if not isinstance(d, dict):
        raise ConfigError(problems)
    if isinstance(d.get("region"), dict):
        _check_fields(d["region"], _REGION, "region", problems)
    events = _parse_events(d.get("events"), problems) if "events" in d else []
    if _is_int(d.get("n")) and d["n"] < 1:
        problems.append("n: must be at least 1")
    ratios = []
    for k, r in enumerate(d.get("ratios", [])):
        where = f"ratios[{k}]"
        if _check_fields(r, {"name": ("str", True), "events": ("dict", True), "target": ("num", False)}, where, problems):
            names = {e.name for e in events}
            for ev, ex in r["events"].items():
                if ev not in names:
                    problems.append(f"{where}: unknown event {ev!r}")
                if not _is_num(ex):
                    problems.append(f"{where}: exponent of {ev!r} must be a number")
            ratios.append(r)
    green = any(e.radius_method == "green" and e.uses_radius for e in events)
    if green and "calibration" not in d:
        problems.append("calibration: required by green radius-method events")
    if problems:
        raise ConfigError(problems)
    rk = _region_kwargs(d)
    try:
        plan = EstimatePlan(tuple(events), d["n"], d["seed"], rk["mesh"], rk.get("halfwidth"), rk.get("anchor"),
                            d.get("force_open", False), d.get("check_margin", True))
        plan.region()
    except ValueError as exc:
        raise ConfigError([f"plan: {exc}"]) from None
    opts = {"doubling": d.get("doubling", False), "ratios": ratios, "calibration": d.get("calibration"),
            "walk_budget": d.get("walk_budget", 10_000), "green": green}
    return plan, opts


def parse_enumerate(d) -> tuple:
    problems: list = []
    schema = {"region": ("dict", True), "support": ("list", False), "events": ("list", True),
              "seed": ("int", False), "n": ("int", False)}
    _check_fields(d, schema, "config", problems)
    if not isinstance(d, dict):
        raise ConfigError(problems)
    if isinstance(d.get("region"), dict):
        _check_fields(d["region"], _REGION, "region", problems)
    events = _parse_events(d.get("events"), problems) if "events" in d else []
    for e in events:
        if e.radius_method == "green" and e.uses_radius:
            problems.append(f"events: {e.name} uses the green method, which has no exact counterpart")
    if problems:
        raise ConfigError(problems)
    rk = _region_kwargs(d)
    try:
        region = build_region(rk["mesh"], rk.get("halfwidth", 4 * rk["mesh"]), rk.get("anchor", 0j))
    except ValueError as exc:
        raise ConfigError([f"region: {exc}"]) from None
    support = np.asarray(d.get("support", list(range(region.n_sites))))
    if support.dtype.kind not in "iu" or len(support) == 0:
        raise ConfigError(["support: expected a non-empty list of site ids"])
    if support.min() < 0 or support.max() >= region.n_sites or len(set(support.tolist())) != len(support):
        raise ConfigError([f"support: site ids must be distinct and below {region.n_sites}"])
    if len(support) > MAX_ENUM_SITES:
        raise ConfigError([f"support: {len(support)} sites exceeds the cap of {MAX_ENUM_SITES}"])
    return region, support.astype(np.int64), events, d.get("seed", 1), d.get("n", 20000)


def parse_circuits(d) -> tuple:
    problems: list = []
    schema = {"region": ("dict", True), "annulus": ("dict", True), "seed": ("int", True), "n": ("int", True),
              "force_open": ("bool", False)}
    _check_fields(d, schema, "config", problems)
    if not isinstance(d, dict):
        raise ConfigError(problems)
    if isinstance(d.get("region"), dict):
        _check_fields(d["region"], _REGION, "region", problems)
    ann = d.get("annulus")
    if isinstance(ann, dict) and _check_fields(ann, {"z": ("pair", True), "a": ("num", True), "b": ("num", True)},
                                               "annulus", problems):
        if not 0 < ann["a"] < ann["b"]:
            problems.append("annulus: need 0 < a < b")
    if problems:
        raise ConfigError(problems)
    rk = _region_kwargs(d)
    try:
        region = build_region(rk["mesh"], rk.get("halfwidth", 4 * ann["b"]), rk.get("anchor", complex(*ann["z"])))
    except ValueError as exc:
        raise ConfigError([f"region: {exc}"]) from None
    return region, complex(*ann["z"]), float(ann["a"]), float(ann["b"]), d["seed"], d["n"], d.get("force_open", False)


def _load_config(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc})"]) from None


# --- subcommands ------------------------------------------------------------------------------


def _g12(v: float) -> str:
    return f"{v:.12g}"


def _print_json(values: dict) -> None:
    print("{" + ", ".join(f"{json.dumps(k)}: {_g12(v)}" for k, v in values.items()) + "}")


def _complex_arg(text: str) -> complex:
    try:
        re_, im = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected re,im but got {text!r}") from None
    return complex(re_, im)


def cmd_theory(args) -> int:
    out = {}
    if args.kf:
        out["K_F"] = theory.k_f()
    if args.k1:
        out["K1"] = theory.k1()
    if args.k2:
        out["K2"] = theory.k2()
    if args.h0:
        out["H0"] = theory.h0()
    if args.gamma is not None:
        out["gamma"] = theory.gamma_fn(args.gamma)
    if args.H is not None:
        out["H"] = theory.h_function(args.H)
    if args.hyp2f1 is not None:
        out["hyp2f1"] = theory.hyp2f1(*args.hyp2f1)
    if args.cardy is not None:
        out["cardy"] = theory.cardy_crossing(*args.cardy)
    geo = args.psi or args.strip or args.lemma22 or args.bi
    if geo:
        needed = {"u1": args.u1, "s": args.s, "w": args.w}
        if args.psi or args.strip or args.bi:
            needed["u2"] = args.u2
        if args.lemma22 or args.bi:
            needed["s3"] = args.s3
        missing = [k for k, v in needed.items() if v is None]
        if missing:
            raise ValueError(f"missing --{', --'.join(missing)}")
    if args.psi:
        out["psi"] = theory.psi_factor(args.u1, args.s, args.u2, args.w)
    if args.strip:
        p = theory.strip_map(args.u1, args.s, args.u2, args.w)
        out.update({"x": p.x, "y": p.y, "strip_derivative_abs": theory.strip_derivative_abs(args.u1, args.s, args.u2, args.w)})
    if args.lemma22:
        out["lemma22"] = theory.lemma22_prediction(args.u1, args.s, args.w, args.s3)
    if args.bi:
        out["bi"] = theory.bi_prediction(args.u1, args.s, args.u2, args.w, args.s3)
    if not out:
        raise ValueError("nothing requested; see theory --help")
    _print_json(out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    d = _load_config(args.config)
    if args.seed is not None:
        d["seed"] = args.seed
    if args.n is not None:
        d["n"] = args.n
    plan, opts = parse_simulate(d)
    radius_fn = None
    if opts["green"]:
        cal = GreenCalibration.load(opts["calibration"])
        radius_fn = cluster_radius_fn(cal, opts["walk_budget"], seed=plan.seed)
    res = run_estimates(plan, args.workers, radius_fn=radius_fn)
    flagged = []
    extra = {}
    if opts["green"]:
        extra["calibration_checksum"] = cal.checksum()
    out = Path(args.out)
    write_run(out, res, extra)
    h = manifest(plan, extra)["content_hash"]
    if opts["ratios"]:
        rows = []
        for r in opts["ratios"]:
            rr = ratio_with_ci(res, r["events"])
            row = {"name": r["name"], "value": rr.value, "ci95": rr.ci95, "estimable": rr.estimable,
                   "target": r.get("target", math.nan), "flagged": False, "manifest": h}
            if "target" in r:
                row["flagged"] = not rr.estimable or abs(rr.value - r["target"]) > rr.ci95
            if row["flagged"]:
                flagged.append(f"ratio {r['name']}")
            rows.append(row)
        atomic_write_text(out / "ratios.csv", rows_to_csv(rows))
    if opts["doubling"]:
        if opts["green"]:
            raise ConfigError(["doubling: not available with green radius-method events"])
        dt = doubling_test(plan, args.workers, base=res)
        rows = [dict(vars(r), manifest=h) for r in dt]
        atomic_write_text(out / "doubling.csv", rows_to_csv(rows))
        flagged += [f"doubling {r.event}" for r in dt if r.flagged]
    print(f"wrote {out / 'estimates.csv'} ({len(res)} events, n={plan.n}, manifest {h})")
    return _finish(flagged, args.strict)


def _finish(flagged: list, strict: bool) -> int:
    for f in flagged:
        print(f"FLAGGED: {f}", file=sys.stderr)
    return EXIT_FLAGGED if flagged and strict else EXIT_OK


def _read_run(path: Path) -> tuple:
    try:
        man = json.loads((path / "manifest.json").read_text())
        with open(path / "estimates.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"{path}: not a run directory ({exc})"]) from None
    return man, rows


def cmd_compare(args) -> int:
    runs = [(Path(p),) + _read_run(Path(p)) for p in args.runs]
    problems = []
    for p, man, _ in runs:
        if man.get("schema") != 1:
            problems.append(f"{p}: unsupported manifest schema {man.get('schema')!r}")
    emb = {man.get("embedding") for _, man, _ in runs}
    if len(emb) > 1:
        problems.append(f"runs use different lattice embeddings: {sorted(map(str, emb))}")
    if problems:
        raise ConfigError(problems)
    base = {r["event"]: r for r in runs[0][2]}
    out_rows, flagged = [], []
    for p, man, rows in runs[1:]:
        for r in rows:
            b = base.get(r["event"])
            if b is None:
                continue
            shift = float(r["mean"]) - float(b["mean"])
            tol = 2.0 * math.hypot(float(r["ci95"]), float(b["ci95"]))
            flag = abs(shift) > tol
            out_rows.append({"event": r["event"], "base": str(runs[0][0]), "run": str(p),
                             "mean_base": float(b["mean"]), "mean_run": float(r["mean"]), "shift": shift,
                             "tolerance": tol, "flagged": flag,
                             "manifest_base": runs[0][1]["content_hash"], "manifest_run": man["content_hash"]})
            if flag:
                flagged.append(f"{r['event']} in {p}")
    text = rows_to_csv(out_rows)
    if args.out:
        atomic_write_text(Path(args.out) / "comparison.csv", text)
    print(text, end="")
    return _finish(flagged, args.strict)


def cmd_enumerate(args) -> int:
    d = DEMO_ENUMERATE if args.demo else _load_config(args.config) if args.config else None
    if d is None:
        raise ConfigError(["enumerate needs a config path or --demo"])
    region, support, events, seed, n = parse_enumerate(d)
    if args.seed is not None:
        seed = args.seed
    if args.n is not None:
        n = args.n
    exact = exact_event_probabilities(region, events, support)
    mask = np.zeros(region.n_sites, dtype=bool)
    mask[support] = True
    hits = np.zeros(len(events))
    chunk = 4096
    for a in range(0, n, chunk):
        m = np.stack([sample_config(region, seed, k).bits & mask for k in range(a, min(n, a + chunk))])
        for e, spec in enumerate(events):
            hits[e] += batch_evaluate(region, spec, m).sum()
    rows, flagged = [], []
    for spec, p, h in zip(events, exact, hits):
        mc = h / n
        sigma = math.sqrt(p * (1 - p) / n)
        z = (mc - p) / sigma if sigma > 0 else (0.0 if mc == p else math.inf)
        ok = abs(z) <= 5.0
        rows.append({"event": spec.name, "exact": p, "mc": mc, "n": n, "sigma": sigma, "z": z, "within_5sigma": ok})
        if not ok:
            flagged.append(f"{spec.name} z={z:.2f}")
    text = rows_to_csv(rows)
    if args.out:
        atomic_write_text(Path(args.out) / "enumerate.csv", text)
    print(f"# support {len(support)} sites, {2 ** len(support)} configurations")
    print(text, end="")
    return _finish(flagged, args.strict)


def cmd_circuits(args) -> int:
    region, z, a, b, seed, n, force_open = parse_circuits(_load_config(args.config))
    if args.seed is not None:
        seed = args.seed
    if args.n is not None:
        n = args.n
    stats = {"outer": [0, 0, 0], "inner": [0, 0, 0]}  # exists, semi, total length
    invalid = 0
    for k in range(n):
        cfg = sample_config(region, seed, k)
        if force_open:
            cfg = BitConfig(region, np.ones(region.n_sites, dtype=bool))
        for key, fn in (("outer", outermost_open_circuit), ("inner", innermost_open_circuit)):
            c = fn(cfg, z, a, b)
            if c is None:
                continue
            s = stats[key]
            s[0] += 1
            s[1] += c.is_semi
            s[2] += len(c)
            if not is_valid_circuit(cfg, c):
                invalid += 1
    rows = []
    for key, (ex, semi, length) in stats.items():
        rows.append({"circuit": key, "n": n, "exists_freq": ex / n, "semi_freq": semi / n,
                     "mean_length": length / ex if ex else math.nan})
    text = rows_to_csv(rows)
    if args.out:
        atomic_write_text(Path(args.out) / "circuits.csv", text)
    print(text, end="")
    return _finish([f"{invalid} invalid circuits"] if invalid else [], args.strict)


# --- entry point ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perclab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("theory", help="evaluate closed-form predictions")
    t.add_argument("--kf", action="store_true")
    t.add_argument("--k1", action="store_true")
    t.add_argument("--k2", action="store_true")
    t.add_argument("--h0", action="store_true")
    t.add_argument("--gamma", type=float)
    t.add_argument("--H", type=float, help="H(x)")
    t.add_argument("--hyp2f1", type=float, nargs=4, metavar=("A", "B", "C", "Z"))
    t.add_argument("--cardy", type=float, nargs=4, metavar=("X1", "X2", "X3", "X4"))
    t.add_argument("--psi", action="store_true")
    t.add_argument("--strip", action="store_true")
    t.add_argument("--lemma22", action="store_true")
    t.add_argument("--bi", action="store_true")
    t.add_argument("--u1", type=float)
    t.add_argument("--s", type=float)
    t.add_argument("--u2", type=float)
    t.add_argument("--s3", type=float)
    t.add_argument("--w", type=_complex_arg, help="re,im")
    t.set_defaults(fn=cmd_theory)

    def common(sp, config_required=True):
        if config_required:
            sp.add_argument("config")
        sp.add_argument("--out", default=None)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--n", type=int)
        sp.add_argument("--strict", action="store_true", help="exit 1 on any flagged check")

    s = sub.add_parser("simulate", help="Monte Carlo estimates for a JSON config")
    common(s)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(fn=cmd_simulate)

    c = sub.add_parser("compare", help="compare run directories event by event")
    c.add_argument("runs", nargs="+")
    c.add_argument("--out", default=None)
    c.add_argument("--strict", action="store_true")
    c.set_defaults(fn=cmd_compare)

    e = sub.add_parser("enumerate", help="Monte Carlo against exact enumeration")
    e.add_argument("config", nargs="?")
    e.add_argument("--demo", action="store_true", help="use the bundled 12-site demo")
    common(e, config_required=False)
    e.set_defaults(fn=cmd_enumerate)

    r = sub.add_parser("circuits", help="outermost/innermost circuit statistics")
    common(r)
    r.set_defaults(fn=cmd_circuits)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.out is None:
        parser.error("simulate needs --out")
    if args.command == "compare" and len(args.runs) < 2:
        parser.error("compare needs at least two run directories")
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        return args.fn(args)
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
