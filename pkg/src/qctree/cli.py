"""Command line entry point: ``qctree <group> <command> [options]``.

Every command builds an ExperimentConfig, runs, and emits a JSON report
holding the config echo, package versions, measured values and one boolean
per checked invariant.  Exit codes: 0 all checks pass, 2 a check failed,
3 bad input.  Reports go to ``--report``, else to $QCTREE_OUT_DIR/<group>_<command>.json,
else to stdout.  Per-level and per-radius tables are also written as CSV next
to a report file.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import random
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .arc import QuasiArc, ResolutionError, bounded_turning_check, edge_distance_check
from .dyadic import ParseError, doubling_index, generate, load_tree
from .filtration import ru_decomposition
from .martingale import (
    ConsistencyError,
    MartingaleError,
    MartingaleSequence,
    MeasurabilityError,
    martingale_D,
    random_function,
    random_sequence,
    separating_witness,
    total_integral,
)
from .trees import (
    DecompositionError,
    PlanError,
    arc_decomposition,
    build_glued_tree,
    debv,
    full_arc_decomposition,
    geometric_constants,
    load_plan,
    random_plan,
    validate_treelike,
)

PASS, FAIL, INPUT = 0, 2, 3
ENV_OUT = "QCTREE_OUT_DIR"
RANDOMIZED = {("arc", "gen"), ("mart", "roundtrip"), ("tree", "gen"),
              ("glue", "psi"), ("l1iso", "bench")}


class InputError(Exception):
    """Bad command-line input; maps to exit code 3."""


@dataclass
class ExperimentConfig:
    group: str
    command: str
    inputs: dict = field(default_factory=dict)
    resolution: int | None = None
    levels: str | None = None
    seed: int | None = None
    trials: int = 10
    report: str | None = None
    arithmetic: str = "exact"
    tol: float = 0.0
    options: dict = field(default_factory=dict)
    timestamp: bool = True


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _fr(s: str) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"not a rational number: {s!r}") from exc


def _levels(text: str | None, top: int) -> list[int]:
    if not text:
        return list(range(top + 1))
    try:
        if ":" in text:
            a, b = text.split(":")
            return list(range(int(a), int(b) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad level range {text!r}") from exc


def _tree(cfg: ExperimentConfig):
    path = cfg.inputs.get("tree")
    if path:
        t = load_tree(path)
        return t.with_resolution(cfg.resolution) if cfg.resolution is not None else t
    kind = cfg.options.get("kind") or "euclidean"
    return generate(kind, cfg.resolution or 4, seed=cfg.seed or 0)


def _plan_tree(cfg: ExperimentConfig):
    path = cfg.inputs.get("plan")
    if path:
        return build_glued_tree(load_plan(path))
    if cfg.seed is None:
        raise InputError("give --plan or --seed")
    return build_glued_tree(random_plan(cfg.seed, int(cfg.options.get("arcs") or 6), cfg.resolution or 4))


# ---------------------------------------------------------------- commands


def arc_gen(cfg):
    kind = cfg.options.get("kind") or "random"
    t = generate(kind, cfg.resolution or 4, seed=cfg.seed)
    return {"tree": t.to_json(), "doubling_index": doubling_index(t)}, {}, {}


def arc_dist(cfg):
    arc = QuasiArc(_tree(cfg))
    x, y = cfg.options.get("x"), cfg.options.get("y")
    if x is None or y is None:
        raise InputError("arc dist needs --x and --y")
    return {"x": x, "y": y, "distance": arc.distance(_fr(x), _fr(y))}, {}, {}


def arc_check(cfg):
    t = _tree(cfg)
    arc = QuasiArc(t)
    ratio = bounded_turning_check(arc)
    bad = edge_distance_check(arc)
    res = {"resolution": t.resolution, "bounded_turning_ratio": ratio, "edge_mismatches": bad,
           "doubling_index": doubling_index(t), "diameter": arc.d(0, arc.cells)}
    return res, {"bounded_turning_is_1": ratio == 1, "edge_identity": not bad}, {}


def filtration_atoms(cfg):
    t = _tree(cfg)
    arc = QuasiArc(t)
    F = arc.filtration
    rows = []
    wanted = [int(cfg.options["n"])] if "n" in cfg.options else _levels(cfg.levels, F.n_max)
    for n in wanted:
        lv = F.level(n)
        rows.append({"n": n, "atoms": len(lv.atoms), "atom_ids": " ".join(a.id for a in lv.atoms),
                     "atom_measure": lv.atom_measure, "diffuse_measure": lv.diffuse_measure})
    ru = ru_decomposition(t)
    res = {"n_max": F.n_max, "levels": rows, "ru": ru}
    checks = {"nested": ru["nested"], "diffuse_monotone": ru["diffuse_monotone"]}
    return res, checks, {"levels": rows}


def _rng(cfg):
    return random.Random(cfg.seed)


def _maybe_float(cfg, f):
    return tuple(float(v) for v in f) if cfg.arithmetic == "float" else f


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} {path}: {exc}") from exc


def _values(raw, m, what):
    if not isinstance(raw, list) or len(raw) != m:
        raise InputError(f"{what} needs a JSON array of {m} values")
    return tuple(_fr(str(v)) for v in raw)


def _write_out(cfg, obj):
    out = cfg.options.get("out")
    if out:
        Path(out).write_text(json.dumps(_jsonable(obj), indent=2) + "\n")


def mart_d(cfg):
    arc = QuasiArc(_tree(cfg))
    if "f" in cfg.inputs:
        f = _values(_read_json(cfg.inputs["f"], "function file"), arc.cells + 1, "function file")
    elif cfg.seed is None:
        raise InputError("mart d needs --f or --seed")
    else:
        f = random_function(arc, _rng(cfg))
    f = _maybe_float(cfg, f)
    seq = martingale_D(arc, f, tol=cfg.tol)
    levels = [list(g) for g in seq.levels]
    _write_out(cfg, {"n_max": arc.filtration.n_max, "levels": levels})
    rows = [{"n": n, "sup": max(abs(v) for v in g)} for n, g in enumerate(seq.levels)]
    return {"function": f, "levels": levels}, {"routes_agree": True}, {"levels": rows}


def mart_i(cfg):
    arc = QuasiArc(_tree(cfg))
    if "seq" in cfg.inputs:
        raw = _read_json(cfg.inputs["seq"], "sequence file")
        if not isinstance(raw, dict) or not isinstance(raw.get("levels"), list):
            raise InputError("sequence file needs a 'levels' list")
        seq = MartingaleSequence(tuple(_values(g, arc.cells, "sequence level") for g in raw["levels"]))
    elif cfg.seed is None:
        raise InputError("mart i needs --seq or --seed")
    else:
        seq = random_sequence(arc, _rng(cfg))
    f = total_integral(arc, seq)
    _write_out(cfg, list(f))
    back = martingale_D(arc, f)
    top = arc.filtration.n_max + 1
    return ({"sequence": [list(g) for g in seq.levels], "integral": f},
            {"D_of_I": back.levels == seq.levels[:top]}, {})


def mart_roundtrip(cfg):
    arc = QuasiArc(_tree(cfg))
    rng = _rng(cfg)
    err_f, err_s = 0, 0
    for _ in range(cfg.trials):
        f = _maybe_float(cfg, random_function(arc, rng))
        back = total_integral(arc, martingale_D(arc, f, tol=cfg.tol), tol=cfg.tol)
        err_f = max(err_f, max(abs(a - b) for a, b in zip(f, back)))
        seq = random_sequence(arc, rng)
        again = martingale_D(arc, total_integral(arc, seq))
        err_s = max(err_s, max((abs(a - b) for g, h in zip(seq.levels, again.levels) for a, b in zip(g, h)),
                               default=0))
    limit = cfg.tol if cfg.arithmetic == "float" else 0
    res = {"trials": cfg.trials, "max_roundtrip_error": max(err_f, err_s),
           "max_error_I_of_D": err_f, "max_error_D_of_I": err_s}
    return res, {"I_of_D": err_f <= limit, "D_of_I": err_s <= limit}, {}


def mart_witness(cfg):
    arc = QuasiArc(_tree(cfg))
    rows, ok = [], True
    for g in range(1, arc.K):
        s = 1 << (arc.K - g)
        for lo in range(0, arc.cells, s):
            _, cert = separating_witness(arc, arc.point(lo), arc.point(lo + s))
            ok &= cert.passes
            rows.append({"u": arc.point(lo), "v": arc.point(lo + s), "k": cert.k, "atom": cert.atom.id,
                         "gain": cert.gain, "d_uv": cert.d_uv, "lip_dk": cert.lip_dk, "passes": cert.passes})
    return {"witnesses": len(rows)}, {"all_pass": ok}, {"witnesses": rows}


def tree_gen(cfg):
    plan = random_plan(cfg.seed, int(cfg.options.get("arcs") or 6), cfg.resolution or 4)
    T = build_glued_tree(plan)
    res = {"plan": plan.to_json(), "vertices": T.size, "leaves": len(T.leaves), "diameter": T.diameter}
    return res, {"bounded_turning_is_1": T.bounded_turning() == 1}, {}


def tree_debv(cfg):
    T = _plan_tree(cfg)
    depth = int(cfg.options.get("depth") or 3)
    D = debv(T, depth)
    rep = validate_treelike(None, D.decomposition)
    pieces = [{"piece": p.label, "size": len(p.vertices),
               "attach": None if p.attach is None else T.label(p.attach)} for p in D.pieces]
    res = {"depth": depth, "saturated_at": D.saturated_at, "nets": [len(n) for n in D.nets],
           "pieces": pieces, "anomalies": list(D.anomalies), "treelike": rep.to_json()}
    return res, {"treelike": rep.ok, "no_anomalies": not D.anomalies}, {"pieces": pieces}


def tree_decompose(cfg):
    T = _plan_tree(cfg)
    depth = cfg.options.get("depth")
    A = full_arc_decomposition(T, None if depth is None else int(depth))
    res = A.to_json()
    res["bounded_turning"] = T.bounded_turning()
    checks = {"treelike": A.report.ok, "debv_treelike": validate_treelike(None, A.debv.decomposition).ok,
              "C_within_product": A.measured.C <= A.predicted}
    return res, checks, {}


def glue_psi(cfg):
    from .glue import family_norm, lip_norm, phi, psi, random_family

    T = _plan_tree(cfg)
    D = arc_decomposition(T)
    C = geometric_constants(T, D).C
    rng = _rng(cfg)
    inverse, bounded, worst = True, True, Fraction(0)
    for _ in range(cfg.trials):
        fam = random_family(T, D, rng)
        g = psi(T, D, fam)
        inverse &= phi(T, D, g) == fam
        r = lip_norm(T, g) / max(family_norm(T, D, fam), Fraction(1, 10**9))
        worst = max(worst, r)
        bounded &= r <= C
    return {"C": C, "worst_ratio": worst, "trials": cfg.trials}, {"phi_psi_inverse": inverse, "norm_bound": bounded}, {}


def glue_light(cfg):
    from .glue import glue_light as run, oriented_family

    T = _plan_tree(cfg)
    D = arc_decomposition(T)
    grid = [_fr(s) for s in (cfg.options.get("r_grid") or "1/64,1/32,1/16,1/8,1/4").split(",")]
    r = run(T, D, oriented_family(T, D), grid)
    rows = [{"r": row.r, "windows": row.windows, "max_diameter": row.max_diameter, "ratio": row.ratio}
            for row in r.measured.rows]
    return r.to_json(), {"within_bound": r.ok}, {"radii": rows}


def glue_embed(cfg):
    from .glue import l1_embedding

    T = _plan_tree(cfg)
    D = arc_decomposition(T)
    p = float(cfg.options.get("p") or 1)
    if p < 1:
        raise InputError("p must be at least 1")
    e = l1_embedding(T, D, p)
    return e.to_json(), {"distortion_bound": e.ok}, {}


def l1iso_bench(cfg):
    from .l1iso import bench, random_space

    rng = _rng(cfg)
    try:
        sizes = [int(s) for s in (cfg.options.get("sizes") or "4,8,16").split(",")]
    except ValueError as exc:
        raise InputError("bad --sizes") from exc
    rows, ok = [], True
    for s in sizes:
        for mode in ("atom", "blocks"):
            if mode == "blocks" and s == 1:
                continue
            b = bench(random_space(rng, s), rng, mode)
            ok &= b["ok"]
            rows.append({"size": s, "mode": mode, "kernel_distortion": b["kernel_distortion"],
                         "end_to_end_distortion": b["end_to_end_distortion"], "ok": b["ok"],
                         "detail": b})
    table = [{k: v for k, v in r.items() if k != "detail"} for r in rows]
    return {"spaces": rows}, {"all_bounds_hold": ok}, {"spaces": table}


COMMANDS = {
    ("arc", "gen"): arc_gen,
    ("arc", "dist"): arc_dist,
    ("arc", "check"): arc_check,
    ("filtration", "atoms"): filtration_atoms,
    ("mart", "d"): mart_d,
    ("mart", "i"): mart_i,
    ("mart", "roundtrip"): mart_roundtrip,
    ("mart", "witness"): mart_witness,
    ("tree", "gen"): tree_gen,
    ("tree", "debv"): tree_debv,
    ("tree", "decompose"): tree_decompose,
    ("glue", "psi"): glue_psi,
    ("glue", "light"): glue_light,
    ("glue", "embed"): glue_embed,
    ("l1iso", "bench"): l1iso_bench,
}


# ---------------------------------------------------------------- plumbing


def _report_path(cfg: ExperimentConfig) -> Path | None:
    if cfg.report:
        return Path(cfg.report)
    out = os.environ.get(ENV_OUT)
    if out:
        return Path(out) / f"{cfg.group}_{cfg.command}.json"
    return None


def _write_tables(path: Path, tables: dict):
    for name, rows in tables.items():
        if not rows:
            continue
        target = path.with_name(f"{path.stem}_{name}.csv")
        keys = list(rows[0])
        with target.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for r in rows:
                w.writerow({k: _jsonable(r.get(k)) for k in keys})


def run(cfg: ExperimentConfig) -> int:
    key = (cfg.group, cfg.command)
    if key not in COMMANDS:
        print(f"error: unknown command {cfg.group} {cfg.command}", file=sys.stderr)
        return INPUT
    if key in RANDOMIZED and cfg.seed is None:
        print(f"error: {cfg.group} {cfg.command} is randomized and needs --seed", file=sys.stderr)
        return INPUT
    if cfg.arithmetic not in ("exact", "float"):
        print("error: --arithmetic must be exact or float", file=sys.stderr)
        return INPUT
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            results, checks, tables = COMMANDS[key](cfg)
        except (InputError, ParseError, PlanError, ResolutionError, FileNotFoundError, IsADirectoryError,
                MeasurabilityError, MartingaleError, DecompositionError) as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return INPUT
        except (ConsistencyError, AssertionError) as exc:
            results, checks, tables = {"error": str(exc)}, {"consistency": False}, {}
    ok = all(bool(v) for v in checks.values())
    report = {
        "command": f"{cfg.group} {cfg.command}",
        "config": asdict(cfg) | {"timestamp": None},
        "versions": {"qctree": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "results": results,
        "checks": checks,
        "warnings": [str(w.message) for w in caught],
        "ok": ok,
    }
    if cfg.timestamp:
        report["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    path = _report_path(cfg)
    if path is None:
        print(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n")
        _write_tables(path, tables)
        print(f"{'PASS' if ok else 'FAIL'} {cfg.group} {cfg.command} -> {path}")
    return PASS if ok else FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qctree", description="Quasiarc and QC-tree experiments.")
    p.add_argument("--version", action="version", version=f"qctree {__version__}")
    groups = p.add_subparsers(dest="group", required=True)
    layout = {
        "arc": ["gen", "dist", "check"],
        "filtration": ["atoms"],
        "mart": ["d", "i", "roundtrip", "witness"],
        "tree": ["gen", "debv", "decompose"],
        "glue": ["psi", "light", "embed"],
        "l1iso": ["bench"],
    }
    for g, cmds in layout.items():
        gp = groups.add_parser(g)
        sub = gp.add_subparsers(dest="command", required=True)
        for c in cmds:
            cp = sub.add_parser(c)
            cp.add_argument("--seed", type=int)
            cp.add_argument("--resolution", "-K", type=int)
            cp.add_argument("--report")
            cp.add_argument("--no-timestamp", action="store_true")
            cp.add_argument("--tree")
            cp.add_argument("--plan")
            cp.add_argument("--kind")
            cp.add_argument("--trials", type=int, default=10)
            cp.add_argument("--levels")
            cp.add_argument("--arithmetic", default="exact")
            cp.add_argument("--tol", type=float, default=0.0)
            cp.add_argument("--x")
            cp.add_argument("--y")
            cp.add_argument("--depth", type=int)
            cp.add_argument("--arcs", type=int)
            cp.add_argument("--r-grid", dest="r_grid")
            cp.add_argument("--p", type=float)
            cp.add_argument("--sizes")
            cp.add_argument("--n", type=int)
            cp.add_argument("--f", dest="f_file")
            cp.add_argument("--seq")
            cp.add_argument("--out")
    return p


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    opts = {k: getattr(ns, k) for k in ("kind", "x", "y", "depth", "arcs", "r_grid", "p", "sizes", "n", "out")
            if getattr(ns, k) is not None}
    inputs = {k: getattr(ns, k) for k in ("tree", "plan", "seq") if getattr(ns, k)}
    if ns.f_file:
        inputs["f"] = ns.f_file
    return ExperimentConfig(
        group=ns.group, command=ns.command, inputs=inputs, resolution=ns.resolution, levels=ns.levels,
        seed=ns.seed, trials=ns.trials, report=ns.report, arithmetic=ns.arithmetic, tol=ns.tol,
        options=opts, timestamp=not ns.no_timestamp,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT if exc.code else PASS
    return run(config_from_args(ns))


if __name__ == "__main__":
    sys.exit(main())
