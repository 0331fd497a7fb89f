"""``hadamard-eig report|sweep|oracle --config <path> [--out <dir>]``.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures. Diagnostics go to stderr; stdout carries one summary line.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from .deform import SingularDeformationError, affine_family, field_from_config
from .gevp import GevpError
from .hadamard import GammaSolveError, PreconditionError, Tolerances, full_report
from .mesh import (BoundaryTag, MeshFormatError, MeshValidationError, generate_rect_mesh,
                   load_mesh, side_tagger)
from .oracle import fd_first_derivative, fd_second_derivative, mesh_curve
from .rearrange import (GridTooCoarseError, apply_plan, grid_to_csv, mesh_node_evaluator,
                        plan_to_json, sample_curves, transversal_rearrange)

SCHEMA_VERSION = 1
COMMANDS = ("report", "sweep", "oracle")
DEFAULT_OUTPUTS = {
    "report": "report.json",
    "curves": "curves.csv",
    "rearranged": "rearranged.csv",
    "events": "swap_events.json",
    "oracle": "oracle.csv",
}


class ConfigError(ValueError):
    pass


NUMERICAL_ERRORS = (GevpError, GammaSolveError, PreconditionError, SingularDeformationError,
                    GridTooCoarseError, np.linalg.LinAlgError)


def _require(cfg, key, kind=None):
    if key not in cfg:
        raise ConfigError(f"missing field {key!r}")
    val = cfg[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"field {key!r} has the wrong type")
    return val


def build_mesh(spec: dict, base: Path):
    kind = spec.get("kind", "rect")
    if kind == "rect":
        width = float(spec.get("width", 1.0))
        height = float(spec.get("height", 1.0))
        if "sides" in spec:
            tagger = side_tagger(width=width, height=height, **spec["sides"])
        else:
            tagger = BoundaryTag.parse(spec.get("tag", "D"))
        return generate_rect_mesh(int(_require(spec, "nx")), int(_require(spec, "ny")), width, height, tagger)
    if kind == "file":
        path = Path(_require(spec, "path", str))
        if not path.is_absolute():
            path = base / path
        return load_mesh(path.read_text(encoding="utf-8"))
    raise ConfigError(f"unknown mesh kind {kind!r}")


def parse_config(cfg: dict, base: Path) -> dict:
    """Validate the raw JSON and build mesh, family, and tolerances."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    version = cfg.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")
    try:
        mesh = build_mesh(_require(cfg, "mesh", dict), base)
        dspec = _require(cfg, "deformation", dict)
        field = field_from_config(dspec, mesh)
    except (MeshFormatError, MeshValidationError, OSError, KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"mesh/deformation: {exc}") from None
    fam = affine_family(field, dspec.get("eps0"))

    k_max = cfg.get("k_max", 4)
    if not isinstance(k_max, int) or isinstance(k_max, bool) or k_max < 1:
        raise ConfigError(f"field 'k_max' must be an integer >= 1, got {k_max!r}")

    tol_raw = dict(cfg.get("tolerances", {}))
    oracle_first = float(tol_raw.pop("oracle_first", 1e-6))
    oracle_second = float(tol_raw.pop("oracle_second", 1e-4))
    try:
        tol = Tolerances(**{k: float(v) for k, v in tol_raw.items()})
    except TypeError as exc:
        raise ConfigError(f"field 'tolerances': {exc}") from None

    t = float(cfg.get("t", 0.0))
    if not fam.contains(t):
        raise ConfigError(f"field 't' = {t} lies outside the deformation interval {fam.t_range}")

    grid = None
    if "t_grid" in cfg:
        g = cfg["t_grid"]
        if isinstance(g, dict):
            grid = np.linspace(float(g["start"]), float(g["stop"]), int(g["num"]))
        else:
            grid = np.asarray(g, float)
        if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
            raise ConfigError("field 't_grid' must be strictly increasing with at least 2 nodes")
        if not all(fam.contains(x) for x in grid):
            raise ConfigError(f"field 't_grid' leaves the deformation interval {fam.t_range}")

    outputs = dict(DEFAULT_OUTPUTS)
    outputs.update(cfg.get("outputs", {}))
    return dict(mesh=mesh, fam=fam, k_max=k_max, tol=tol, t=t, grid=grid, outputs=outputs,
                oracle_first=oracle_first, oracle_second=oracle_second,
                localize=bool(cfg.get("localize", True)), command=cfg.get("command"))


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def run_report(cfg: dict, out: Path) -> str:
    rep = full_report(cfg["mesh"], cfg["fam"], cfg["t"], cfg["k_max"], cfg["tol"])
    write_atomic(out / cfg["outputs"]["report"], rep.to_json(indent=2) + "\n")
    return f"report: {len(rep.eigenvalues)} eigenvalues in {len(rep.clusters)} clusters"


def run_sweep(cfg: dict, out: Path) -> str:
    if cfg["grid"] is None:
        raise ConfigError("field 't_grid' is required for sweep")
    evaluate = mesh_node_evaluator(cfg["mesh"], cfg["fam"], cfg["k_max"], cfg["tol"])
    grid = sample_curves(evaluate, cfg["grid"])
    tol = cfg["tol"]
    plan = transversal_rearrange(grid, tol.cluster, tol.derivative,
                                 curve=evaluate if cfg["localize"] else None)
    grid = plan.grid
    rearranged = apply_plan(grid, plan)
    write_atomic(out / cfg["outputs"]["curves"], grid_to_csv(grid))
    write_atomic(out / cfg["outputs"]["rearranged"], grid_to_csv(rearranged))
    write_atomic(out / cfg["outputs"]["events"], plan_to_json(plan, indent=2) + "\n")
    return f"sweep: {len(grid.ts)} nodes, {len(plan.swap_events)} swap events"


ORACLE_COLUMNS = ["index", "side", "order", "g_value", "fd_value", "abs_diff", "rel_diff", "pass"]


def oracle_rows(mesh, fam, t, k_max, tol: Tolerances, tol_first: float, tol_second: float) -> list[dict]:
    """Compare G/H derivatives with one-sided Richardson differences."""
    rep = full_report(mesh, fam, t, k_max, tol)
    h0 = tol.fd_h0
    for s in (-1, 1):
        for h in (h0, h0 / 2, h0 / 4):
            if not fam.contains(t + s * h):
                raise ConfigError(f"fd step t{'+-'[s < 0]}{h} leaves the deformation interval {fam.t_range}")
    n = len(rep.eigenvalues)
    curve = mesh_curve(mesh, fam, n, tol.residual)
    cache = {}

    def cached(x):
        if x not in cache:
            cache[x] = curve(x)
        return cache[x]

    rows = []
    sides = (("+", rep.right_first(), rep.right_second()), ("-", rep.left_first(), rep.left_second()))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for j in range(1, min(k_max, n) + 1):
            for side, first, second in sides:
                g1, g2 = first[j - 1], second[j - 1]
                f1 = fd_first_derivative(cached, t, j, h0, side).value
                f2 = fd_second_derivative(cached, t, j, g1, h0, side).value
                for order, g, f, limit in ((1, g1, f1, tol_first), (2, g2, f2, tol_second)):
                    diff = abs(g - f)
                    rel = diff / max(1.0, abs(g))
                    ok = (diff if order == 1 else rel) <= limit
                    rows.append(dict(index=j, side=side, order=order, g_value=g, fd_value=f,
                                     abs_diff=diff, rel_diff=rel, **{"pass": ok}))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ORACLE_COLUMNS)
    for r in rows:
        w.writerow([r["index"], r["side"], r["order"]]
                   + [f"{r[c]:.17g}" for c in ("g_value", "fd_value", "abs_diff", "rel_diff")]
                   + [int(r["pass"])])
    return buf.getvalue()


def run_oracle(cfg: dict, out: Path) -> str:
    rows = oracle_rows(cfg["mesh"], cfg["fam"], cfg["t"], cfg["k_max"], cfg["tol"],
                       cfg["oracle_first"], cfg["oracle_second"])
    write_atomic(out / cfg["outputs"]["oracle"], rows_to_csv(rows))
    passed = sum(r["pass"] for r in rows)
    return f"oracle: {passed}/{len(rows)} comparisons pass"


RUNNERS = {"report": run_report, "sweep": run_sweep, "oracle": run_oracle}


def _thread_limit():
    raw = os.environ.get("HADAMARD_EIG_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"HADAMARD_EIG_THREADS must be an integer, got {raw!r}") from None
    if n <= 0:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hadamard-eig", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--out", type=Path, default=Path("."))
    args = parser.parse_args(argv)

    try:
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        cfg = parse_config(raw, args.config.parent)
        if cfg["command"] not in (None, args.command):
            raise ConfigError(f"field 'command' is {cfg['command']!r} but {args.command!r} was requested")
        with _thread_limit():
            summary = RUNNERS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"hadamard-eig: config error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"hadamard-eig: numerical failure: {exc}", file=sys.stderr)
        return 3
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
