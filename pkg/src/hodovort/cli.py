"""Command-line front end: ``hodovort <subcommand> [options]``.

Every subcommand writes plain CSV/JSON into ``--out`` and prints a one-line
JSON summary. ``--check`` compares results against the reference values of
the built-in examples and exits with status 5 on any violation.

Exit codes: 0 ok, 2 configuration error, 3 empty result, 4 no blowup,
5 check failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import reference as ref
from .core import adjugate
from .errors import EmptyLocus, ExpressionError, HodographError, NoBlowupError
from .field import fd_curl, solve_grid
from .frame import (adapted_frame, fit_spatial_exponent, fold_coefficient, gamma_points,
                    is_generic_point, scan_level_candidates)
from .maps import load_map, parse_map_spec
from .surface import branch_times, domain_labels, double_root_locus, find_catastrophe, sample_surface
from .vorticity import (axial_from_two_form, fit_temporal_exponent, laurent_fit, temporal_blowup_order, vorticity,
                        vorticity_on_grid, vorticity_series)

EXIT_OK, EXIT_CONFIG, EXIT_EMPTY, EXIT_NO_BLOWUP, EXIT_CHECK = 0, 2, 3, 4, 5

COMMANDS = ("surface", "catastrophe", "vorticity", "exponent", "field", "frame")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Option:
    default: object
    type: type
    help: str
    choices: tuple | None = None


GLOBAL_OPTIONS = {
    "map": Option(None, str, "map spec 'name[:key=value,...]' or a JSON map document (path or text)"),
    "out": Option(".", str, "output directory"),
    "workers": Option(None, int, "parallel workers (default: available cores)"),
    "check": Option(False, bool, "assert reference values and exit 5 on violation"),
    "seed": Option(0, int, "seed for random point selection"),
}

_BRANCH = Option(None, str, "piece label of a piecewise map (default: the catastrophe piece, else the first)")
_BOX = Option(None, str, "u box 'lo:hi,lo:hi,...' (default: the map's box)")

COMMAND_OPTIONS = {
    "surface": {
        "grid": Option("200x200", str, "u-grid counts per axis, e.g. 400x400"),
        "box": _BOX,
        "tol_disc": Option(1e-10, float, "relative tolerance for the marginal label D0"),
        "branch": _BRANCH,
    },
    "catastrophe": {
        "grid": Option(200, int, "seeding nodes per axis"),
        "n_seeds": Option(5, int, "number of refined seeds per piece"),
        "xatol": Option(1e-11, float, "Nelder-Mead step tolerance"),
    },
    "vorticity": {
        "u": Option(None, str, "hodograph point 'u1,u2,...' (default: catastrophe point, else box centre)"),
        "times": Option("0:10:101", str, "time samples 'start:stop:count'; values may use 'tc', e.g. 0.999tc"),
        "laurent": Option(False, bool, "fit the Laurent expansion at the blowup time"),
        "t_b": Option(None, str, "blowup time for --laurent (default: catastrophe or smallest positive root)"),
        "snapshots": Option(None, str, "comma-separated times for u-grid snapshots, e.g. 0,0.85tc,0.999tc"),
        "snapshot_grid": Option("101x101", str, "u-grid counts for snapshots"),
        "box": _BOX,
        "branch": _BRANCH,
    },
    "exponent": {
        "mode": Option("temporal", str, "temporal (t -> t_b at fixed u) or spatial (fixed t_b)",
                       ("temporal", "spatial")),
        "scan": Option("generic", str, "point source: generic random points, the double-root locus, "
                       "or level-2 fold points", ("generic", "locus", "level2")),
        "points": Option(None, str, "explicit points 'u1,u2;u1,u2;...' (overrides --scan)"),
        "count": Option(20, int, "number of points"),
        "box": _BOX,
        "branch": _BRANCH,
    },
    "field": {
        "grid": Option("-2:2:41,-2:2:41", str, "x grid 'lo:hi:count,...' (write --grid=-2:2:41,... when it starts with a minus)"),
        "t": Option("0", str, "time; may use 'tc', e.g. 0.999tc"),
        "fd_curl": Option(False, bool, "add a finite-difference vorticity column"),
        "binary": Option(False, bool, "also write field.bin"),
        "mask_gradient": Option(500.0, float, "mask cells where max |du/dx| exceeds this"),
    },
    "frame": {
        "u": Option(None, str, "blowup point 'u1,u2,...' (default: catastrophe point)"),
        "t": Option(None, str, "blowup time (default: smallest positive root at u)"),
        "tol_null": Option(1e-8, float, "relative singular-value threshold for null vectors"),
        "branch": _BRANCH,
    },
}


@dataclass
class RunConfig:
    """Validated settings for one subcommand run."""

    command: str
    map: object
    out: Path
    workers: int
    check: bool
    seed: int
    options: dict = field(default_factory=dict)

    @classmethod
    def build(cls, command, explicit=None, document=None) -> "RunConfig":
        """Merge defaults, a config document and explicit flags (in that order).

        Raises
        ------
        ConfigError
            On unknown keys, wrong value types or invalid choices.
        """
        if command not in COMMANDS:
            raise ConfigError(f"unknown subcommand {command!r}")
        table = {**GLOBAL_OPTIONS, **COMMAND_OPTIONS[command]}
        values = {k: o.default for k, o in table.items()}
        for source in (document or {}, explicit or {}):
            for key, val in source.items():
                key = key.replace("-", "_")
                if key == "command":
                    if val != command:
                        raise ConfigError(f"config is for {val!r}, not {command!r}")
                    continue
                if key not in table:
                    raise ConfigError(f"unknown key {key!r} for {command}")
                values[key] = _validate(key, val, table[key])
        if values["map"] is None:
            raise ConfigError("no map given (use --map or the 'map' config key)")
        workers = values.pop("workers")
        workers = (os.cpu_count() or 1) if workers is None else workers
        if workers < 1:
            raise ConfigError("workers must be positive")
        glob = {k: values.pop(k) for k in ("map", "out", "check", "seed")}
        return cls(command=command, map=glob["map"], out=Path(glob["out"]), workers=int(workers),
                   check=bool(glob["check"]), seed=int(glob["seed"]), options=values)


def _validate(key, val, opt: Option):
    if key == "map" and isinstance(val, dict):
        return val
    if val is None:
        return None
    ok = {bool: lambda v: isinstance(v, bool),
          int: lambda v: isinstance(v, int) and not isinstance(v, bool),
          float: lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
          str: lambda v: isinstance(v, str)}[opt.type](val)
    if not ok:
        raise ConfigError(f"{key} expects {opt.type.__name__}, got {val!r}")
    if opt.choices and val not in opt.choices:
        raise ConfigError(f"{key} must be one of {', '.join(opt.choices)}")
    return float(val) if opt.type is float else val


# ---------------------------------------------------------------------------
# parsing helpers


def _maps(spec):
    try:
        if isinstance(spec, dict):
            return load_map(spec)
        s = spec.strip()
        if s.startswith("{") or s.endswith(".json"):
            return load_map(s)
        return parse_map_spec(s)
    except (ValueError, KeyError, TypeError, OSError, ExpressionError) as exc:
        raise ConfigError(f"bad map {spec!r}: {exc}") from exc


def _vector(text, dim, what="point"):
    try:
        v = np.array([float(p) for p in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad {what} {text!r}") from exc
    if len(v) != dim:
        raise ConfigError(f"{what} {text!r} needs {dim} components")
    return v


def _counts(text, dim):
    try:
        c = [int(p) for p in text.lower().split("x")]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}") from exc
    if len(c) == 1:
        c = c * dim
    if len(c) != dim or min(c) < 2:
        raise ConfigError(f"grid {text!r} needs {dim} counts of at least 2")
    return c


def _box(text, m):
    if text is None:
        return m.box
    try:
        b = np.array([[float(v) for v in part.split(":")] for part in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad box {text!r}") from exc
    if b.shape != (m.dim, 2):
        raise ConfigError(f"box {text!r} needs {m.dim} 'lo:hi' ranges")
    return b


def _axes(text, dim):
    try:
        axes = [tuple(float(v) for v in part.split(":")) for part in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}") from exc
    if len(axes) != dim or any(len(a) != 3 or a[2] < 2 for a in axes):
        raise ConfigError(f"grid {text!r} needs {dim} 'lo:hi:count' ranges")
    return [(a, b, int(c)) for a, b, c in axes]


class _Catastrophe:
    """Lazily computed catastrophe of the run's map."""

    def __init__(self, maps, workers):
        self.maps, self.workers, self._res = maps, workers, None

    def __call__(self):
        if self._res is None:
            self._res = find_catastrophe(self.maps, workers=self.workers)
        return self._res


def _time(text, cat):
    s = text.strip().lower()
    try:
        if s.endswith("tc"):
            coef = s[:-2].rstrip("* ")
            return (float(coef) if coef else 1.0) * cat().t_c
        return float(s)
    except ValueError as exc:
        raise ConfigError(f"bad time {text!r}") from exc


def _time_range(text, cat):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"time range {text!r} must be 'start:stop:count'")
    try:
        count = int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad count in {text!r}") from exc
    return np.linspace(_time(parts[0], cat), _time(parts[1], cat), count)


def _piece(maps, label, cat=None):
    if label is not None:
        for m in maps:
            if (m.branch_label or m.name) == label:
                return m
        raise ConfigError(f"no piece {label!r}; choose from {[m.branch_label or m.name for m in maps]}")
    if len(maps) > 1 and cat is not None:
        try:
            return _piece(maps, cat().branch_id)
        except NoBlowupError:
            pass
    return maps[0]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (str, np.str_)):
        return str(v)
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    return repr(float(v))


def _json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def _u_names(dim):
    return [f"u{i + 1}" for i in range(dim)]


def _omega_names(dim):
    if dim == 2:
        return ["omega"]
    if dim == 3:
        return ["omega1", "omega2", "omega3"]
    return [f"omega{i + 1}{j + 1}" for i in range(dim) for j in range(i + 1, dim)]


class Checks:
    """Collected pass/fail assertions of a ``--check`` run."""

    def __init__(self):
        self.items = []

    def add(self, name, ok, detail=""):
        self.items.append((name, bool(ok), detail))

    @property
    def ok(self):
        return all(ok for _, ok, _ in self.items)

    def report(self, stream=None):
        stream = stream or sys.stdout
        for name, ok, detail in self.items:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=stream)


def _close(a, b, tol):
    return bool(np.all(np.abs(np.asarray(a, float) - np.asarray(b, float)) <= tol))


# ---------------------------------------------------------------------------
# subcommands


def cmd_surface(cfg: RunConfig, checks: Checks):
    o = cfg.options
    maps = _maps(cfg.map)
    m = _piece(maps, o["branch"])
    box = _box(o["box"], m)
    counts = _counts(o["grid"], m.dim)
    axes = [(box[i, 0], box[i, 1], counts[i]) for i in range(m.dim)]
    rows = sample_surface(m, axes)
    files = [cfg.out / "surface.csv"]
    _write_csv(files[0], _u_names(m.dim) + ["t", "multiplicity"],
               [list(r[:-1]) + [int(r[-1])] for r in rows])
    summary = {"rows": len(rows)}
    if m.dim == 2:
        U, disc, lab = domain_labels(m, axes, o["tol_disc"])
        files.append(cfg.out / "domain.csv")
        _write_csv(files[-1], ["u1", "u2", "discriminant", "label"],
                   [[u[0], u[1], d, s] for u, d, s in zip(U, disc, lab)])
        summary["domain_counts"] = {k: int(np.sum(lab == k)) for k in ("D+", "D-", "D0")}
    locus = []
    if m.dim in (2, 3):
        try:
            locus = double_root_locus(m, box=None if o["box"] is None else box, n_points=max(counts))
        except EmptyLocus:
            locus = []
        files.append(cfg.out / "locus.csv")
        _write_csv(files[-1], _u_names(m.dim) + ["t_b"], [list(p.u) + [p.t_b] for p in locus])
        summary["locus_points"] = len(locus)
    if cfg.check:
        _check_surface(m, rows, locus, checks)
    return files, summary, EXIT_EMPTY if len(rows) == 0 else EXIT_OK


def _check_surface(m, rows, locus, checks):
    if m.name == "cubic":
        if locus:
            q = np.array([ref.cubic_quartic(*p.u) for p in locus])
            checks.add("surface.cubic.locus_quartic", np.max(np.abs(q)) <= 1e-5,
                       f"max |quartic| = {np.max(np.abs(q)):.2e} over {len(q)} points")
        else:
            checks.add("surface.cubic.locus_quartic", False, "no locus points")
    elif m.name == "harmonic":
        checks.add("surface.harmonic.no_real_roots", len(rows) == 0, f"{len(rows)} root rows")
    elif m.name == "linear":
        beta = m.params.get("beta", 1.0)
        ok = len(rows) > 0 and _close(rows[:, -2], -beta, 1e-12)
        checks.add("surface.linear.time", ok, f"all {len(rows)} rows at t = {-beta}")
    else:
        checks.add("surface.rows", True, f"{len(rows)} rows; no reference for {m.name}")


def cmd_catastrophe(cfg: RunConfig, checks: Checks):
    o = cfg.options
    maps = _maps(cfg.map)
    res = find_catastrophe(maps, grid=o["grid"], n_seeds=o["n_seeds"], xatol=o["xatol"],
                           workers=cfg.workers)
    path = cfg.out / "catastrophe.json"
    _json(path, res.to_dict())
    if cfg.check:
        _check_catastrophe(maps[0].name, res, checks)
    return [path], {"t_c": res.t_c, "u_c": res.u_c.tolist(), "branch": res.branch_id}, EXIT_OK


def _check_catastrophe(name, res, checks):
    if name == "cubic":
        checks.add("catastrophe.cubic.t_c", abs(res.t_c - ref.CUBIC_CATASTROPHE_T) <= ref.TOL_TIME,
                   f"t_c = {res.t_c:.6f}")
        checks.add("catastrophe.cubic.u_c", _close(np.abs(res.u_c), ref.CUBIC_CATASTROPHE_U, ref.TOL_TIME),
                   f"u_c = {np.round(res.u_c, 6).tolist()}")
    elif name == "gaussian":
        checks.add("catastrophe.gaussian.t_c", abs(res.t_c - ref.GAUSSIAN_CATASTROPHE_T) <= ref.TOL_TIME,
                   f"t_c = {res.t_c:.6f}")
        checks.add("catastrophe.gaussian.u_c", _close(res.u_c, ref.GAUSSIAN_CATASTROPHE_U, ref.TOL_TIME),
                   f"u_c = {np.round(res.u_c, 6).tolist()}")
        checks.add("catastrophe.gaussian.x_c", _close(res.x_c, ref.GAUSSIAN_CATASTROPHE_X, ref.TOL_TIME),
                   f"x_c = {np.round(res.x_c, 6).tolist()}")
        for label, want in ref.GAUSSIAN_BRANCH_MINIMA.items():
            got = res.branch_minima.get(label, np.nan)
            checks.add(f"catastrophe.gaussian.minimum[{label}]", abs(got - want) <= ref.TOL_TIME,
                       f"{got:.6f}")
    else:
        checks.add("catastrophe.found", True, f"t_c = {res.t_c:.6f}; no reference for {name}")


def _default_point(maps, m, text, cat):
    """Point from ``text``, else the catastrophe point (when on this piece), else the box centre."""
    if text is not None:
        return _vector(text, m.dim), False
    try:
        res = cat()
        if res.branch_id == (m.branch_label or m.name):
            return res.u_c, True
    except NoBlowupError:
        pass
    centre = m.box.mean(axis=1)
    if not m.in_domain(centre):
        raise ConfigError("the box centre is outside the domain; pass --u")
    return centre, False


def cmd_vorticity(cfg: RunConfig, checks: Checks):
    o = cfg.options
    maps = _maps(cfg.map)
    cat = _Catastrophe(maps, cfg.workers)
    m = _piece(maps, o["branch"], cat)
    u, at_catastrophe = _default_point(maps, m, o["u"], cat)
    times = _time_range(o["times"], cat)
    rows = vorticity_series(m, u, times)
    files = [cfg.out / "vorticity.csv"]
    _write_csv(files[0], ["t"] + _omega_names(m.dim), rows)
    summary = {"u": list(map(float, u)), "samples": len(rows)}
    fit = None
    if o["laurent"]:
        if o["t_b"] is not None:
            t_b = _time(o["t_b"], cat)
        elif at_catastrophe:
            t_b = cat().t_c
        else:
            pos = branch_times(m, u).positive()
            if not pos:
                raise NoBlowupError(f"no positive blowup time at u = {u}")
            t_b = min(pos)
        fit = laurent_fit(m, u, t_b)
        files.append(cfg.out / "laurent.json")
        _json(files[-1], fit.to_dict())
        summary["laurent"] = {str(k): v for k, v in fit.coefficients.items()}
    if o["snapshots"]:
        box = _box(o["box"], m)
        counts = _counts(o["snapshot_grid"], m.dim)
        lin = [np.linspace(box[i, 0], box[i, 1], counts[i]) for i in range(m.dim)]
        U = np.stack(np.meshgrid(*lin, indexing="ij"), -1).reshape(-1, m.dim)
        snap = []
        for text in o["snapshots"].split(","):
            t = _time(text, cat)
            W = vorticity_on_grid(m, t, U)
            snap.extend([t, *uu, *w] for uu, w in zip(U, W))
        files.append(cfg.out / "snapshots.csv")
        _write_csv(files[-1], ["t"] + _u_names(m.dim) + _omega_names(m.dim), snap)
    if cfg.check:
        _check_vorticity(m, u, np.array(rows), fit, at_catastrophe, checks)
    return files, summary, EXIT_OK


def _check_vorticity(m, u, rows, fit, at_catastrophe, checks):
    t, om = rows[:, 0], rows[:, 1:]
    refv = m.references.get("vorticity")
    done = False
    if refv is not None and m.dim == 2:
        want = np.array([refv(tt, u) for tt in t], dtype=float)
        ok = np.isfinite(om[:, 0]) & np.isfinite(want)
        err = np.abs(om[ok, 0] - want[ok]) / np.maximum(1.0, np.abs(want[ok]))
        checks.add(f"vorticity.{m.name}.closed_form", ok.any() and np.max(err) <= 1e-12,
                   f"max error {np.max(err) if ok.any() else np.nan:.2e} over {int(ok.sum())} samples")
        done = True
    if m.name in ("linear", "zero", "isotropic"):
        checks.add(f"vorticity.{m.name}.zero", np.nanmax(np.abs(om)) == 0.0 if np.isfinite(om).any() else True,
                   f"max |omega| = {np.nanmax(np.abs(om)) if np.isfinite(om).any() else 0.0:.1e}")
        done = True
    if m.name == "gaussian" and fit is not None and at_catastrophe:
        for k, want in ref.GAUSSIAN_LAURENT.items():
            got = fit.coefficients[k]
            checks.add(f"vorticity.gaussian.laurent[{k}]", abs(got - want) <= ref.TOL_LAURENT[k] * abs(want),
                       f"{got:.7g} (reference {want})")
        done = True
    if not done:
        checks.add("vorticity.series", np.isfinite(om).any(), f"no reference for {m.name}")


def _temporal_rows(m, points, workers):
    """One fit per (u, t_b) with the exact pole order as expected slope."""

    def one(p):
        u, t_b = p
        try:
            bs = branch_times(m, u)
            k = int(np.argmin([abs(r - t_b) for r, _ in bs.roots]))
            deg = temporal_blowup_order(m, u)[k].degree
            f = fit_temporal_exponent(m, u, t_b)
            return [*u, f.t_b, deg, f.slope, f.stderr, -float(deg), np.nan, ""]
        except HodographError as exc:
            return [*u, t_b, 0, np.nan, np.nan, np.nan, np.nan, type(exc).__name__]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, points))


def _spatial_rows(m, points, workers):
    def one(p):
        u, t_b, level = p
        try:
            f = fit_spatial_exponent(m, u, t_b)
            return [*u, t_b, level, f.slopes["vorticity"], f.stderr["vorticity"], -level / (level + 1),
                    f.slopes["bounded"], ""]
        except HodographError as exc:
            return [*u, t_b, level, np.nan, np.nan, -level / (level + 1), np.nan, type(exc).__name__]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, points))


def _generic_temporal_points(m, box, count, rng):
    pts, tries = [], 0
    while len(pts) < count and tries < 2000 * count:
        tries += 1
        u = box[:, 0] + rng.random(m.dim) * (box[:, 1] - box[:, 0])
        if not m.in_domain(u):
            continue
        bs = branch_times(m, u)
        roots = bs.roots
        if not roots or any(k > 1 for _, k in roots):
            continue
        k = int(rng.integers(len(roots)))
        t_b = roots[k][0]
        gaps = [abs(r - t_b) for j, (r, _) in enumerate(roots) if j != k]
        if gaps and min(gaps) < 0.1 * max(1.0, abs(t_b)):
            continue
        if temporal_blowup_order(m, u)[k].degree != 1:
            continue
        A = np.abs(vorticity_numerator_scale(m, u, t_b))
        if A < 0.05:
            continue
        pts.append((u, t_b))
    return pts


def vorticity_numerator_scale(m, u, t_b):
    """Antisymmetric part of ``adj M`` relative to its size, at ``(t_b, u)``."""
    A = adjugate(t_b * np.eye(m.dim) + m.jac(u))
    return float(np.max(np.abs(A - A.T)) / max(1.0, float(np.max(np.abs(A)))))


def _spread(seq, count):
    if len(seq) <= count:
        return list(seq)
    idx = np.linspace(0, len(seq) - 1, count).round().astype(int)
    return [seq[i] for i in idx]


def cmd_exponent(cfg: RunConfig, checks: Checks):
    o = cfg.options
    maps = _maps(cfg.map)
    m = _piece(maps, o["branch"], _Catastrophe(maps, cfg.workers))
    box = _box(o["box"], m)
    rng = np.random.default_rng(cfg.seed)
    count, spatial = o["count"], o["mode"] == "spatial"
    if o["points"]:
        pts = []
        for text in o["points"].split(";"):
            u = _vector(text, m.dim)
            for t_b, _ in branch_times(m, u).roots:
                pts.append((u, t_b, 1) if spatial else (u, t_b))
    elif o["scan"] == "generic":
        if spatial:
            pool = gamma_points(m, 20 * count, rng, box=box)
            pts = [(u, t, 1) for u, t, _ in pool if is_generic_point(m, u, t)][:count]
        else:
            pts = _generic_temporal_points(m, box, count, rng)
    elif o["scan"] == "locus":
        try:
            locus = double_root_locus(m, box=None if o["box"] is None else box)
        except EmptyLocus:
            locus = []
        pts = [(p.u, p.t_b, 1) if spatial else (p.u, p.t_b) for p in _spread(locus, count)]
    else:
        cands = [c for c in scan_level_candidates(m, box=box)
                 if abs(fold_coefficient(m, c.u, c.t_b)) < 1e-8
                 and vorticity_numerator_scale(m, c.u, c.t_b) >= 0.05]
        pts = [(c.u, c.t_b, 2) if spatial else (c.u, c.t_b) for c in _spread(cands, count)]
    if not pts:
        raise EmptyLocus("no points to fit")
    rows = _spatial_rows(m, pts, cfg.workers) if spatial else _temporal_rows(m, pts, cfg.workers)
    path = cfg.out / "exponents.csv"
    _write_csv(path, _u_names(m.dim) + ["t_b", "level", "slope", "stderr", "expected", "bounded_slope", "error"],
               rows)
    arr = np.array([r[m.dim + 2] for r in rows], float)
    summary = {"mode": o["mode"], "points": len(rows), "failed": int(np.sum(~np.isfinite(arr))),
               "mean_slope": float(np.nanmean(arr)) if np.isfinite(arr).any() else None}
    if cfg.check:
        _check_exponent(m, rows, spatial, checks)
    return [path], summary, EXIT_OK


def _check_exponent(m, rows, spatial, checks):
    n = m.dim
    for i, r in enumerate(rows):
        level, slope, expected, bounded = r[n + 1], r[n + 2], r[n + 4], r[n + 5]
        label = f"exponent.{'spatial' if spatial else 'temporal'}[{i}]"
        if spatial:
            tol = ref.TOL_SPATIAL if level == 1 else 2 * ref.TOL_SPATIAL
            ok = np.isfinite(slope) and abs(slope - expected) <= tol and bounded >= ref.TOL_BOUNDED
            checks.add(label, ok, f"slope {slope:.4f} (expected {expected:.4f}), bounded {bounded:.4f}")
        else:
            tol = ref.TOL_TEMPORAL.get(int(level), 0.1)
            ok = np.isfinite(slope) and level > 0 and abs(slope - expected) <= tol
            checks.add(label, ok, f"slope {slope:.4f} (expected {expected:.4f})" + (f" {r[-1]}" if r[-1] else ""))


def _components(W):
    n = W.shape[0]
    if n == 2:
        return [W[0, 1]]
    if n == 3:
        return axial_from_two_form(W)
    return W[np.triu_indices(n, 1)]


def cmd_field(cfg: RunConfig, checks: Checks):
    o = cfg.options
    maps = _maps(cfg.map)
    cat = _Catastrophe(maps, cfg.workers)
    axes = _axes(o["grid"], maps[0].dim)
    t = _time(o["t"], cat)
    grid = solve_grid(maps if len(maps) > 1 else maps[0], axes, t, workers=cfg.workers,
                      mask_gradient=o["mask_gradient"])
    pieces = {(p.branch_label or ""): p for p in maps}
    n = maps[0].dim
    flat_u = grid.u.reshape(-1, n)
    flat_b = grid.branch.reshape(-1)
    flat_k = grid.mask.reshape(-1)
    k = len(_omega_names(n))
    omega = np.full((len(flat_u), k), np.nan)
    for i in np.flatnonzero(~flat_k):
        try:
            omega[i] = _components(vorticity(pieces.get(flat_b[i], maps[0]), t, flat_u[i]).omega)
        except HodographError:
            pass
    extra = {"omega": omega}
    if o["fd_curl"]:
        X = grid.points().reshape(-1, n)
        fd = np.full((len(X), k), np.nan)
        for i in np.flatnonzero(~flat_k):
            try:
                fd[i] = _components(fd_curl(maps if len(maps) > 1 else maps[0], X[i], t))
            except HodographError:
                pass
        extra["omega_fd"] = fd
    files = [cfg.out / "field.csv"]
    grid.write_csv(files[0], extra=extra)
    if o["binary"]:
        files.append(cfg.out / "field.bin")
        grid.write_binary(files[-1])
    summary = {"t": t, "cells": int(grid.mask.size), "masked": int(grid.mask.sum())}
    if cfg.check:
        _check_field(maps, grid, t, cat, checks)
    return files, summary, EXIT_OK


def _check_field(maps, grid, t, cat, checks):
    m = maps[0]
    X = grid.points().reshape(-1, m.dim)
    U = grid.u.reshape(-1, m.dim)
    ok = ~grid.mask.reshape(-1)
    checks.add("field.solved", ok.any(), f"{int(ok.sum())} of {ok.size} cells solved")
    if t == 0 and m.initial_data is not None:
        err = np.max(np.abs(U[ok] - m.initial_data(X[ok]))) if ok.any() else np.inf
        checks.add(f"field.{m.name}.initial_data", err <= 1e-8, f"max error {err:.2e}")
    sol = m.references.get("solution")
    if sol is not None:
        err = np.max(np.abs(U[ok] - sol(X[ok], t))) if ok.any() else np.inf
        checks.add(f"field.{m.name}.closed_form", err <= 1e-8, f"max error {err:.2e}")
    if m.name == "gaussian":
        try:
            res = cat()
        except NoBlowupError:
            return
        if t >= 0.99 * res.t_c:
            masked = X[~ok]
            d = np.linalg.norm(masked - np.asarray(ref.GAUSSIAN_CATASTROPHE_X), axis=-1)
            good = len(masked) > 0 and np.max(d) <= 0.05
            checks.add("field.gaussian.mask_near_catastrophe", good,
                       f"{len(masked)} masked cells, max distance {np.max(d) if len(d) else np.nan:.3f}")


def cmd_frame(cfg: RunConfig, checks: Checks):
    o = cfg.options
    maps = _maps(cfg.map)
    cat = _Catastrophe(maps, cfg.workers)
    m = _piece(maps, o["branch"], cat)
    if o["u"] is None:
        res = cat()
        u, t_b = res.u_c, res.t_c
    else:
        u = _vector(o["u"], m.dim)
        if o["t"] is not None:
            t_b = _time(o["t"], cat)
        else:
            pos = branch_times(m, u).positive()
            if not pos:
                raise NoBlowupError(f"no positive blowup time at u = {u}")
            t_b = min(pos)
    fr = adapted_frame(m, u, t_b, o["tol_null"])
    doc = fr.to_dict()
    doc["completeness_defect"] = fr.completeness_defect()
    doc["fold_coefficient"] = fold_coefficient(m, u, t_b, fr) if fr.rank == m.dim - 1 else None
    path = cfg.out / "frame.json"
    _json(path, doc)
    if cfg.check:
        M = t_b * np.eye(m.dim) + m.jac(u)
        scale = max(1.0, float(np.linalg.norm(M)))
        checks.add("frame.completeness", doc["completeness_defect"] <= 1e-12,
                   f"defect {doc['completeness_defect']:.2e}")
        right = float(np.max(np.abs(M @ fr.R.T)))
        left = float(np.max(np.abs(fr.L @ M)))
        checks.add("frame.null_vectors", max(right, left) <= 1e-8 * scale,
                   f"|M R| = {right:.2e}, |L M| = {left:.2e}")
    return [path], {"t_b": float(t_b), "rank": fr.rank, "fold_coefficient": doc["fold_coefficient"]}, EXIT_OK


HANDLERS = {"surface": cmd_surface, "catastrophe": cmd_catastrophe, "vorticity": cmd_vorticity,
            "exponent": cmd_exponent, "field": cmd_field, "frame": cmd_frame}


# ---------------------------------------------------------------------------
# entry point


def _add_option(p, key, opt: Option):
    flag = "--" + key.replace("_", "-")
    text = opt.help
    if opt.default is not None and opt.type is not bool and "(default" not in text:
        text += f" (default: {opt.default})"
    if opt.type is bool:
        p.add_argument(flag, dest=key, action="store_true", default=argparse.SUPPRESS, help=text)
    else:
        p.add_argument(flag, dest=key, type=opt.type, choices=opt.choices, default=argparse.SUPPRESS,
                       help=text)


SUMMARIES = {
    "surface": "sample blowup times and classify the hodograph domain",
    "catastrophe": "locate the earliest positive blowup time",
    "vorticity": "vorticity along t at fixed u, Laurent fit and snapshots",
    "exponent": "temporal or spatial blowup exponents by log-log fits",
    "field": "invert the hodograph relation on an x grid",
    "frame": "null vectors and adapted frame at a blowup point",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="hodovort", description="Hodograph analysis of blowup and vorticity.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON file of option values (flags override it)")
    for key, opt in GLOBAL_OPTIONS.items():
        _add_option(common, key, opt)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=SUMMARIES[name], description=SUMMARIES[name])
        for key, opt in COMMAND_OPTIONS[name].items():
            _add_option(p, key, opt)
    return parser


def run(cfg: RunConfig, stream=None) -> int:
    """Execute a validated configuration; returns the exit code."""
    stream = stream or sys.stdout
    cfg.out.mkdir(parents=True, exist_ok=True)
    checks = Checks()
    try:
        with np.errstate(all="ignore"):
            files, summary, code = HANDLERS[cfg.command](cfg, checks)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoBlowupError as exc:
        print(f"no blowup: {exc}", file=sys.stderr)
        return EXIT_NO_BLOWUP
    except EmptyLocus as exc:
        print(f"empty result: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except HodographError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    if cfg.check:
        checks.report(stream)
        if not checks.ok:
            code = EXIT_CHECK
    print(json.dumps({"command": cfg.command, "exit": code, "files": [str(f) for f in files], **summary},
                     default=_jsonable), file=stream)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    explicit = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        document = None
        if args.config:
            with open(args.config) as fh:
                document = json.load(fh)
            if not isinstance(document, dict):
                raise ConfigError("config file must hold a JSON object")
        cfg = RunConfig.build(args.command, explicit, document)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
