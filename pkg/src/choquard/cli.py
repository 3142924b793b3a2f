"""Command-line driver: ground states, trapped minimizers, sweeps, verification and reports.

Exit codes: 0 success, 1 usage or configuration error, 2 solver failure,
3 verification failure.  All tables are written with rows sorted by key and
floats in shortest round-trip form, so identical inputs give identical bytes.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ChoquardError, ConfigError, ConvergenceError, ResolutionError
from .fields import CartesianGrid, RadialGrid
from .io import fmt, load_minimizer, save_checkpoint, save_minimizer, write_field_csv

log = logging.getLogger("choquard")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3
MODES = ("ground", "trapped", "sweep", "verify", "report")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    mode: str = "ground"
    gammas: tuple = (1.0,)
    a: float = 1.5
    a_units: str = "astar"  # "astar": a is a multiple of a* = ||Q_2||^2; "absolute"
    dim: int = 3
    radial_nodes: int = 4096
    r_max: float = 20.0
    n: int = 64
    half_width: float = 8.0
    derivative: str = "spectral"
    potential: str = "harmonic"
    tol_ground: float = 1e-8
    tol_trapped: float = 1e-8
    max_iter: int = 3000
    warm_start: str = ""
    output: str = "out"
    seed: int = 0
    cache_dir: str = ""
    plots: bool = True
    memory_budget_mb: float = 3000.0

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"run.mode: expected one of {MODES}, got {self.mode!r}")
        if not self.gammas:
            raise ConfigError("run.gammas: empty list")
        for g in self.gammas:
            if not 0.0 < g <= 2.0:
                raise ConfigError(f"run.gammas: {g} is outside (0, 2]")
        if self.a_units not in ("astar", "absolute"):
            raise ConfigError("trapped.a_units: expected 'astar' or 'absolute'")
        if self.a < 0:
            raise ConfigError("trapped.a: must be nonnegative")
        if self.dim < 3:
            raise ConfigError("ground.dim: must be >= 3")
        try:
            RadialGrid(self.dim, self.radial_nodes, self.r_max)
            CartesianGrid.cube(self.n, self.half_width, derivative=self.derivative)
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc
        need = memory_estimate_mb(self.n)
        if need > self.memory_budget_mb:
            raise ConfigError(f"trapped.n: {self.n}^3 needs about {need:.0f} MB, over the budget "
                              f"limits.memory_budget_mb = {self.memory_budget_mb:g}")
        return self

    def results_key(self) -> dict:
        """Fields that influence computed numbers (output and cache locations excluded)."""
        d = asdict(self)
        for k in ("output", "cache_dir", "plots", "memory_budget_mb", "mode"):
            d.pop(k)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.results_key(), sort_keys=True).encode()).hexdigest()

    @property
    def radial_grid(self) -> RadialGrid:
        return RadialGrid(self.dim, self.radial_nodes, self.r_max)

    @property
    def cartesian_grid(self) -> CartesianGrid:
        return CartesianGrid.cube(self.n, self.half_width, derivative=self.derivative)


def memory_estimate_mb(n: int) -> float:
    """Rough peak memory of a trapped solve on an n^3 grid: working arrays plus the padded Riesz FFT."""
    return (40 * 8 * n**3 + 3 * 16 * (2 * n) ** 3) / 2**20


# (section, key) -> (RunConfig field, parser)
_KEYS = {
    ("run", "mode"): ("mode", str),
    ("run", "gammas"): ("gammas", lambda s: tuple(float(v) for v in s.replace(",", " ").split())),
    ("run", "output"): ("output", str),
    ("run", "seed"): ("seed", int),
    ("run", "cache_dir"): ("cache_dir", str),
    ("ground", "dim"): ("dim", int),
    ("ground", "nodes"): ("radial_nodes", int),
    ("ground", "r_max"): ("r_max", float),
    ("ground", "tol"): ("tol_ground", float),
    ("ground", "warm_start"): ("warm_start", str),
    ("trapped", "a"): ("a", float),
    ("trapped", "a_units"): ("a_units", str),
    ("trapped", "potential"): ("potential", str),
    ("trapped", "n"): ("n", int),
    ("trapped", "half_width"): ("half_width", float),
    ("trapped", "derivative"): ("derivative", str),
    ("trapped", "tol"): ("tol_trapped", float),
    ("trapped", "max_iter"): ("max_iter", int),
    ("report", "plots"): ("plots", lambda s: s.strip().lower() in ("1", "yes", "true", "on")),
    ("limits", "memory_budget_mb"): ("memory_budget_mb", float),
}


def _line_of(text: str, section: str, key: str) -> int:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return i
    return 0


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    """Read an INI file; errors name the file, line, section and key."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            line = _line_of(text, section, key)
            if (section, key) not in _KEYS:
                raise ConfigError(f"{path}:{line}: unknown key {section}.{key}")
            name, conv = _KEYS[(section, key)]
            try:
                values[name] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{line}: {section}.{key} = {raw!r}: {exc}") from exc
    try:
        return replace(base or RunConfig(), **values).validate()
    except ConfigError as exc:
        field_name = str(exc).split(":", 1)[0]
        sec_key = field_name.split(".")
        line = _line_of(text, *sec_key) if len(sec_key) == 2 else 0
        raise ConfigError(f"{path}:{line}: {exc}") from exc


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def write_table(path: Path, header: list, rows: list) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(row[h]) for h in header])
    path.write_text(buf.getvalue())


def read_table(path: Path) -> list:
    if not path.exists():
        return []
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def upsert(path: Path, header: list, new_rows: list, key: tuple) -> None:
    """Merge rows into a CSV keyed by ``key``; rows are sorted by key so reruns are byte-identical."""
    rows = {tuple(r[k] for k in key): r for r in read_table(path)}
    for r in new_rows:
        r = {h: _cell(r[h]) for h in header}
        rows[tuple(r[k] for k in key)] = r

    def sort_key(k):
        return tuple((0, float(x), "") if _is_number(x) else (1, 0.0, x) for x in k)

    write_table(path, header, [rows[k] for k in sorted(rows, key=sort_key)])


def _is_number(x: str) -> bool:
    try:
        float(x)
        return True
    except ValueError:
        return False


def _tag(x: float) -> str:
    return fmt(x).replace("-", "m")


GROUND_HEADER = ["gamma", "dim", "nodes", "r_max", "mass", "kinetic", "hartree", "ground_energy",
                 "pohozaev_1", "pohozaev_2", "decay_rate", "boundary_value", "steps", "residual"]
TRAPPED_HEADER = ["gamma", "a", "a_over_astar", "potential", "n", "half_width", "well", "energy", "multiplier",
                  "potential_energy", "kinetic", "hartree", "zbar_x", "zbar_y", "zbar_z", "umax", "tie", "gap",
                  "epsilon", "scale", "residual", "steps", "checkpoint"]
TRAPPED_KEY = ("potential", "a", "n", "half_width", "gamma")
REPORT_HEADER = ["gamma", "a", "mass", "epsilon", "tau", "tilde_e", "energy", "gap", "gap_closed_form",
                 "potential_energy", "beta2", "d2", "dH1", "zbar_x", "zbar_y", "zbar_z", "well", "well_distance",
                 "rho", "q", "multiplier", "mu_eps2"]


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


class _Stages:
    def __init__(self):
        self.times = []

    def __call__(self, name):
        stages = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                stages.times.append({"stage": name, "seconds": round(time.perf_counter() - self.t0, 3)})

        return _Timer()


def _ground_states(cfg: RunConfig, gammas, stages):
    from .groundstate import solve_ground_state

    grid = cfg.radial_grid
    init = None
    if cfg.warm_start:
        init = _load_warm_start(cfg.warm_start)
    sols = {}
    # every gamma starts from the same initial guess, so a row depends only on its own key
    for g in sorted(set(gammas)):
        with stages(f"ground gamma={g}"):
            sols[g] = solve_ground_state(g, grid, init, tol_residual=cfg.tol_ground)
    return sols


def _load_warm_start(path):
    from .io import load_checkpoint, read_field_csv

    p = Path(path)
    if p.suffix == ".csv":
        return read_field_csv(p)
    return load_checkpoint(p)[0]


def _ground_row(sol) -> dict:
    g = sol.grid
    return {
        "gamma": sol.gamma, "dim": g.dim, "nodes": g.n, "r_max": g.r_max, "mass": sol.mass,
        "kinetic": sol.kinetic, "hartree": sol.hartree, "ground_energy": sol.action,
        "pohozaev_1": sol.pohozaev[0], "pohozaev_2": sol.pohozaev[1], "decay_rate": sol.decay_rate,
        "boundary_value": g.boundary_value(sol.values), "steps": sol.steps, "residual": sol.residual,
    }


def run_ground(cfg: RunConfig, out: Path, stages) -> int:
    sols = _ground_states(cfg, cfg.gammas, stages)
    for g, sol in sols.items():
        stem = f"ground_g{_tag(g)}_n{cfg.radial_nodes}"
        write_field_csv(out / f"{stem}.csv", sol.field)
        save_checkpoint(out / f"{stem}.chk", sol.field, {"kind": "ground-state", **_ground_row(sol)})
    upsert(out / "groundstates.csv", GROUND_HEADER, [_ground_row(s) for s in sols.values()],
           ("dim", "nodes", "r_max", "gamma"))
    return EXIT_OK


def _potential(cfg: RunConfig):
    from .potentials import parse_potential

    text = cfg.potential
    if text.startswith("@"):
        text = Path(text[1:]).read_text().strip()
    return parse_potential(text)


def _trapped_runs(cfg: RunConfig, out: Path, stages):
    from .trapped import solve_trapped

    V = _potential(cfg)
    gammas = sorted(set(cfg.gammas))
    if any(g >= 2.0 for g in gammas):
        raise ConfigError("run.gammas: trapped solves need gamma < 2")
    sols = _ground_states(cfg, gammas + [2.0], stages)
    astar = sols[2.0].mass
    a = cfg.a * astar if cfg.a_units == "astar" else cfg.a
    grid = cfg.cartesian_grid
    runs, rows = [], []
    for g in gammas:
        with stages(f"trapped gamma={g}"):
            m = solve_trapped(g, a, V, grid, ground=sols[g], tol=cfg.tol_trapped, max_iter=cfg.max_iter)
        name = f"trapped_g{_tag(g)}_{hashlib.sha256(V.describe().encode()).hexdigest()[:8]}_n{cfg.n}.chk"
        save_minimizer(out / name, m)
        runs.append(m)
        rows.append({
            "gamma": g, "a": a, "a_over_astar": a / astar, "potential": V.describe(), "n": cfg.n,
            "half_width": cfg.half_width, "well": m.well, "energy": m.energy, "multiplier": m.multiplier,
            "potential_energy": m.potential_energy, "kinetic": m.kinetic, "hartree": m.hartree,
            "zbar_x": m.zbar[0], "zbar_y": m.zbar[1], "zbar_z": m.zbar[2], "umax": m.umax, "tie": m.tie,
            "gap": m.gap, "epsilon": m.epsilon, "scale": m.scale, "residual": m.residual, "steps": m.steps,
            "checkpoint": name,
        })
    upsert(out / "trapped.csv", TRAPPED_HEADER, rows, TRAPPED_KEY)
    upsert(out / "groundstates.csv", GROUND_HEADER, [_ground_row(s) for s in sols.values()],
           ("dim", "nodes", "r_max", "gamma"))
    return V, runs


def run_trapped(cfg: RunConfig, out: Path, stages) -> int:
    _trapped_runs(cfg, out, stages)
    return EXIT_OK


def _report(cfg: RunConfig, out: Path, V, runs, stages) -> int:
    from .asymptotics import concentration_report
    from .trapped import reference_ground_state

    with stages("report"):
        Q2 = reference_ground_state(2.0, cfg.radial_nodes, cfg.r_max)
        rep = concentration_report(runs, V, Q2=Q2)
    rows = []
    for r in rep.rows:
        d = asdict(r)
        zx, zy, zz = d.pop("zbar")
        d.update({"zbar_x": zx, "zbar_y": zy, "zbar_z": zz})
        rows.append(d)
    write_table(out / "scaling_report.csv", REPORT_HEADER, rows)
    verdict_rows = [{"check": k, "passed": v} for k, v in sorted(rep.verdicts.items())]
    verdict_rows += [{"check": f"detail:{k}", "passed": v if not isinstance(v, tuple) else " ".join(map(str, v))}
                     for k, v in sorted(rep.details.items())]
    write_table(out / "scaling_verdicts.csv", ["check", "passed"], verdict_rows)
    if cfg.plots:
        from .plots import report_plots

        report_plots(rep.rows, out)
    for k, v in sorted(rep.verdicts.items()):
        print(f"{'PASS' if v else ('SKIP' if v is None else 'FAIL')} {k}")
    return EXIT_OK


def run_sweep(cfg: RunConfig, out: Path, stages) -> int:
    if len(set(cfg.gammas)) < 3:
        raise ConfigError("run.gammas: a sweep needs at least three gamma values")
    V, runs = _trapped_runs(cfg, out, stages)
    return _report(cfg, out, V, runs, stages)


def run_report(cfg: RunConfig, out: Path, stages) -> int:
    from .trapped import reference_ground_state

    V = _potential(cfg)
    astar = reference_ground_state(2.0, cfg.radial_nodes, cfg.r_max).mass
    a = cfg.a * astar if cfg.a_units == "astar" else cfg.a
    table = read_table(out / "trapped.csv")
    if not table:
        raise ConfigError(f"{out / 'trapped.csv'}: no trapped runs to report on")
    chosen = [r for r in table if r["potential"] == V.describe() and int(r["n"]) == cfg.n
              and float(r["half_width"]) == cfg.half_width and math.isclose(float(r["a"]), a, rel_tol=1e-12)
              and float(r["gamma"]) in set(cfg.gammas)]
    if len(chosen) < 3:
        raise ConfigError(f"report: {len(chosen)} matching trapped rows in {out / 'trapped.csv'}; need >= 3")
    runs = [load_minimizer(out / r["checkpoint"], V) for r in chosen]
    return _report(cfg, out, V, runs, stages)


def run_verify(cfg: RunConfig, out: Path, stages) -> int:
    from .verify import run_battery

    with stages("verify"):
        results = run_battery(seed=cfg.seed)
    write_table(out / "verify.csv", ["check", "passed", "value", "threshold"], results)
    failed = [r for r in results if not r["passed"]]
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['check']}: {_cell(r['value'])} (threshold {r['threshold']})")
    return EXIT_VERIFY if failed else EXIT_OK


RUNNERS = {"ground": run_ground, "trapped": run_trapped, "sweep": run_sweep, "verify": run_verify,
           "report": run_report}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg``; writes tables, checkpoints and manifest.json under cfg.output."""
    cfg.validate()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError(f"run.output: {out} is not writable")
    if cfg.cache_dir:
        os.environ["CHOQUARD_CACHE_DIR"] = cfg.cache_dir
    np.random.seed(cfg.seed)
    stages = _Stages()
    status = RUNNERS[cfg.mode](cfg, out, stages)
    manifest = {
        "tool": "choquard",
        "version": __version__,
        "mode": cfg.mode,
        "config": asdict(cfg),
        "config_hash": cfg.digest(),
        "stages": stages.times,
        "status": status,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return status


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _gamma_list(text: str):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="choquard", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--output", "-o", help="output directory")
    p.add_argument("--cache-dir", help="kernel cache directory (default: $CHOQUARD_CACHE_DIR)")
    p.add_argument("--seed", type=int)
    p.add_argument("--verbose", "-v", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="mode", required=True)

    def radial(sp):
        sp.add_argument("--dim", type=int)
        sp.add_argument("--nodes", type=int, dest="radial_nodes")
        sp.add_argument("--r-max", type=float, dest="r_max")
        sp.add_argument("--tol", type=float, dest="tol_ground")

    def trapped(sp):
        sp.add_argument("--a", type=float)
        sp.add_argument("--a-units", choices=("astar", "absolute"))
        sp.add_argument("--potential", help="inline spec, or @file")
        sp.add_argument("--n", type=int, help="nodes per axis of the Cartesian grid")
        sp.add_argument("--half-width", type=float)
        sp.add_argument("--derivative", choices=("spectral", "fd"))
        sp.add_argument("--trapped-tol", type=float, dest="tol_trapped")
        sp.add_argument("--max-iter", type=int)
        radial(sp)

    sp = sub.add_parser("ground", help="radial ground states Q_gamma")
    sp.add_argument("--gamma", type=_gamma_list, dest="gammas", action="extend",
                    help="comma-separated list; may be repeated")
    sp.add_argument("--warm-start", help="checkpoint or CSV of a radial field")
    radial(sp)
    sp = sub.add_parser("trapped", help="mass-constrained minimizers with a trapping potential")
    sp.add_argument("--gamma", type=_gamma_list, dest="gammas", action="extend",
                    help="comma-separated list; may be repeated")
    trapped(sp)
    sp = sub.add_parser("sweep", help="trapped runs over a gamma list plus the concentration report")
    sp.add_argument("--gammas", type=_gamma_list)
    sp.add_argument("--no-plots", action="store_false", dest="plots", default=None)
    trapped(sp)
    sub.add_parser("verify", help="invariant battery on small grids")
    sp = sub.add_parser("report", help="concentration report from trapped.csv and its checkpoints")
    sp.add_argument("--gammas", type=_gamma_list)
    sp.add_argument("--no-plots", action="store_false", dest="plots", default=None)
    trapped(sp)
    return p


def config_from_args(args) -> RunConfig:
    base = RunConfig()
    if args.config:
        base = load_config(args.config)
    names = {f.name for f in fields(RunConfig)}
    over = {k: v for k, v in vars(args).items() if k in names and v is not None}
    if "gammas" in over:
        over["gammas"] = tuple(over["gammas"])
    return replace(base, **over).validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"choquard: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, ResolutionError) as exc:
        print(f"choquard: solver failure in {args.mode}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ChoquardError as exc:
        print(f"choquard: {args.mode} failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
