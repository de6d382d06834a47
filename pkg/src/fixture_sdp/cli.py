"""Command-line front end.

    fixture-sdp gen       write K (Matrix Market), F_g and geometry for a frame spec
    fixture-sdp solve     tune/solve the relaxation, extract and re-evaluate a layout
    fixture-sdp baseline  exhaustive, simulated-annealing or random search
    fixture-sdp bench     solve time against the number of potential locators
    fixture-sdp report    compare the runs found in an output directory

A run is described by a JSON config (``--config``); flags override it.
Exit codes: 0 success, 1 configuration/input error, 2 numerical failure,
3 rank-one certification not achieved.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fe_io
from .baselines import SAConfig, exhaustive_search, random_baseline, simulated_annealing
from .errors import (FixtureError, MissingInputError, RankNotAchievedError,
                     SingularSystemError, SolverFailureError)
from .fe_model import FrameSpec, assemble_system, build_frame_model, edge_nodes, reduce_system
from .formulation import build_problem, solve_relaxation
from .instances import default_prespecified, parse_potential
from .layouts import LayoutEvaluator
from .pipeline import AUTO, run_pipeline

log = logging.getLogger("fixture_sdp")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_RANK = 0, 1, 2, 3


class ConfigError(FixtureError, ValueError):
    """Malformed or inconsistent run configuration."""


def _auto_or_float(text):
    if isinstance(text, str) and text.strip().lower() == AUTO:
        return AUTO
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number or 'auto', got {text!r}") from None


@dataclass
class RunConfig:
    frame: FrameSpec = None
    files: dict = None                     # {"K": path, "F_g": path}
    prespecified: tuple = None
    potential: object = "auto:30"
    n_a: int = 8
    lam: object = AUTO
    mu: object = AUTO
    rel_threshold: float = 1e-3
    eig_ratio_tol: float = 1e-6
    W_nodes: list = None
    seed: int = 0
    out: str = "run"
    rank_fallback: bool = False
    sa: dict = field(default_factory=dict)
    sa_replications: int = 30
    random_samples: int = 100
    bench_sizes: list = field(default_factory=lambda: [12, 18, 24])
    bench_lambda: float = 5.0
    bench_mu: float = 10.0

    KEYS = ("frame", "files", "prespecified", "potential", "n_a", "lambda", "mu",
            "rel_threshold", "eig_ratio_tol", "W_nodes", "seed", "out", "rank_fallback", "sa",
            "sa_replications", "random_samples", "bench_sizes", "bench_lambda", "bench_mu")

    @classmethod
    def from_json(cls, obj, base_dir="."):
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(obj) - set(cls.KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "frame" in obj and "files" in obj:
            raise ConfigError("give either 'frame' or 'files', not both")
        kw = {}
        if "frame" in obj:
            kw["frame"] = FrameSpec.from_json(obj["frame"])
        if "files" in obj:
            files = obj["files"]
            if not isinstance(files, dict) or set(files) != {"K", "F_g"}:
                raise ConfigError("'files' needs exactly the keys 'K' and 'F_g'")
            kw["files"] = {k: str(Path(base_dir) / v) for k, v in files.items()}
        for key in ("prespecified", "potential", "n_a", "rel_threshold", "eig_ratio_tol",
                    "W_nodes", "seed", "out", "rank_fallback", "sa", "sa_replications",
                    "random_samples", "bench_sizes", "bench_lambda", "bench_mu"):
            if key in obj:
                kw[key] = obj[key]
        if "lambda" in obj:
            kw["lam"] = _auto_or_float(obj["lambda"])
        if "mu" in obj:
            kw["mu"] = _auto_or_float(obj["mu"])
        if kw.get("prespecified") is not None:
            kw["prespecified"] = tuple(int(v) for v in kw["prespecified"])
        return cls(**kw)

    def to_json(self):
        out = {
            "potential": self.potential if isinstance(self.potential, str)
            else [int(v) for v in self.potential],
            "n_a": self.n_a, "lambda": self.lam, "mu": self.mu,
            "rel_threshold": self.rel_threshold, "eig_ratio_tol": self.eig_ratio_tol,
            "seed": self.seed, "rank_fallback": self.rank_fallback,
        }
        if self.frame is not None:
            out["frame"] = self.frame.to_json()
        if self.files is not None:
            out["files"] = dict(self.files)
        if self.prespecified is not None:
            out["prespecified"] = list(self.prespecified)
        if self.W_nodes is not None:
            out["W_nodes"] = list(self.W_nodes)
        return out


def load_config(path):
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise MissingInputError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return RunConfig.from_json(obj, base_dir=path.parent)


# ---------------------------------------------------------------------------
# model setup


@dataclass
class Setup:
    system: object
    reduced: object
    prespecified: tuple
    potential: tuple
    model: object = None


def build_setup(cfg, potential=None):
    if cfg.files is not None:
        system = fe_io.load_system(cfg.files["K"], cfg.files["F_g"])
        model = None
        if cfg.prespecified is None:
            raise ConfigError("matrix-file models need explicit 'prespecified' nodes")
        pre = cfg.prespecified
    else:
        model = build_frame_model(cfg.frame or FrameSpec())
        system = assemble_system(model)
        pre = cfg.prespecified or default_prespecified(model)
    for p in pre:
        if not 0 <= p < system.n_nodes:
            raise ConfigError(f"pre-specified node {p} does not exist")
    pot_spec = cfg.potential if potential is None else potential
    if isinstance(pot_spec, str):
        if model is None:
            raise ConfigError("'auto:k' potential sets need a frame model")
        pot = parse_potential(pot_spec, model, pre)
    else:
        pot = tuple(sorted(int(v) for v in pot_spec))
    for p in pot:
        if not 0 <= p < system.n_nodes:
            raise ConfigError(f"potential node {p} does not exist")
    reduced = reduce_system(system, pre)
    return Setup(system=system, reduced=reduced, prespecified=tuple(pre), potential=pot,
                 model=model)


def _out_dir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands


def cmd_gen(cfg):
    spec = cfg.frame or FrameSpec()
    model = build_frame_model(spec)
    system = assemble_system(model)
    out = _out_dir(cfg)
    fe_io.save_system(system, out / "K.mtx", out / "F_g.txt")
    first, last = edge_nodes(model)
    geometry = {
        "spec": spec.to_json(),
        "nodes": model.nodes.tolist(),
        "elements": model.elements[:, :2].tolist(),
        "edges": [first, last],
    }
    _write_json(out / "geometry.json", geometry)
    print(f"N={model.n_nodes} elements={model.elements.shape[0]} -> {out}")
    return EXIT_OK


def cmd_solve(cfg):
    setup = build_setup(cfg)
    problem = build_problem(setup.reduced, setup.potential, cfg.n_a, cfg.W_nodes)
    res = run_pipeline(problem, cfg.lam, cfg.mu, rel_threshold=cfg.rel_threshold,
                       eig_ratio_tol=cfg.eig_ratio_tol,
                       require_rank_one=not cfg.rank_fallback)
    out = _out_dir(cfg)
    payload = res.to_json()
    payload.update({"potential": list(setup.potential), "prespecified": list(setup.prespecified),
                    "n_a": cfg.n_a, "config": cfg.to_json()})
    _write_json(out / "solve.json", payload)
    if res.trace is not None:
        res.trace.to_csv(out / "tuning_trace.csv")
    cert = res.certificate
    print(f"layout={list(res.layout.selected)} delta_sq={res.evaluation.delta_sq:.6g} "
          f"lambda={res.lam:.6g} mu={res.mu:.6g} "
          f"rank_one={cert.is_rank_one if cert is not None else None}")
    return EXIT_OK


def _baseline_rows_sa(setup, cfg, budget):
    ev = LayoutEvaluator(setup.reduced, setup.potential, w_mask=_w_mask(setup, cfg))
    rows = []
    sa_kw = dict(cfg.sa)
    for k in range(int(cfg.sa_replications)):
        conf = SAConfig(**{**sa_kw, "seed": int(cfg.seed) + k, "budget": budget})
        run_ev = ev.fork()
        r = simulated_annealing(setup.reduced, setup.potential, cfg.n_a, config=conf,
                                evaluator=run_ev)
        dsq = run_ev.evaluate_nodes(r.layout.selected, "total_delta_sq")
        mdef = run_ev.evaluate_nodes(r.layout.selected, "max_node_deformation")
        rows.append({"replication": k, "seed": conf.seed, "layout": list(r.layout.selected),
                     "objective": r.objective, "value": r.value, "delta_sq": dsq,
                     "max_node_deformation": mdef, "evaluations": r.n_evaluations})
    return rows


def _w_mask(setup, cfg):
    if cfg.W_nodes is None:
        return None
    return setup.reduced.translational_dofs(sorted(int(v) for v in cfg.W_nodes))


def cmd_baseline(cfg, method, budget=None):
    setup = build_setup(cfg)
    out = _out_dir(cfg)
    t0 = time.perf_counter()
    w_mask = _w_mask(setup, cfg)
    if method == "exhaustive":
        res = exhaustive_search(setup.reduced, setup.potential, cfg.n_a, w_mask)
        res.to_csv(out / "baseline_exhaustive.csv")
        i = int(np.argmin(res.delta_sq))
        summary = {"method": "exhaustive", "layout": list(res.layout.selected),
                   "delta_sq": float(res.delta_sq[i]),
                   "max_node_deformation": float(res.max_node_deformation[i]),
                   "evaluations": res.n_evaluations, "rows": res.n_evaluations}
    elif method == "sa":
        rows = _baseline_rows_sa(setup, cfg, budget)
        _write_rows(out / "baseline_sa.csv", rows)
        best = min(rows, key=lambda r: (r["delta_sq"], r["replication"]))
        summary = {"method": "sa", "layout": best["layout"], "delta_sq": best["delta_sq"],
                   "max_node_deformation": best["max_node_deformation"],
                   "median_delta_sq": float(np.median([r["delta_sq"] for r in rows])),
                   "evaluations": int(sum(r["evaluations"] for r in rows)),
                   "evaluations_per_replication": budget, "rows": len(rows)}
    elif method == "random":
        n = int(budget or cfg.random_samples)
        res = random_baseline(setup.reduced, setup.potential, cfg.n_a, w_mask, n, cfg.seed)
        res.to_csv(out / "baseline_random.csv")
        best_ev = LayoutEvaluator(setup.reduced, setup.potential, w_mask=w_mask)
        summary = {"method": "random", "layout": list(res.layouts[0]),
                   "delta_sq": float(res.values[0]),
                   "max_node_deformation": best_ev.evaluate_nodes(res.layouts[0],
                                                                  "max_node_deformation"),
                   "median_delta_sq": float(np.median(res.values)),
                   "evaluations": n, "rows": n}
    else:
        raise ConfigError(f"unknown baseline method {method!r}")
    summary["seconds"] = time.perf_counter() - t0
    summary["seed"] = cfg.seed
    _write_json(out / f"baseline_{method}.json", summary)
    print(f"{method}: best delta_sq={summary['delta_sq']:.6g} rows={summary['rows']}")
    return EXIT_OK


def _write_rows(path, rows):
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            r = dict(r)
            if isinstance(r.get("layout"), list):
                r["layout"] = " ".join(str(v) for v in r["layout"])
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def bench_rows(cfg, sizes):
    rows = []
    for n_pt in sizes:
        setup = build_setup(cfg, potential=f"auto:{int(n_pt)}")
        n_a = min(cfg.n_a, len(setup.potential))
        problem = build_problem(setup.reduced, setup.potential, n_a, cfg.W_nodes)
        lam = cfg.bench_lambda if cfg.lam == AUTO else cfg.lam
        mu = cfg.bench_mu if cfg.mu == AUTO else cfg.mu
        t0 = time.perf_counter()
        sol = solve_relaxation(problem, lam, mu)
        secs = time.perf_counter() - t0
        rows.append({"n_pt": int(n_pt), "solve_seconds": secs, "iterations": sol.iterations,
                     "psd_side": problem.n_force + 1})
        log.info("bench N_PT=%d: %.3fs, %d iterations", n_pt, secs, sol.iterations)
    return rows


def cmd_bench(cfg, sizes=None):
    sizes = list(sizes or cfg.bench_sizes)
    rows = bench_rows(cfg, sizes)
    out = _out_dir(cfg)
    _write_rows(out / "bench.csv", rows)
    for r in rows:
        print(f"N_PT={r['n_pt']:4d}  side={r['psd_side']:4d}  it={r['iterations']:3d}  "
              f"{r['solve_seconds']:.3f}s")
    return EXIT_OK


REPORT_COLUMNS = ("method", "delta_sq", "max_node_deformation", "evaluations", "seconds",
                  "gap_vs_exhaustive")


def report_rows(run_dir):
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise MissingInputError(f"{run_dir} is not a directory")
    rows = []
    solve = run_dir / "solve.json"
    if solve.exists():
        obj = json.loads(solve.read_text())
        rows.append({"method": "relaxation", "delta_sq": obj["delta_sq"],
                     "max_node_deformation": obj["max_node_deformation"],
                     "evaluations": obj.get("stiffness_solves"),
                     "seconds": obj.get("timings", {}).get("total")})
    for method in ("exhaustive", "sa", "random"):
        p = run_dir / f"baseline_{method}.json"
        if p.exists():
            obj = json.loads(p.read_text())
            rows.append({"method": method, "delta_sq": obj["delta_sq"],
                         "max_node_deformation": obj.get("max_node_deformation"),
                         "evaluations": obj.get("evaluations"), "seconds": obj.get("seconds")})
    if not rows:
        raise MissingInputError(f"no solve.json or baseline_*.json in {run_dir}")
    ref = next((r["delta_sq"] for r in rows if r["method"] == "exhaustive"), None)
    for r in rows:
        r["gap_vs_exhaustive"] = (r["delta_sq"] / ref - 1.0) if ref else None
    return rows


def cmd_report(run_dir):
    rows = report_rows(run_dir)
    _write_rows(Path(run_dir) / "report.csv", rows)
    print("  ".join(f"{c:>22s}" for c in REPORT_COLUMNS))
    for r in rows:
        cells = []
        for c in REPORT_COLUMNS:
            v = r.get(c)
            cells.append(f"{v:>22.6g}" if isinstance(v, float) else f"{str(v):>22s}")
        print("  ".join(cells))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="fixture-sdp", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["gen", "solve", "baseline", "bench", "report"])
    p.add_argument("run_dir", nargs="?", help="run directory (report only; default --out)")
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--method", choices=["sa", "exhaustive", "random"], default="sa")
    p.add_argument("--budget", type=int, help="evaluations per SA replication / random samples")
    p.add_argument("--lambda", dest="lam", help="lasso weight or 'auto'")
    p.add_argument("--mu", help="trace weight or 'auto'")
    p.add_argument("--n-a", type=int, dest="n_a", help="fixture budget")
    p.add_argument("--sizes", help="comma-separated N_PT list for bench")
    p.add_argument("--rank-fallback", action="store_true",
                   help="continue at the pilot mu when rank one is never certified")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _apply_flags(cfg, args):
    kw = {}
    if args.out is not None:
        kw["out"] = args.out
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.lam is not None:
        kw["lam"] = _auto_or_float(args.lam)
    if args.mu is not None:
        kw["mu"] = _auto_or_float(args.mu)
    if args.n_a is not None:
        kw["n_a"] = args.n_a
    if args.rank_fallback:
        kw["rank_fallback"] = True
    return replace(cfg, **kw)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_flags(load_config(args.config), args)
        if args.command == "gen":
            return cmd_gen(cfg)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "baseline":
            return cmd_baseline(cfg, args.method, args.budget)
        if args.command == "bench":
            sizes = None
            if args.sizes:
                try:
                    sizes = [int(v) for v in args.sizes.split(",") if v.strip()]
                except ValueError:
                    raise ConfigError(f"bad --sizes {args.sizes!r}") from None
            return cmd_bench(cfg, sizes)
        return cmd_report(args.run_dir or cfg.out)
    except RankNotAchievedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RANK
    except (SingularSystemError, SolverFailureError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FixtureError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
