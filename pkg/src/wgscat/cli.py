"""Command-line front end.

Subcommands::

    wgscat verify-analytic    point-source accuracy test on a single component
    wgscat smatrix            scattering matrix of a device
    wgscat field              interior field of a device for given incoming modes
    wgscat sweep-merge-error  merged vs monolithic maps over channel lengths
    wgscat bench              run time against discretization size on lattices

Every command writes CSV/JSON files into ``--out`` and exits with status 1
when a threshold it checks is not met (2 for invalid configurations).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry.component import GeometryError, polygon_component
from .geometry.graph import CircuitGraph, chain_graph, lattice_generator, single_component_graph, two_component_template
from .modal import DIRICHLET, NEUMANN, PortSpec, betas
from .pipeline import (
    DEFAULT_TOL,
    analytic_test_component,
    device_field,
    fit_log_slope,
    merge_error,
    run_pipeline,
    scaling_exponent,
    verify_analytic,
)
from .solver import DEFAULT_ETA

log = logging.getLogger("wgscat")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated options shared by all commands (command-specific ones stay in ``options``)."""

    geometry: dict = field(default_factory=dict)
    bc: str = DIRICHLET
    k: float = 1.0
    eta: complex = DEFAULT_ETA
    tol: float = DEFAULT_TOL
    h: float = 1.0
    levels: int | None = None
    seed: int = 0
    out: Path = Path("wgscat-out")
    threads: int | None = None
    options: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.bc not in (DIRICHLET, NEUMANN):
            raise ConfigError(f"bc must be {DIRICHLET!r} or {NEUMANN!r}")
        if not self.k > 0:
            raise ConfigError("k must be positive")
        if not 1e-15 < self.tol < 1e-2:
            raise ConfigError("tolerance must lie in (1e-15, 1e-2)")
        if not self.h > 0:
            raise ConfigError("panel length h must be positive")
        if self.levels is not None and self.levels < 0:
            raise ConfigError("grading levels must be nonnegative")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be at least 1")
        return self


def _parse_eta(text) -> complex:
    if isinstance(text, (list, tuple)):
        return complex(float(text[0]), float(text[1]))
    if isinstance(text, (int, float, complex)):
        return complex(text)
    parts = str(text).split(",")
    try:
        return complex(float(parts[0]), float(parts[1]) if len(parts) > 1 else 0.0)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"cannot parse eta {text!r}; expected 're,im'") from exc


def load_config(args: argparse.Namespace) -> RunConfig:
    """Merge the JSON config file with command-line flags (flags win)."""
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    panels = data.get("panels", {})
    cfg = RunConfig(
        geometry=data.get("geometry", {}),
        bc=data.get("bc", DIRICHLET),
        k=float(data.get("k", 1.0)),
        eta=_parse_eta(data["eta"]) if "eta" in data else DEFAULT_ETA,
        tol=float(data.get("tol", DEFAULT_TOL)),
        h=float(panels.get("h", 1.0)),
        levels=panels.get("levels"),
        seed=int(data.get("seed", 0)),
        out=Path(data.get("out", "wgscat-out")),
        threads=data.get("threads"),
        options={k: v for k, v in data.items()
                 if k not in ("geometry", "bc", "k", "eta", "tol", "panels", "seed", "out", "threads")},
    )
    if os.environ.get("WGSCAT_THREADS"):
        cfg.threads = int(os.environ["WGSCAT_THREADS"])
    for name in ("bc", "seed", "tol", "threads", "out"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, Path(value) if name == "out" else value)
    if args.eta is not None:
        cfg.eta = _parse_eta(args.eta)
    return cfg.validate()


def set_threads(n: int | None) -> None:
    if n is None:
        return
    import numba

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def build_graph(cfg: RunConfig) -> CircuitGraph:
    """Device graph from the ``geometry`` section of the config."""
    geo = cfg.geometry or {"lattice": {}}
    try:
        if "file" in geo:
            return CircuitGraph.from_json(geo["file"], cfg.bc, cfg.k)
        if "lattice" in geo:
            p = dict(geo["lattice"])
            p.setdefault("rows", 6)
            p.setdefault("cols", 3)
            return lattice_generator(seed=cfg.seed, bc=cfg.bc, k=cfg.k, **p)
        if "chain" in geo:
            p = dict(geo["chain"])
            return chain_graph(p.pop("lengths", [10.0]), bc=cfg.bc, k=cfg.k, **p)
        if "template" in geo:
            p = dict(geo["template"])
            return two_component_template(p.pop("L", 4.0), bc=cfg.bc, k=cfg.k, **p)
        if "polygon" in geo:
            p = geo["polygon"]
            comp = polygon_component(p["vertices"], set(p.get("ports", [])), cfg.bc, cfg.k)
            return single_component_graph(comp)
    except TypeError as exc:
        raise ConfigError(f"bad geometry parameters: {exc}") from exc
    raise ConfigError("geometry must give one of: file, lattice, chain, template, polygon")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, default=_json_default)


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(type(obj).__name__)


def _report(ok: bool, message: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {message}")
    return ok


# ---------------------------------------------------------------------------
# commands


def cmd_verify_analytic(cfg: RunConfig) -> int:
    opts = cfg.options
    x0 = np.asarray(opts.get("x0", [40.0, 20.0]), dtype=float)
    threshold = float(opts.get("threshold", 1e-8))
    bcs = opts.get("bcs", [DIRICHLET, NEUMANN])
    grid = int(opts.get("grid", 60))
    ok_all = True
    report = {"x0": x0.tolist(), "threshold": threshold, "runs": []}
    for bc in bcs:
        comp = analytic_test_component(bc, cfg.k)
        if comp.contains(x0[None, :])[0]:
            raise ConfigError("x0 must lie outside the component for the analytic test")
        rep = verify_analytic(comp, x0, cfg.eta, cfg.h, cfg.levels, grid)
        rows = [(p[0], p[1], math.log10(max(e, 1e-300)), int(c)) for p, e, c in zip(rep.points, rep.error,
                                                                                    rep.near_corner)]
        _write_csv(cfg.out / f"analytic_{bc}.csv", ("x", "y", "log10err", "near_corner"), rows)
        ok = _report(rep.passed(threshold),
                     f"verify-analytic {bc}: max error {rep.max_error:.2e} (threshold {threshold:.0e}), "
                     f"n={rep.n}, {rep.seconds:.1f}s")
        ok_all &= ok
        report["runs"].append({"bc": bc, "n": rep.n, "max_error": rep.max_error,
                               "max_error_incl_corners": rep.max_error_all, "seconds": rep.seconds, "passed": ok})
    _write_json(cfg.out / "analytic_report.json", report)
    return EXIT_OK if ok_all else EXIT_FAILED


def cmd_smatrix(cfg: RunConfig) -> int:
    graph = build_graph(cfg)
    graph.to_json(cfg.out / "circuit.json")
    res = run_pipeline(graph, cfg.eta, cfg.tol, cfg.h, cfg.levels)
    res.scattering.to_json(cfg.out / "smatrix.json")
    res.device.to_json(cfg.out / "device_i2i.json")
    per_comp = [{"component": c.index, "n": c.disc.n_nodes, "modes": c.counts, "modes_total": sum(c.counts),
                 "seconds_factorize": c.seconds_factorize, "seconds_i2i": c.seconds_i2i}
                for c in res.components]
    record = res.log_record()
    record["components"] = per_comp
    record["unitarity_deviation"] = res.scattering.unitarity_deviation()
    record["reciprocity_deviation"] = res.scattering.reciprocity_deviation()
    _write_json(cfg.out / "smatrix_log.json", record)
    threshold = float(cfg.options.get("flux_threshold", 1e-8))
    flux = res.scattering.flux_residual()
    s = res.stats()
    print(f"components={s['components']} n_pts={s['n_pts']} mean M~/component={s['modes_per_component_mean']:.1f} "
          f"max M~/channel={s['modes_per_interface_max']} total {res.timings['total']:.1f}s")
    ok = _report(flux <= threshold, f"smatrix: flux residual {flux:.2e} (threshold {threshold:.0e})")
    return EXIT_OK if ok else EXIT_FAILED


def _grid_points(spec: dict, graph: CircuitGraph):
    boxes = np.array([c.polygon().bounds for c in graph.components])
    xmin = spec.get("xmin", boxes[:, 0].min())
    ymin = spec.get("ymin", boxes[:, 1].min())
    xmax = spec.get("xmax", boxes[:, 2].max())
    ymax = spec.get("ymax", boxes[:, 3].max())
    nx, ny = int(spec.get("nx", 100)), int(spec.get("ny", 100))
    if nx < 1 or ny < 1:
        raise ConfigError("grid is empty")
    X, Y = np.meshgrid(np.linspace(xmin, xmax, nx), np.linspace(ymin, ymax, ny))
    return np.c_[X.ravel(), Y.ravel()]


def cmd_field(cfg: RunConfig) -> int:
    graph = build_graph(cfg)
    res = run_pipeline(graph, cfg.eta, cfg.tol, cfg.h, cfg.levels)
    n_prop = res.scattering.S.shape[1]
    cm = cfg.options.get("c_minus", "random")
    if cm == "random":
        rng = np.random.default_rng(cfg.seed)
        c = rng.standard_normal(n_prop) + 1j * rng.standard_normal(n_prop)
    else:
        c = np.array([complex(*v) if isinstance(v, (list, tuple)) else complex(v) for v in cm])
    if c.size != n_prop:
        raise ConfigError(f"c_minus needs {n_prop} entries (propagating external modes)")
    pts = _grid_points(cfg.options.get("grid", {}), graph)
    t = time.perf_counter()
    u = device_field(res, c, pts)
    seconds = time.perf_counter() - t
    rows = [(p[0], p[1], "" if np.isnan(v.real) else v.real, "" if np.isnan(v.real) else v.imag)
            for p, v in zip(pts, u)]
    _write_csv(cfg.out / "field.csv", ("x", "y", "re_u", "im_u"), rows)
    _write_json(cfg.out / "field_log.json", {"c_minus": [[z.real, z.imag] for z in c],
                                             "points": len(pts), "inside": int(np.sum(~np.isnan(u.real))),
                                             "seconds_field": seconds, **res.log_record()})
    print(f"field: {int(np.sum(~np.isnan(u.real)))} interior points of {len(pts)}, {seconds:.1f}s")
    return EXIT_OK


def cmd_sweep_merge_error(cfg: RunConfig) -> int:
    opts = cfg.options
    bcs = opts.get("bcs", [cfg.bc])
    extra = opts.get("M_extra", [0, 4])
    floor = float(opts.get("floor", 1e-11))
    slope_tol = float(opts.get("slope_tolerance", 0.2))
    min_decades = float(opts.get("min_decades", 3.0))
    width = float(opts.get("width", math.pi + 1))
    rows, summary, ok_all = [], [], True
    for bc in bcs:
        spec = PortSpec(width, bc, cfg.k)
        n_prop = int(np.sum(np.abs(betas(spec, 64).imag) == 0))
        for dm in extra:
            M = n_prop + int(dm)
            Ls = opts.get("L", {}).get(str(dm)) if isinstance(opts.get("L"), dict) else opts.get("L")
            if Ls is None:
                kappa = betas(spec, M + 1)[M].imag
                Ls = list(np.round(np.linspace(1.5, 1.5 + 10.0 / kappa, 6), 3))
            errs = []
            for L in Ls:
                e = merge_error(float(L), [M], bc, cfg.eta, cfg.h, cfg.levels, cfg.tol, width)[M]
                errs.append(e)
                rows.append((bc, float(L), M, e))
                log.info("%s L=%.3f M=%d error %.3e", bc, L, M, e)
            kappa = float(betas(spec, M + 1)[M].imag)
            slope, decades, used = fit_log_slope(Ls, errs, floor)
            rel = abs(-slope - kappa) / kappa if math.isfinite(slope) else math.inf
            ok = rel <= slope_tol and decades >= min_decades
            ok_all &= ok
            summary.append({"bc": bc, "M": M, "predicted_slope": -kappa, "fitted_slope": slope,
                            "relative_deviation": rel, "decades": decades, "points": used, "passed": ok})
            _report(ok, f"sweep {bc} M={M}: slope {slope:.3f} vs {-kappa:.3f} ({100 * rel:.1f}%), "
                        f"{decades:.1f} decades")
    _write_csv(cfg.out / "merge_error.csv", ("bc", "L", "M", "error"), rows)
    _write_json(cfg.out / "merge_error_summary.json", summary)
    return EXIT_OK if ok_all else EXIT_FAILED


def cmd_bench(cfg: RunConfig) -> int:
    opts = cfg.options
    nx_list = [int(v) for v in opts.get("nx", [3, 6, 12])]
    rows_ = int(opts.get("rows", 6))
    lattice = dict((cfg.geometry or {}).get("lattice", {}))
    lattice.pop("rows", None)
    lattice.pop("cols", None)
    records = []
    for nx in nx_list:
        g = lattice_generator(rows_, nx, seed=cfg.seed, bc=cfg.bc, k=cfg.k, **lattice)
        t0 = time.perf_counter()
        res = run_pipeline(g, cfg.eta, cfg.tol, cfg.h, cfg.levels)
        wall = time.perf_counter() - t0
        s = res.stats()
        rec = {"nx": nx, "components": s["components"], "n_pts": s["n_pts"], "seconds_total": res.timings["total"],
               "seconds_wall": wall, "flux_residual": res.scattering.flux_residual(),
               **{f"seconds_{k}": v for k, v in res.timings.items() if k != "total"}}
        records.append(rec)
        print(f"bench nx={nx}: {s['components']} components, n_pts={s['n_pts']}, {res.timings['total']:.1f}s "
              f"(sparse solve {res.timings['glue_sparse_solve']:.3f}s)")
    header = list(records[0].keys())
    _write_csv(cfg.out / "bench.csv", header, [[r[h] for h in header] for r in records])
    max_exp = float(opts.get("max_exponent", 1.3))
    max_share = float(opts.get("max_sparse_share", 0.05))
    share = max(r["seconds_glue_sparse_solve"] / r["seconds_total"] for r in records)
    ok = True
    summary = {"sparse_share_max": share, "records": records}
    if len(records) > 1:
        p = scaling_exponent([r["n_pts"] for r in records], [r["seconds_total"] for r in records])
        summary["exponent"] = p
        ok &= _report(p <= max_exp, f"bench: time ~ n_pts^{p:.2f} (limit {max_exp})")
    ok &= _report(share < max_share, f"bench: sparse interface solve share {100 * share:.3f}% (limit "
                                     f"{100 * max_share:.0f}%)")
    _write_json(cfg.out / "bench_summary.json", summary)
    return EXIT_OK if ok else EXIT_FAILED


COMMANDS = {
    "verify-analytic": cmd_verify_analytic,
    "smatrix": cmd_smatrix,
    "field": cmd_field,
    "sweep-merge-error": cmd_sweep_merge_error,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wgscat", description="Scattering in 2D waveguide circuits.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (geometry, physics, solver and command options)")
    common.add_argument("--seed", type=int, help="random seed (lattice generator, random incident data)")
    common.add_argument("--out", help="output directory (created if missing)")
    common.add_argument("--threads", type=int, help="worker threads (overrides WGSCAT_THREADS)")
    common.add_argument("--eta", help="impedance parameter as 're,im' (default -0.2,0)")
    common.add_argument("--tol", type=float, help="mode-truncation tolerance (default 1e-14)")
    common.add_argument("--bc", choices=(DIRICHLET, NEUMANN), help="wall boundary condition")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__ or name.replace("-", " "))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        set_threads(cfg.threads)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except (ConfigError, GeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
