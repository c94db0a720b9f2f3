"""Command line entry point: ``chaincontrol run ...`` and ``chaincontrol scenario ...``."""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .compactification import conjugacy_residual
from .engine import (
    DomainSpec,
    JumpSpec,
    build_covering,
    central_sets,
    chain_control_sets,
    classify_antipodal,
    projective_quotient,
    strong_chain_ladder,
)
from .engine.graph import DEFAULT_ENGINE_STEP, DEFAULT_SEED, graph_from_samples, sample_flow
from .engine.jumps import WEIGHTS
from .errors import BudgetError, ChainControlError, ConfigError, InputError
from .export import DEFAULT_MAX_EDGES, write_chain_sets, write_graph, write_json, write_plot_files
from .scenarios import SCENARIOS, get_scenario
from .systems import AffineSystem, ControlSignal, load_system, monodromy

PIPELINES = ("euclidean", "sphere", "hemisphere", "projective", "strong-ladder", "monodromy", "conjugacy")
LADDER_DOMAINS = ("euclidean", "sphere", "hemisphere")

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_DIVERGENCE = 4

DEFAULTS = {
    "depth": 6,
    "T": 1.0,
    "samples_per_box": None,
    "controls": None,
    "step": DEFAULT_ENGINE_STEP,
    "hemisphere_sign": 1,
    "closed": True,
    "weight": "unit",
    "domain": "euclidean",
    "inflation": 1.0,
    "tau": 1.0,
    "u": None,
    "samples": 100,
    "t_max": 5.0,
    "box": 3.0,
}


class Diverged(Exception):
    """More than half of the graph's edges lead to the sink."""


@dataclass
class RunConfig:
    pipeline: str
    scenario: str | None = None
    system_file: str | None = None
    out: str = "out"
    depth: int | None = None
    T: float | None = None
    eps: float | None = None
    delta_ladder: list[float] | None = None
    weight: str | None = None
    controls: int | None = None
    samples_per_box: int | None = None
    step: float | None = None
    threads: int = 1
    hemisphere_sign: int | None = None
    closed: bool | None = None
    seed: int = DEFAULT_SEED
    max_graph_edges: int = DEFAULT_MAX_EDGES
    window: list[float] | None = None
    domain: str | None = None
    inflation: float | None = None
    u: list[float] | None = None
    tau: float | None = None
    samples: int | None = None
    t_max: float | None = None
    box: float | None = None
    resolved: dict = field(default_factory=dict)

    def param(self, name: str):
        return self.resolved[name]


def _recommended(scenario, pipeline: str) -> dict:
    if scenario is None:
        return {}
    rec = dict(scenario.recommended.get(pipeline.replace("-", "_"), {}))
    if "step" in scenario.recommended:
        rec.setdefault("step", scenario.recommended["step"])
    return rec


def resolve(cfg: RunConfig, scenario) -> RunConfig:
    """Fill unset fields from the scenario's recommendation, then from defaults."""
    if cfg.pipeline not in PIPELINES:
        raise ConfigError(f"unknown pipeline {cfg.pipeline!r}")
    rec = _recommended(scenario, cfg.pipeline)
    out = {}
    for name in ("depth", "T", "eps", "delta_ladder", "weight", "controls", "samples_per_box", "step",
                 "hemisphere_sign", "closed", "domain", "inflation", "u", "tau", "samples", "t_max", "box"):
        given = getattr(cfg, name)
        if given is not None:
            out[name] = given
        elif name in rec:
            out[name] = rec[name]
        elif name == "hemisphere_sign" and "sign" in rec:
            out[name] = rec["sign"]
        else:
            out[name] = DEFAULTS.get(name)
    if cfg.pipeline not in ("monodromy", "conjugacy"):
        if cfg.pipeline == "strong-ladder":
            if out["delta_ladder"] is None:
                raise ConfigError("strong-ladder needs --delta-ladder")
            if cfg.eps is not None:
                raise ConfigError("--eps and --delta-ladder are exclusive")
            out["eps"] = None
            if out["domain"] not in LADDER_DOMAINS:
                raise ConfigError(f"ladder domain must be one of {', '.join(LADDER_DOMAINS)}")
        else:
            if cfg.delta_ladder is not None:
                raise ConfigError("--delta-ladder belongs to the strong-ladder pipeline")
            if out["eps"] is None:
                raise ConfigError(f"pipeline {cfg.pipeline} needs --eps")
            out["delta_ladder"] = None
        for name in ("depth", "samples_per_box", "controls"):
            if out[name] is not None and int(out[name]) != out[name]:
                raise ConfigError(f"{name} must be an integer")
        if int(out["depth"]) < 0:
            raise ConfigError("depth must be non-negative")
        if not out["T"] > 0:
            raise ConfigError("T must be positive")
    if not out["step"] > 0:
        raise ConfigError("step must be positive")
    if out["hemisphere_sign"] not in (1, -1):
        raise ConfigError("hemisphere sign must be +1 or -1")
    if cfg.threads < 1:
        raise ConfigError("threads must be positive")
    cfg.resolved = out
    return cfg


def load_source(cfg: RunConfig):
    """``(system, scenario or None)`` from ``--scenario`` or ``--system-file``."""
    if (cfg.scenario is None) == (cfg.system_file is None):
        raise ConfigError("give exactly one of --scenario and --system-file")
    if cfg.scenario is not None:
        sc = get_scenario(cfg.scenario)
        return sc.system, sc
    path = Path(cfg.system_file)
    if not path.is_file():
        raise ConfigError(f"system file not found: {path}")
    try:
        return load_system(path), None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot read system file {path}: {exc}") from exc


def _window(cfg: RunConfig, sys_: AffineSystem, scenario) -> np.ndarray:
    if cfg.window is not None:
        w = np.asarray(cfg.window, dtype=np.float64)
        if w.size != 2 * sys_.n:
            raise ConfigError(f"--window needs {2 * sys_.n} numbers (lo hi per axis)")
        return w.reshape(sys_.n, 2)
    if scenario is None:
        raise ConfigError("a euclidean window is required for system files (--window)")
    return scenario.window_bounds


def _controls(cfg: RunConfig, sys_: AffineSystem):
    c = cfg.param("controls")
    return None if c is None else sys_.omega.grid_samples(int(c))


def _domain(cfg: RunConfig, kind: str, sys_: AffineSystem, scenario) -> DomainSpec:
    if kind == "euclidean":
        return DomainSpec.window(_window(cfg, sys_, scenario))
    if kind == "sphere":
        return DomainSpec.sphere(sys_.n)
    return DomainSpec.hemisphere(sys_.n, int(cfg.param("hemisphere_sign")), bool(cfg.param("closed")))


def _flow(cfg: RunConfig, cov, sys_):
    spb = cfg.param("samples_per_box")
    return sample_flow(
        cov, sys_, float(cfg.param("T")), _controls(cfg, sys_),
        None if spb is None else int(spb), float(cfg.param("step")), cfg.seed, cfg.threads,
    )


def _graph_stats(graph) -> dict:
    total = graph.edge_count()
    res = graph.scc()
    sink = int(np.count_nonzero(res.to_sink[:graph.node_count] & graph.active))
    return {
        "nodes": int(np.count_nonzero(graph.active)),
        "edges": total,
        "sink_edges": sink,
        "sink_edge_fraction": sink / total if total else 0.0,
        "escape_fraction": graph.samples.escape_fraction,
        "scc_count": int(res.count),
    }


def _export_sets(out: Path, graph, sets, cfg: RunConfig, graph_path: str = "graph.json") -> dict:
    write_graph(out / graph_path, graph, cfg.max_graph_edges)
    write_chain_sets(out / "chain_sets.csv", graph.covering, sets)
    write_plot_files(out / "plots", graph.covering, sets)
    return _graph_stats(graph)


def _set_pipeline(cfg: RunConfig, sys_, scenario, out: Path) -> dict:
    kind = cfg.pipeline
    domain_kind = "sphere" if kind == "projective" else kind
    cov = build_covering(_domain(cfg, domain_kind, sys_, scenario), int(cfg.param("depth")))
    samples = _flow(cfg, cov, sys_)
    jump = JumpSpec.constant(float(cfg.param("eps")), float(cfg.param("inflation")))
    graph = graph_from_samples(cov, samples, jump)
    report = {"boxes": len(cov), "max_box_diameter": cov.max_diameter}
    if kind == "projective":
        graph = projective_quotient(graph)
        sets = chain_control_sets(graph)
        central = central_sets(graph)
        report["central_scc_count"] = len(central)
        report["central_set_ids"] = [s.set_id for s in central]
    else:
        sets = chain_control_sets(graph)
        if kind == "sphere":
            sets = classify_antipodal(graph, sets)
    report["graph"] = _export_sets(out, graph, sets, cfg)
    report["chain_set_count"] = len(sets)
    report["chain_sets"] = [s.to_dict() for s in sets]
    return report


def _ladder_pipeline(cfg: RunConfig, sys_, scenario, out: Path) -> dict:
    cov = build_covering(_domain(cfg, cfg.param("domain"), sys_, scenario), int(cfg.param("depth")))
    samples = _flow(cfg, cov, sys_)
    weight = cfg.param("weight")
    if weight not in WEIGHTS:
        raise ConfigError(f"unknown weight {weight!r}; choose from {', '.join(WEIGHTS)}")
    lad = strong_chain_ladder(
        cov, sys_, float(cfg.param("T")), weight, cfg.param("delta_ladder"),
        step=float(cfg.param("step")), seed=cfg.seed, samples=samples,
        inflation=float(cfg.param("inflation")),
    )
    stats = _export_sets(out, lad.graphs[-1], lad.survivors, cfg)
    return {
        "boxes": len(cov),
        "max_box_diameter": cov.max_diameter,
        "deltas": list(lad.deltas),
        "weight": lad.weight,
        "stabilized": lad.stabilized,
        "components_per_level": [len(lv) for lv in lad.levels],
        "non_strong": [{"delta": d, "size": int(b.size)} for d, b in lad.non_strong],
        "survivor_count": len(lad.survivors),
        "chain_sets": [s.to_dict() for s in lad.survivors],
        "graph": stats,
    }


def _complex_list(z) -> list:
    return [[float(np.real(v)), float(np.imag(v))] for v in np.asarray(z).reshape(-1)]


def _monodromy_pipeline(cfg: RunConfig, sys_) -> dict:
    u = cfg.param("u")
    u = np.zeros(sys_.m) if u is None else np.asarray(u, dtype=np.float64)
    tau = float(cfg.param("tau"))
    rep = monodromy(sys_, ControlSignal.constant(u, sys_.omega), tau, float(cfg.param("step")))
    return {
        "u": u.tolist(),
        "tau": tau,
        "matrix": rep.matrix.tolist(),
        "eigenvalues": _complex_list(rep.eigenvalues),
        "has_unit_eigenvalue": rep.has_unit_eigenvalue,
        "unit_eigvec": None if rep.unit_eigvec is None else rep.unit_eigvec.tolist(),
    }


def _conjugacy_pipeline(cfg: RunConfig, sys_) -> dict:
    rng = np.random.default_rng(cfg.seed)
    count = int(cfg.param("samples"))
    box = float(cfg.param("box"))
    t_max = float(cfg.param("t_max"))
    step = float(cfg.param("step"))
    res = []
    for _ in range(count):
        x = rng.uniform(-box, box, sys_.n)
        u = rng.uniform(sys_.omega.lower, sys_.omega.upper) if sys_.m else np.zeros(0)
        t = rng.uniform(0.0, t_max)
        res.append(conjugacy_residual(sys_, x, ControlSignal.constant(u, sys_.omega), t, step))
    r = np.array(res)
    return {"samples": count, "box": box, "t_max": t_max, "max_residual": float(r.max()),
            "mean_residual": float(r.mean())}


def _summary(cfg: RunConfig, report: dict, wall: float) -> str:
    lines = [f"chaincontrol {__version__}: pipeline {cfg.pipeline}",
             f"source: {cfg.scenario or cfg.system_file}", f"wall time: {wall:.2f} s"]
    for key in ("boxes", "chain_set_count", "central_scc_count", "survivor_count", "stabilized",
                "has_unit_eigenvalue", "max_residual"):
        if key in report:
            lines.append(f"{key}: {report[key]}")
    if "graph" in report:
        g = report["graph"]
        lines.append(f"graph: {g['nodes']} nodes, {g['edges']} edges, {g['sink_edges']} to sink")
    for s in report.get("chain_sets", [])[:20]:
        lines.append(f"  set {s['set_id']}: {s['size']} boxes, {s['classification']}")
    lines.append("all sets are sampled approximations")
    return "\n".join(lines) + "\n"


def run(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    sys_, scenario = load_source(cfg)
    resolve(cfg, scenario)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.pipeline == "monodromy":
        report = _monodromy_pipeline(cfg, sys_)
    elif cfg.pipeline == "conjugacy":
        report = _conjugacy_pipeline(cfg, sys_)
    elif cfg.pipeline == "strong-ladder":
        report = _ladder_pipeline(cfg, sys_, scenario, out)
    else:
        report = _set_pipeline(cfg, sys_, scenario, out)
    report = {"pipeline": cfg.pipeline, "approximation": True, **report}
    wall = time.perf_counter() - t0
    write_json(out / "report.json", report)
    manifest = {
        "version": __version__,
        "config": {k: v for k, v in asdict(cfg).items() if k != "resolved"},
        "resolved": cfg.resolved,
        "seed": cfg.seed,
        "system": sys_.to_dict(),
        "wall_time_s": wall,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    write_json(out / "manifest.json", manifest)
    (out / "summary.txt").write_text(_summary(cfg, report, wall), encoding="utf-8")
    frac = report.get("graph", {}).get("sink_edge_fraction", 0.0)
    if frac > 0.5:
        raise Diverged(f"{frac:.1%} of edges lead to the sink")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _diagnostic("config", message)
        raise SystemExit(EXIT_CONFIG)


def _diagnostic(kind: str, message: str, **extra) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chaincontrol", description="Chain control sets of control-affine systems.")
    p.add_argument("--version", action="version", version=f"chaincontrol {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one pipeline and write its artifacts")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", choices=sorted(SCENARIOS))
    src.add_argument("--system-file")
    r.add_argument("--pipeline", required=True, choices=PIPELINES)
    r.add_argument("--depth", type=int)
    r.add_argument("--T", type=float)
    jump = r.add_mutually_exclusive_group()
    jump.add_argument("--eps", type=float)
    jump.add_argument("--delta-ladder", type=float, nargs="+")
    r.add_argument("--weight", choices=WEIGHTS)
    r.add_argument("--inflation", type=float, help="edge inflation in source-box diameters (default 1)")
    r.add_argument("--controls", type=int, help="evenly spaced control values per axis (plus 0)")
    r.add_argument("--samples-per-box", type=int)
    r.add_argument("--step", type=float)
    r.add_argument("--out", default="out")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--hemisphere-sign", type=int, choices=(1, -1))
    closed = r.add_mutually_exclusive_group()
    closed.add_argument("--closed", dest="closed", action="store_true", default=None)
    closed.add_argument("--open", dest="closed", action="store_false")
    r.add_argument("--domain", choices=LADDER_DOMAINS, help="domain of the strong-ladder pipeline")
    r.add_argument("--window", type=float, nargs="+", help="lo hi per axis")
    r.add_argument("--seed", type=int, default=DEFAULT_SEED)
    r.add_argument("--max-graph-edges", type=int, default=DEFAULT_MAX_EDGES)
    r.add_argument("--u", type=float, nargs="+", help="constant control for monodromy")
    r.add_argument("--tau", type=float)
    r.add_argument("--samples", type=int, help="random triples for the conjugacy check")
    r.add_argument("--t-max", type=float)
    r.add_argument("--box", type=float, help="half-width of the conjugacy start box")

    s = sub.add_parser("scenario", help="export a built-in scenario")
    s.add_argument("name", choices=sorted(SCENARIOS))
    s.add_argument("--out", default=".")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    keys = {f for f in RunConfig.__dataclass_fields__ if f != "resolved"}
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in keys})


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if ns.command == "scenario":
            paths = get_scenario(ns.name).export(ns.out)
            print("\n".join(str(p) for p in paths))
            return EXIT_OK
        return run(config_from_args(ns))
    except (ConfigError, InputError) as exc:
        _diagnostic("config", str(exc))
        return EXIT_CONFIG
    except BudgetError as exc:
        _diagnostic("budget", str(exc))
        return EXIT_BUDGET
    except Diverged as exc:
        _diagnostic("divergence", str(exc))
        return EXIT_DIVERGENCE
    except (ChainControlError, OSError) as exc:
        _diagnostic("runtime", str(exc), type=type(exc).__name__)
        return EXIT_OTHER


if __name__ == "__main__":
    raise SystemExit(main())
