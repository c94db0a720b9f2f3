"""File formats for graphs, chain sets and plot data."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .engine.analysis import ChainSetResult
from .engine.covering import EUCLIDEAN
from .engine.graph import TransitionGraph

DEFAULT_MAX_EDGES = 5_000_000


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a).reshape(-1)]


def write_json(path, obj) -> Path:
    p = Path(path)
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return p


def graph_document(graph: TransitionGraph, max_edges: int = DEFAULT_MAX_EDGES) -> dict:
    """Graph as ``{nodes, edges, sink_edges}``.

    Edges are omitted (``edges_written`` false) when their count exceeds
    ``max_edges``; nodes and sink edges are always present.
    """
    cov = graph.covering
    active = np.flatnonzero(graph.active)
    nodes = []
    for v in active:
        rec = {"id": int(v), "center": _floats(cov.centers[v]), "radius": _floats(cov.radii[v])}
        if cov.face is not None:
            rec["face"] = int(cov.face[v])
        nodes.append(rec)
    count = graph.edge_count()
    doc = {"node_count": int(active.size), "edge_count": count, "sink": graph.sink, "nodes": nodes}
    if count <= max_edges:
        e = graph.edges()
        to_sink = e[:, 1] == graph.sink
        doc["edges"] = e[~to_sink].tolist()
        doc["sink_edges"] = e[to_sink, 0].tolist()
        doc["edges_written"] = True
    else:
        doc["edges"] = []
        doc["sink_edges"] = np.flatnonzero(graph.scc().to_sink).tolist()
        doc["edges_written"] = False
    return doc


def write_graph(path, graph: TransitionGraph, max_edges: int = DEFAULT_MAX_EDGES) -> Path:
    return write_json(path, graph_document(graph, max_edges))


def write_chain_sets(path, covering, sets: list[ChainSetResult]) -> Path:
    """One CSV row per box: id, center coordinates, set id, classification, flags."""
    dim = covering.centers.shape[1]
    header = ["id", *[f"c{i}" for i in range(dim)], "set_id", "classification",
              "touches_equator", "hemisphere_sign", "antipodal_class"]
    p = Path(path)
    with open(p, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for s in sets:
            for b in s.boxes:
                w.writerow([
                    int(b), *(repr(float(v)) for v in covering.centers[b]), s.set_id,
                    s.classification, int(s.touches_equator), s.hemisphere_sign, s.antipodal_class,
                ])
    return p


def _write_points(path: Path, pts: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in pts:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def write_plot_files(directory, covering, sets: list[ChainSetResult], prefix: str = "set") -> list[Path]:
    """Box centers per set.

    Window sets give ``<prefix>_<id>.dat``.  Sphere and projective sets give
    the ambient centers in ``<prefix>_<id>.sphere.dat`` and the chart image
    ``s_rest / s_last`` of every off-equator center in ``<prefix>_<id>.dat``.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = []
    for s in sets:
        c = covering.centers[s.boxes]
        chart = d / f"{prefix}_{s.set_id}.dat"
        if covering.domain.kind == EUCLIDEAN:
            _write_points(chart, c)
            out.append(chart)
            continue
        amb = d / f"{prefix}_{s.set_id}.sphere.dat"
        _write_points(amb, c)
        off = c[c[:, -1] != 0.0]
        _write_points(chart, off[:, :-1] / off[:, -1:])
        out += [chart, amb]
    return out
