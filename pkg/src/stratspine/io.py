"""Graph documents (versioned JSON), DOT export and atomic file writes."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import InputError, format_cloud_csv

FORMAT_VERSION = "1"


def atomic_write_text(path, text: str) -> None:
    """Write through a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cloud_digest(cloud) -> str:
    """sha256 of the cloud's canonical CSV text."""
    return "sha256:" + hashlib.sha256(format_cloud_csv(cloud).encode()).hexdigest()


@dataclass
class GraphNode:
    id: int
    f: int
    center: list
    cluster_size: int
    point_indices: list
    betti: Optional[list] = None
    nonmaximal: bool = False

    def to_dict(self) -> dict:
        d = {"id": self.id, "f": self.f, "center": self.center,
             "cluster_size": self.cluster_size, "point_indices": self.point_indices,
             "nonmaximal": self.nonmaximal}
        if self.betti is not None:
            d["betti"] = self.betti
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GraphNode":
        try:
            return cls(int(d["id"]), int(d["f"]), [float(x) for x in d["center"]],
                       int(d["cluster_size"]), [int(i) for i in d["point_indices"]],
                       None if d.get("betti") is None else [int(b) for b in d["betti"]],
                       bool(d.get("nonmaximal", False)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed graph node: {exc}") from None


@dataclass
class GraphDocument:
    kind: str
    nodes: list
    edges: list
    provenance: dict = field(default_factory=dict)
    format_version: str = FORMAT_VERSION

    def validate(self) -> "GraphDocument":
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise InputError("graph document has duplicate node ids")
        known = set(ids)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise InputError(f"edge ({a}, {b}) references a missing node")
        return self

    def to_dict(self) -> dict:
        return {"format_version": self.format_version, "kind": self.kind,
                "nodes": [n.to_dict() for n in self.nodes],
                "edges": [list(e) for e in self.edges],
                "provenance": self.provenance}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "GraphDocument":
        if "format_version" not in d:
            raise InputError("graph document has no format_version")
        if str(d["format_version"]) != FORMAT_VERSION:
            raise InputError(f"unsupported graph format version {d['format_version']!r}")
        nodes = [GraphNode.from_dict(n) for n in d.get("nodes", [])]
        edges = [[int(a), int(b)] for a, b in d.get("edges", [])]
        return cls(str(d.get("kind", "graph")), nodes, edges, dict(d.get("provenance", {})),
                   str(d["format_version"])).validate()

    @classmethod
    def from_json(cls, text: str) -> "GraphDocument":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc}") from None


def _coords(x) -> list:
    return [float(v) for v in np.asarray(x, dtype=np.float64)]


def scaffolding_document(scaffolding, cloud, dims: dict, nonmaximal=(),
                         provenance: Optional[dict] = None) -> GraphDocument:
    pts = cloud.points
    nonmaximal = set(nonmaximal)
    nodes = [GraphNode(int(nd.id), int(dims[nd.id]), _coords(pts[nd.center]),
                       int(nd.cluster.size), sorted(int(i) for i in nd.cluster),
                       nonmaximal=nd.id in nonmaximal)
             for nd in scaffolding.nodes]
    edges = sorted([int(a), int(b)] for a, b in scaffolding.graph.edges())
    return GraphDocument("scaffolding", nodes, edges, dict(provenance or {})).validate()


def spine_document(spine, scaffolding, cloud, provenance: Optional[dict] = None) -> GraphDocument:
    """One node per spine vertex; its center is the mean of its member points."""
    g = spine.graph
    members = spine.point_membership(scaffolding)
    # renumber densely in vertex order so documents do not leak internal ids
    order = sorted(g.vertices)
    new = {v: k for k, v in enumerate(order)}
    nodes = []
    for v in order:
        idx = members[v]
        center = cloud.points[idx].mean(axis=0) if idx.size else np.zeros(cloud.dim)
        betti = None
        if spine.betti is not None and v in spine.betti:
            betti = list(spine.betti[v].as_tuple())
        nodes.append(GraphNode(new[v], int(g.label[v]), _coords(center), int(idx.size),
                               [int(i) for i in idx], betti, v in spine.nonmaximal))
    edges = sorted(sorted([new[a], new[b]]) for a, b in g.edges())
    return GraphDocument("spine", nodes, edges, dict(provenance or {})).validate()


def export_dot(doc: GraphDocument) -> str:
    """Undirected DOT text; nodes and edges are emitted in id order."""
    name = "".join(ch if ch.isalnum() else "_" for ch in doc.kind) or "graph"
    lines = [f"graph {name} {{"]
    for n in sorted(doc.nodes, key=lambda n: n.id):
        label = f"dim={n.f}"
        if n.betti is not None:
            label += ", β=(" + ",".join(str(b) for b in n.betti) + ")"
        label += f", |pts|={n.cluster_size}"
        attrs = f'label="{label}"'
        if n.nonmaximal:
            attrs += ", shape=box"
        lines.append(f"  n{n.id} [{attrs}];")
    for a, b in sorted(tuple(sorted(e)) for e in doc.edges):
        lines.append(f"  n{a} -- n{b};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_document(doc: GraphDocument, out_dir, stem: str, fmt: str = "json") -> list:
    if fmt not in ("json", "dot", "both"):
        raise InputError(f"unknown format {fmt!r}; expected json, dot or both")
    out_dir = Path(out_dir)
    written = []
    if fmt in ("json", "both"):
        atomic_write_text(out_dir / f"{stem}.json", doc.to_json())
        written.append(out_dir / f"{stem}.json")
    if fmt in ("dot", "both"):
        atomic_write_text(out_dir / f"{stem}.dot", export_dot(doc))
        written.append(out_dir / f"{stem}.dot")
    return written


def read_document(path) -> GraphDocument:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return GraphDocument.from_json(text)
