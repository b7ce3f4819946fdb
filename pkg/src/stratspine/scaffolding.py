"""The scaffolding graph on adaptive cover-tree leaves."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .geometry import InputError, PointCloud, mst_lengths
from .graphs import LabeledGraph

AUTO = "auto"
EDGE_RULES = ("centers", "clusters")


@dataclass
class ScaffoldNode:
    id: int
    center: int
    cluster: np.ndarray
    f: Optional[int] = None
    nonmaximal: bool = False


@dataclass
class Scaffolding:
    nodes: list
    graph: LabeledGraph
    delta: float
    edge_rule: str = "centers"

    def centers(self) -> np.ndarray:
        return np.array([nd.center for nd in self.nodes], dtype=np.intp)

    def point_owner(self, n_points: int) -> np.ndarray:
        owner = np.full(n_points, -1, dtype=np.intp)
        for nd in self.nodes:
            owner[nd.cluster] = nd.id
        return owner


def leaves_to_nodes(root) -> list:
    """Scaffold nodes from the leaves of a cover tree, numbered in tree order."""
    return [ScaffoldNode(k, int(leaf.center), np.sort(leaf.cluster))
            for k, leaf in enumerate(root.leaves())]


def auto_delta(cloud, centers: Optional[np.ndarray] = None) -> float:
    """Longest edge of the Euclidean MST: the smallest center-distance threshold
    that leaves the cloud (or, if given, the center set) in one piece."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if centers is not None:
        pts = pts[np.asarray(centers, dtype=np.intp)]
    if pts.shape[0] < 2:
        raise InputError("automatic delta needs at least two points")
    return float(mst_lengths(pts).max())


def _center_edges(pts: np.ndarray, centers: np.ndarray, delta: float) -> list:
    tree = cKDTree(pts[centers])
    pairs = tree.query_pairs(delta, output_type="ndarray")
    return sorted((int(a), int(b)) for a, b in pairs)


def _cluster_edges(pts: np.ndarray, nodes: list, delta: float) -> list:
    owner = np.empty(pts.shape[0], dtype=np.intp)
    for nd in nodes:
        owner[nd.cluster] = nd.id
    tree = cKDTree(pts)
    edges = set()
    for nd in nodes:
        hits = tree.query_ball_point(pts[nd.cluster], delta)
        near = set()
        for h in hits:
            near.update(owner[h].tolist())
        near.discard(nd.id)
        for other in near:
            edges.add((min(nd.id, other), max(nd.id, other)))
    return sorted(edges)


def build_scaffolding(nodes: list, cloud: PointCloud, delta=AUTO, edge_rule: str = "centers",
                      auto_on_centers: bool = False) -> Scaffolding:
    """Connect two nodes when their centers (or, with ``edge_rule='clusters'``,
    their nearest cluster points) are within ``delta``."""
    if edge_rule not in EDGE_RULES:
        raise InputError(f"edge rule must be one of {EDGE_RULES}")
    pts = cloud.points
    if isinstance(delta, str):
        if delta.lower() != AUTO:
            raise InputError(f"delta must be a number or {AUTO!r}")
        if cloud.n < 2:
            delta = 1.0
        else:
            centers = [nd.center for nd in nodes] if auto_on_centers else None
            delta = auto_delta(cloud, centers) if (centers is None or len(centers) > 1) else 1.0
    delta = float(delta)
    if not delta > 0:
        raise InputError("delta must be positive")

    centers = np.array([nd.center for nd in nodes], dtype=np.intp)
    if edge_rule == "centers":
        edges = _center_edges(pts, centers, delta)
    else:
        edges = _cluster_edges(pts, nodes, delta)
    graph = LabeledGraph(
        [nd.id for nd in nodes],
        edges,
        label={nd.id: (nd.f or 0) for nd in nodes},
        payload={nd.id: (nd.id,) for nd in nodes},
    )
    return Scaffolding(nodes, graph, delta, edge_rule)
