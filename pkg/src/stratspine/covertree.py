"""Adaptive cover tree.

The tree is built top-down. A node at level ``i`` owns a cluster of points
lying within ``R_i = base * 2**-i`` of its center. Its prospective children
form a greedy farthest-point net of the cluster at the first finer level where
the net has more than one center; the node is only split when the children
disagree (see :func:`subdivision_test`). Leaves are the scaffold clusters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import InputError, PointCloud
from .homology import connectivity_threshold, rips_persistence
from .mlpca import RadiusSchedule, max_pairwise_eigenmetric

DEFAULT_MAX_LEVEL = 24
CHILD_PROFILES = ("center", "mean")


@dataclass
class SubdivisionPolicy:
    tau: float
    h0_thresh: Optional[float] = None
    higher_pers_thresh: Optional[float] = None
    schedule: Optional[RadiusSchedule] = None
    max_level: int = DEFAULT_MAX_LEVEL
    child_profile: str = "center"

    def __post_init__(self):
        if self.child_profile not in CHILD_PROFILES:
            raise InputError(f"unknown child profile {self.child_profile!r}; "
                             f"expected one of {CHILD_PROFILES}")
        if not self.tau > 0:
            raise InputError("tau must be positive")
        for name in ("h0_thresh", "higher_pers_thresh"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InputError(f"{name} must be nonnegative")
        if self.max_level < 0:
            raise InputError("max_level must be nonnegative")


@dataclass
class CoverNode:
    center: int
    level: int
    radius: float
    cluster: np.ndarray
    children: list = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> list:
        out = []
        stack = [self]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def walk(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


def _root_center(pts: np.ndarray) -> int:
    # the point nearest the centroid; lowest index on ties
    d = np.sum((pts - pts.mean(axis=0)) ** 2, axis=1)
    return int(np.argmin(d))


def _base_radius(max_dist: float) -> float:
    if max_dist <= 0:
        return 1.0
    base = 2.0 ** math.ceil(math.log2(max_dist))
    while base < max_dist:
        base *= 2.0
    while base / 2.0 >= max_dist:
        base /= 2.0
    return base


def child_net(pts: np.ndarray, cluster: np.ndarray, center: int, radius: float):
    """Greedy farthest-point net of ``cluster`` at ``radius``, seeded with ``center``.

    Returns ``(centers, assignment)`` where ``assignment[k]`` is the position in
    ``centers`` of the nearest net point to ``cluster[k]`` (first on ties).
    """
    sub = pts[cluster]
    seed = int(np.flatnonzero(cluster == center)[0])
    chosen = [seed]
    dmin = np.sqrt(np.sum((sub - sub[seed]) ** 2, axis=1))
    owner = np.zeros(cluster.size, dtype=np.intp)
    while True:
        far = int(np.argmax(dmin))
        if not dmin[far] > radius:
            break
        d = np.sqrt(np.sum((sub - sub[far]) ** 2, axis=1))
        closer = d < dmin
        owner[closer] = len(chosen)
        dmin = np.where(closer, d, dmin)
        chosen.append(far)
    return cluster[np.array(chosen)], owner


def _speculative_children(pts, node: CoverNode, base: float, max_level: int):
    d = np.sqrt(np.sum((pts[node.cluster] - pts[node.center]) ** 2, axis=1))
    far = float(d.max()) if d.size else 0.0
    if far <= 0:
        return None
    level = node.level + 1
    while base * 2.0 ** -level >= far:
        level += 1
    if level > max_level:
        return None
    radius = base * 2.0 ** -level
    centers, owner = child_net(pts, node.cluster, node.center, radius)
    return [
        CoverNode(int(c), level, radius, node.cluster[owner == k])
        for k, c in enumerate(centers)
    ]


def subdivision_test(node: CoverNode, cloud: PointCloud, profiles: np.ndarray,
                     policy: SubdivisionPolicy, children=None) -> bool:
    """True when ``node`` should be split into its (speculative) children.

    Splits if two children are farther apart than ``tau`` in the eigenmetric,
    if the cluster needs more than ``h0_thresh`` of thickening to
    become connected, or if the cluster carries a 1- or 2-cycle with
    persistence above ``higher_pers_thresh``. A child is represented by its
    center's profile (``child_profile="center"``) or by the mean profile of
    its cluster (``"mean"``), which is less sensitive to sampling noise but
    blurs children that straddle two strata.
    """
    children = node.children if children is None else children
    if len(children) >= 2:
        if policy.child_profile == "center":
            stack = profiles[np.array([c.center for c in children], dtype=np.intp)]
        else:
            stack = np.stack([profiles[c.cluster].mean(axis=0) for c in children])
        if max_pairwise_eigenmetric(stack) > policy.tau:
            return True
    pts = cloud.points[node.cluster]
    if policy.h0_thresh is not None and connectivity_threshold(pts) > policy.h0_thresh:
        return True
    if policy.higher_pers_thresh is not None and pts.shape[0] >= 4:
        diam_scale = node.radius
        dgms = rips_persistence(pts, max_dim=2, max_scale=diam_scale, simplex_cap=200_000,
                                subsample=80)
        for dgm in dgms[1:]:
            if any(d - b > policy.higher_pers_thresh for b, d in dgm.dots):
                return True
    return False


def build_adaptive_cover_tree(cloud: PointCloud, policy: SubdivisionPolicy,
                              profiles: np.ndarray) -> CoverNode:
    """Root of the adaptive cover tree; ``profiles`` is the ``(n, radii, D)``
    stack of eigenvalue profiles (see :func:`stratspine.mlpca.all_profiles`)."""
    if cloud is None or cloud.n < 1:
        raise InputError("cannot build a cover tree on an empty cloud")
    pts = cloud.points
    root_center = _root_center(pts)
    max_dist = float(np.sqrt(np.sum((pts - pts[root_center]) ** 2, axis=1)).max())
    base = _base_radius(max_dist)
    root = CoverNode(root_center, 0, base, np.arange(cloud.n))

    stack = [root]
    while stack:
        node = stack.pop()
        if node.cluster.size <= 1 or node.level >= policy.max_level:
            continue
        children = _speculative_children(pts, node, base, policy.max_level)
        if children is None or len(children) < 2:
            continue
        if subdivision_test(node, cloud, profiles, policy, children):
            node.children = children
            stack.extend(reversed(children))
    return root


def check_cover_tree(root: CoverNode, cloud: PointCloud, tol: float = 1e-12) -> list[str]:
    """List every violated cover-tree invariant; empty means the tree is valid."""
    pts = cloud.points
    problems = []

    def dist(a, b):
        return float(np.sqrt(np.sum((pts[a] - pts[b]) ** 2)))

    for node in root.walk():
        if node.center not in set(node.cluster.tolist()):
            problems.append(f"node {node.center}@{node.level}: center not in its cluster")
        d = np.sqrt(np.sum((pts[node.cluster] - pts[node.center]) ** 2, axis=1))
        if d.size and d.max() > node.radius * (1 + tol):
            problems.append(f"node {node.center}@{node.level}: cluster point outside radius")
        if node.is_leaf:
            continue
        kids = node.children
        if sum(1 for c in kids if c.center == node.center) != 1:
            problems.append(f"node {node.center}@{node.level}: nesting violated (no unique self-child)")
        for c in kids:
            if c.level <= node.level:
                problems.append(f"child {c.center}@{c.level} not below parent level {node.level}")
            if dist(node.center, c.center) > node.radius * (1 + tol):
                problems.append(f"child {c.center}@{c.level}: covering violated")
        for a in range(len(kids)):
            for b in range(a + 1, len(kids)):
                r = min(kids[a].radius, kids[b].radius)
                if not dist(kids[a].center, kids[b].center) > r:
                    problems.append(
                        f"siblings {kids[a].center},{kids[b].center}@{kids[a].level}: separation violated")
        merged = np.sort(np.concatenate([c.cluster for c in kids]))
        if not np.array_equal(merged, np.sort(node.cluster)):
            problems.append(f"node {node.center}@{node.level}: children do not partition the cluster")

    leaf_points = np.sort(np.concatenate([leaf.cluster for leaf in root.leaves()]))
    if not np.array_equal(leaf_points, np.arange(cloud.n)):
        problems.append("leaf clusters do not partition the point set")
    return problems


def tree_to_json(root: CoverNode) -> str:
    """Debug dump of the tree; the format is not stable."""
    nodes = []
    ids = {}
    for k, node in enumerate(root.walk()):
        ids[id(node)] = k
    for node in root.walk():
        nodes.append({
            "id": ids[id(node)],
            "center": int(node.center),
            "level": int(node.level),
            "radius": float(node.radius),
            "children": [ids[id(c)] for c in node.children],
            "cluster_size": int(node.cluster.size),
        })
    return json.dumps({"nodes": nodes}, indent=1)
