"""Collapse a dimension-labeled scaffolding to its spine."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import InputError, diameter
from .graphs import (LabeledGraph, collapse_set, connected_components, delete_vertices,
                     upper_link)
from .homology import BettiVector, PersistenceDiagram, betti_vector, rips_persistence


@dataclass
class Spine:
    graph: LabeledGraph
    betti: Optional[dict] = None
    nonmaximal: set = field(default_factory=set)

    @property
    def membership(self) -> dict:
        """Spine vertex -> frozenset of scaffold node ids."""
        return self.graph.payload

    def point_membership(self, scaffolding) -> dict:
        out = {}
        for v, members in self.graph.payload.items():
            idx = [scaffolding.nodes[m].cluster for m in sorted(members)]
            out[v] = np.sort(np.concatenate(idx)) if idx else np.array([], dtype=np.intp)
        return out


class _Ids:
    def __init__(self, start):
        self.next = start

    def __call__(self):
        v = self.next
        self.next += 1
        return v


def _assign_deleted(original: LabeledGraph, component: list, survivors: dict,
                    deleted: set) -> dict:
    """Hand each deleted interior node to the surviving boundary node nearest in
    hops within its component (ties to the lowest boundary id)."""
    comp = set(component)
    owner = {}
    queue = deque()
    for b in sorted(survivors):
        owner[b] = b
        queue.append(b)
    while queue:
        v = queue.popleft()
        for y in sorted(original.adj[v]):
            if y in comp and y not in owner:
                owner[y] = owner[v]
                queue.append(y)
    return {d: owner[d] for d in deleted if d in owner}


MERGE_RULES = ("upper_link", "component")


def build_spine(scaffolding, dims: dict, nonmaximal, merge: str = "component") -> Spine:
    """Spine of a labeled scaffolding.

    1. Each connected same-label component of non-maximal nodes becomes one vertex.
    2. Within each same-label component of maximal nodes, members adjacent to a
       different label are boundary; the rest (interior) are deleted. A component
       with no boundary at all is collapsed to a single vertex instead.
    3. Edges between same-label boundary vertices with equal upper links are
       collapsed, lowest edge first, until none remain.
    4. With ``merge="component"`` the vertices left over from one maximal
       component are then merged into a single vertex. Step 3 alone keeps
       boundary pieces that touch different singular sets apart, which splits
       a connected stratum around each of its singularities.
    Deleted interior nodes are credited to the nearest surviving boundary node,
    so the vertex memberships partition the scaffold nodes.
    """
    if merge not in MERGE_RULES:
        raise InputError(f"unknown merge rule {merge!r}; expected one of {MERGE_RULES}")
    base = scaffolding.graph
    g = LabeledGraph(base.vertices, base.edges(), label={v: int(dims[v]) for v in base.adj},
                     payload={v: (v,) for v in base.adj})
    nonmaximal = set(nonmaximal)
    new_id = _Ids(g.next_id())

    groups = []
    for f in sorted({g.label[v] for v in nonmaximal}):
        members = [v for v in nonmaximal if g.label[v] == f]
        groups.extend((f, comp) for comp in connected_components(g, members))
    for f, comp in groups:
        g = collapse_set(g, comp, f, new_id())

    maximal = [v for v in g.adj if v not in nonmaximal and v in base.adj]
    boundary = set()
    to_delete = set()
    credit = {}
    components = []
    for f in sorted({g.label[v] for v in maximal}):
        members = [v for v in maximal if g.label[v] == f]
        components.extend((f, comp) for comp in connected_components(g, members))
    # an isolated component has no foreign neighbours, so collapsing it leaves
    # the others untouched
    for f, comp in components:
        bnd = [v for v in comp if any(g.label[y] != f for y in g.adj[v])]
        if not bnd:
            g = collapse_set(g, comp, f, new_id())
            continue
        interior = set(comp) - set(bnd)
        boundary.update(bnd)
        to_delete |= interior
        credit.update(_assign_deleted(g, comp, dict.fromkeys(bnd), interior))
    payload_extra = {}
    for d, b in credit.items():
        payload_extra.setdefault(b, set()).update(g.payload[d])
    g = delete_vertices(g, to_delete)
    for b, extra in payload_extra.items():
        g.payload[b] = g.payload[b] | frozenset(extra)

    changed = True
    while changed:
        changed = False
        for x, y in g.edges():
            if x in boundary and y in boundary and g.label[x] == g.label[y] \
                    and upper_link(g, x) == upper_link(g, y):
                w = new_id()
                g = collapse_set(g, {x, y}, g.label[x], w)
                boundary -= {x, y}
                boundary.add(w)
                changed = True
                break

    if merge == "component":
        for f, comp in components:
            comp = set(comp)
            survivors = sorted(v for v in g.adj if g.payload[v] <= comp)
            if len(survivors) > 1:
                g = collapse_set(g, survivors, f, new_id())

    nonmax_vertices = {v for v in g.adj if not g.payload[v] & (set(base.adj) - nonmaximal)}
    return Spine(g, None, nonmax_vertices)


def _clip(dgms: list, scale: float) -> list:
    # the oldest component never dies; every other class alive at the end of a
    # truncated filtration is cut off there
    out = []
    for d in dgms:
        dots = [(b, min(e, scale)) for b, e in d.dots]
        if d.dim == 0 and d.dots:
            k = min(range(len(d.dots)), key=lambda i: (d.dots[i][0], -d.dots[i][1]))
            dots[k] = d.dots[k]
        out.append(PersistenceDiagram(d.dim, dots, d.approximate))
    return out


def decorate_betti(spine: Spine, scaffolding, cloud, cutoff: Optional[float] = None,
                   simplex_cap: int = 200_000, subsample: int = 120, seed: int = 0,
                   scale_factor: float = 0.3) -> Spine:
    """Attach persistent Betti numbers computed on each vertex's node centers.

    The Rips filtration stops at ball radius ``scale_factor * diam`` of the
    vertex's center set, and classes still alive there are treated as dying
    at that radius. Stopping early keeps the complex sparse, so fewer centers
    are lost to subsampling. ``cutoff`` (a persistence in ball-radius units)
    defaults to ``0.1 * diam``, but never less than the scaffold's ``delta``:
    gaps below the scaffold's resolution are sampling artefacts. Vertices with fewer than four members get
    ``(1, 0, 0)``.
    """
    pts = cloud.points
    betti = {}
    for v in spine.graph.vertices:
        members = sorted(spine.graph.payload[v])
        if len(members) < 4:
            betti[v] = BettiVector(1, 0, 0, scaffolding.delta if cutoff is None else float(cutoff))
            continue
        centers = pts[[scaffolding.nodes[m].center for m in members]]
        diam = diameter(centers)
        c = max(0.1 * diam, scaffolding.delta) if cutoff is None else float(cutoff)
        scale = max(scale_factor * diam, 1e-12)
        dgms = rips_persistence(centers, max_dim=2, max_scale=scale,
                                simplex_cap=max(simplex_cap, len(members)),
                                subsample=subsample, seed=seed)
        betti[v] = betti_vector(_clip(dgms, scale), c)
    return Spine(spine.graph, betti, spine.nonmaximal)
