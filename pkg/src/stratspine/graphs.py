"""Simple undirected vertex-labeled graphs with link, deletion and collapse.

Graphs are treated as values: every operation returns a new graph.
"""

from __future__ import annotations

from .geometry import InputError


class LabeledGraph:
    """Simple undirected graph on nonnegative integer ids.

    ``label`` maps each vertex to an integer (the local dimension); ``payload``
    maps each vertex to a frozenset of member ids that is merged on collapse.
    """

    __slots__ = ("adj", "label", "payload")

    def __init__(self, vertices=(), edges=(), label=None, payload=None):
        self.adj = {int(v): set() for v in vertices}
        for x, y in edges:
            x, y = int(x), int(y)
            if x == y:
                raise InputError(f"self-loop at {x}")
            if x not in self.adj or y not in self.adj:
                raise InputError(f"edge ({x}, {y}) references a missing vertex")
            self.adj[x].add(y)
            self.adj[y].add(x)
        label = label or {}
        self.label = {v: int(label.get(v, 0)) for v in self.adj}
        payload = payload or {}
        self.payload = {v: frozenset(payload.get(v, (v,))) for v in self.adj}

    @property
    def vertices(self):
        return sorted(self.adj)

    def edges(self):
        """Edges as ``(x, y)`` with ``x < y``, in ascending order."""
        return sorted((x, y) for x, nb in self.adj.items() for y in nb if x < y)

    def n_vertices(self) -> int:
        return len(self.adj)

    def n_edges(self) -> int:
        return sum(len(nb) for nb in self.adj.values()) // 2

    def has_edge(self, x, y) -> bool:
        return x in self.adj and y in self.adj[x]

    def next_id(self) -> int:
        return max(self.adj, default=-1) + 1

    def copy(self) -> "LabeledGraph":
        g = LabeledGraph.__new__(LabeledGraph)
        g.adj = {v: set(nb) for v, nb in self.adj.items()}
        g.label = dict(self.label)
        g.payload = dict(self.payload)
        return g

    def __eq__(self, other):
        if not isinstance(other, LabeledGraph):
            return NotImplemented
        return self.adj == other.adj and self.label == other.label and self.payload == other.payload

    def __repr__(self):
        return f"LabeledGraph(|V|={self.n_vertices()}, |E|={self.n_edges()})"

    def _require(self, v):
        if v not in self.adj:
            raise InputError(f"vertex {v} not in graph")


def link(g: LabeledGraph, v) -> set:
    g._require(v)
    return set(g.adj[v])


def upper_link(g: LabeledGraph, v) -> set:
    g._require(v)
    f = g.label[v]
    return {y for y in g.adj[v] if g.label[y] > f}


def upper_link_edge(g: LabeledGraph, e) -> set:
    x, y = e
    if not g.has_edge(x, y):
        raise InputError(f"edge {e} not in graph")
    return upper_link(g, x) & upper_link(g, y)


def delete_vertices(g: LabeledGraph, W) -> LabeledGraph:
    """Remove ``W`` one vertex at a time in ascending id order; each removal
    joins every pair of the removed vertex's current neighbours."""
    W = set(W)
    missing = W - set(g.adj)
    if missing:
        raise InputError(f"cannot delete missing vertices {sorted(missing)}")
    h = g.copy()
    for w in sorted(W):
        nbrs = h.adj.pop(w)
        for x in nbrs:
            h.adj[x].discard(w)
        for x in nbrs:
            h.adj[x].update(nbrs - {x})
        del h.label[w]
        del h.payload[w]
    return h


def collapse_set(g: LabeledGraph, W, new_label, new_id=None) -> LabeledGraph:
    """Replace ``W`` by one fresh vertex adjacent to every outside neighbour of ``W``.

    The fresh vertex gets ``new_id`` if given, else ``g.next_id()``; its payload
    is the union of the payloads of ``W``.
    """
    W = set(W)
    if not W:
        raise InputError("cannot collapse an empty vertex set")
    missing = W - set(g.adj)
    if missing:
        raise InputError(f"cannot collapse missing vertices {sorted(missing)}")
    w = g.next_id() if new_id is None else int(new_id)
    if w in g.adj and w not in W:
        raise InputError(f"id {w} already in use")
    outside = set()
    merged = set()
    for v in W:
        outside |= g.adj[v]
        merged |= g.payload[v]
    outside -= W
    h = g.copy()
    for v in W:
        for x in h.adj.pop(v):
            if x not in W:
                h.adj[x].discard(v)
        del h.label[v]
        del h.payload[v]
    h.adj[w] = set(outside)
    for x in outside:
        h.adj[x].add(w)
    h.label[w] = int(new_label)
    h.payload[w] = frozenset(merged)
    return h


def connected_components(g: LabeledGraph, restrict=None) -> list[list]:
    """Components of the induced subgraph on ``restrict`` (default: all vertices),
    each sorted, ordered by their smallest member."""
    if restrict is None:
        allowed = set(g.adj)
    else:
        allowed = set(restrict)
        missing = allowed - set(g.adj)
        if missing:
            raise InputError(f"restrict set has missing vertices {sorted(missing)}")
    seen = set()
    comps = []
    for s in sorted(allowed):
        if s in seen:
            continue
        seen.add(s)
        comp = [s]
        stack = [s]
        while stack:
            v = stack.pop()
            for y in g.adj[v]:
                if y in allowed and y not in seen:
                    seen.add(y)
                    comp.append(y)
                    stack.append(y)
        comps.append(sorted(comp))
    return comps


def induced_is_connected(g: LabeledGraph, vertices) -> bool:
    vertices = set(vertices)
    if len(vertices) <= 1:
        return True
    return len(connected_components(g, vertices)) == 1
