"""Metric graphs, periodic graphs with Z^d gluing data, and finite closures."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np


class GraphError(ValueError):
    """Raised for invalid graph data (bad lengths, disconnected, bad gluings)."""


@dataclass(frozen=True)
class EdgeRec:
    """Directed metric edge; the arclength coordinate runs tail -> head."""

    tail: int
    head: int
    length: float


class MetricGraph:
    """Finite connected metric graph.

    Vertices are integers ``0..num_vertices-1``; parallel edges and
    self-loops are allowed.  Each vertex incidence is a pair
    ``(edge_id, endpoint)`` with endpoint 0 at the tail (x = 0) and
    endpoint 1 at the head (x = length).
    """

    def __init__(self, num_vertices, edges, vertex_names=None, check_connected=True):
        if num_vertices < 1:
            raise GraphError("graph needs at least one vertex")
        recs = []
        for e in edges:
            if isinstance(e, EdgeRec):
                recs.append(e)
            else:
                recs.append(EdgeRec(int(e[0]), int(e[1]), float(e[2])))
        for i, e in enumerate(recs):
            if not (0 <= e.tail < num_vertices and 0 <= e.head < num_vertices):
                raise GraphError(f"edge {i} endpoint out of range")
            if not (e.length > 0 and np.isfinite(e.length)):
                raise GraphError(f"edge {i} must have positive finite length, got {e.length}")
        self.num_vertices = int(num_vertices)
        self.edges = tuple(recs)
        if vertex_names is None:
            vertex_names = [f"v{i}" for i in range(num_vertices)]
        if len(vertex_names) != num_vertices:
            raise GraphError("vertex_names length mismatch")
        self.vertex_names = tuple(vertex_names)
        inc = [[] for _ in range(num_vertices)]
        for i, e in enumerate(recs):
            inc[e.tail].append((i, 0))
            inc[e.head].append((i, 1))
        self.incidence = tuple(tuple(x) for x in inc)
        if any(len(x) == 0 for x in self.incidence):
            raise GraphError("every vertex must have degree >= 1")
        if check_connected and not self._connected():
            raise GraphError("graph is not connected")

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def total_length(self):
        return float(sum(e.length for e in self.edges))

    def degree(self, v):
        return len(self.incidence[v])

    def _connected(self):
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for eid, _ in self.incidence[v]:
                e = self.edges[eid]
                for w in (e.tail, e.head):
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
        return len(seen) == self.num_vertices

    def validate_incidence_roundtrip(self):
        """Incidences regenerate the edge endpoint data exactly."""
        ends = [[None, None] for _ in self.edges]
        for v in range(self.num_vertices):
            for eid, side in self.incidence[v]:
                ends[eid][side] = v
        for i, e in enumerate(self.edges):
            if ends[i][0] != e.tail or ends[i][1] != e.head:
                return False
        return True

    def edge_length_multiset(self):
        return tuple(sorted(e.length for e in self.edges))

    def to_json_dict(self):
        return {
            "vertices": list(self.vertex_names),
            "edges": [
                {"tail": self.vertex_names[e.tail], "head": self.vertex_names[e.head], "length": e.length}
                for e in self.edges
            ],
        }

    @classmethod
    def from_json_dict(cls, doc):
        names = list(doc["vertices"])
        index = {n: i for i, n in enumerate(names)}
        edges = [(index[e["tail"]], index[e["head"]], float(e["length"])) for e in doc["edges"]]
        return cls(len(names), edges, vertex_names=names)


class PeriodicGraph:
    """Fundamental cell plus Z^d gluing data.

    ``gluings[i]`` lists ``(out_vertex, in_vertex)`` pairs for generator i:
    the out-vertex of cell k is identified with the in-vertex of cell
    k + e_i.  Out and in sets of one generator must be disjoint (the
    translation action is free), and the generated infinite graph must be
    connected (checked on a 3^d patch of cells).
    """

    def __init__(self, cell, dim, gluings, name="custom"):
        if dim not in (1, 2):
            raise GraphError("only dim 1 and 2 are supported")
        if len(gluings) != dim:
            raise GraphError("need one gluing per generator")
        self.cell = cell
        self.dim = int(dim)
        self.name = name
        glu = []
        for i, pairs in enumerate(gluings):
            pairs = tuple((int(a), int(b)) for a, b in pairs)
            outs = [a for a, _ in pairs]
            ins = [b for _, b in pairs]
            if len(set(outs)) != len(outs) or len(set(ins)) != len(ins):
                raise GraphError(f"gluing {i} is not a bijection")
            if set(outs) & set(ins):
                raise GraphError(f"gluing {i} out/in vertex sets overlap (action not free)")
            for v in outs + ins:
                if not (0 <= v < cell.num_vertices):
                    raise GraphError(f"gluing {i} references unknown vertex {v}")
            glu.append(pairs)
        self.gluings = tuple(glu)
        self._out_map = {}
        for i, pairs in enumerate(self.gluings):
            for a, b in pairs:
                if a in self._out_map:
                    raise GraphError(f"vertex {a} is an out-vertex of two generators")
                self._out_map[a] = (i, b)
        if not self._patch_connected():
            raise GraphError("periodic graph generated by the gluings is not connected")

    def _patch_connected(self):
        # 3^d block of cells, gluings applied only inside the block.
        shape = (3,) * self.dim
        cells = list(itertools.product(*(range(3) for _ in range(self.dim))))
        nv = self.cell.num_vertices
        parent = list(range(len(cells) * nv))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(x, y):
            parent[find(x)] = find(y)

        cid = {k: i for i, k in enumerate(cells)}
        for k in cells:
            base = cid[k] * nv
            for e in self.cell.edges:
                union(base + e.tail, base + e.head)
            for i, pairs in enumerate(self.gluings):
                k2 = list(k)
                k2[i] += 1
                k2 = tuple(k2)
                if k2 in cid:
                    for a, b in pairs:
                        union(base + a, cid[k2] * nv + b)
        roots = {find(x) for x in range(len(parent))}
        return len(roots) == 1

    def to_json_dict(self):
        doc = self.cell.to_json_dict()
        doc["dim"] = self.dim
        names = self.cell.vertex_names
        doc["gluings"] = [[[names[a], names[b]] for a, b in pairs] for pairs in self.gluings]
        return doc

    @classmethod
    def from_json_dict(cls, doc):
        cell = MetricGraph.from_json_dict(doc)
        index = {n: i for i, n in enumerate(cell.vertex_names)}
        gluings = [[(index[a], index[b]) for a, b in pairs] for pairs in doc["gluings"]]
        return cls(cell, int(doc["dim"]), gluings)

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def load_json(cls, path, validate=True):
        with open(path) as fh:
            doc = json.load(fh)
        if validate:
            import jsonschema

            try:
                jsonschema.validate(doc, GRAPH_SCHEMA)
            except jsonschema.ValidationError as exc:
                raise GraphError(f"graph description invalid: {exc.message}") from exc
        return cls.from_json_dict(doc)


GRAPH_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dirac-graph periodic graph description",
    "type": "object",
    "required": ["vertices", "edges", "dim", "gluings"],
    "additionalProperties": False,
    "properties": {
        "vertices": {
            "type": "array",
            "items": {"type": "string"},
            "minItems": 1,
            "description": "vertex names of the fundamental cell",
        },
        "edges": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["tail", "head", "length"],
                "additionalProperties": False,
                "properties": {
                    "tail": {"type": "string"},
                    "head": {"type": "string"},
                    "length": {"type": "number", "exclusiveMinimum": 0},
                },
            },
            "description": "directed metric edges; the arclength coordinate runs tail -> head",
        },
        "dim": {
            "type": "integer",
            "minimum": 1,
            "maximum": 2,
            "description": "number of independent translation generators",
        },
        "gluings": {
            "type": "array",
            "minItems": 1,
            "maxItems": 2,
            "items": {
                "type": "array",
                "items": {
                    "type": "array",
                    "prefixItems": [{"type": "string"}, {"type": "string"}],
                    "minItems": 2,
                    "maxItems": 2,
                },
            },
            "description": "per generator: [out_vertex, in_vertex] pairs identifying cell k with cell k + e_i",
        },
    },
}


def build_example(kind, **params):
    """Construct one of the built-in periodic graphs.

    kind: 'chain', 'decorated_chain', 'ladder', 'strip' (all d=1) or
    'square_lattice' (d=2).  Edge lengths default to 1; the decorated
    chain takes a stub length L > 0.
    """
    ell = float(params.get("length", 1.0))
    if ell <= 0:
        raise GraphError("edge length must be positive")
    if kind == "chain":
        cell = MetricGraph(2, [(0, 1, ell)], vertex_names=["v0", "v1"])
        return PeriodicGraph(cell, 1, [[(1, 0)]], name="chain")
    if kind == "decorated_chain":
        L = float(params.get("L", 1.0))
        if L <= 0:
            raise GraphError("stub length L must be positive")
        cell = MetricGraph(3, [(0, 1, ell), (0, 2, L)], vertex_names=["v0", "v1", "stub"])
        return PeriodicGraph(cell, 1, [[(1, 0)]], name="decorated_chain")
    if kind == "ladder":
        rung = float(params.get("rung", 1.0))
        if rung <= 0:
            raise GraphError("rung length must be positive")
        cell = MetricGraph(
            4,
            [(0, 2, ell), (1, 3, ell), (0, 1, rung)],
            vertex_names=["uL", "lL", "uR", "lR"],
        )
        return PeriodicGraph(cell, 1, [[(2, 0), (3, 1)]], name="ladder")
    if kind == "strip":
        rung = float(params.get("rung", 1.0))
        if rung <= 0:
            raise GraphError("rung length must be positive")
        cell = MetricGraph(
            6,
            [
                (0, 3, ell),
                (1, 4, ell),
                (2, 5, ell),
                (0, 1, rung),
                (1, 2, rung),
            ],
            vertex_names=["tL", "mL", "bL", "tR", "mR", "bR"],
        )
        return PeriodicGraph(cell, 1, [[(3, 0), (4, 1), (5, 2)]], name="strip")
    if kind == "square_lattice":
        cell = MetricGraph(3, [(0, 1, ell), (0, 2, ell)], vertex_names=["o", "r", "t"])
        return PeriodicGraph(cell, 2, [[(1, 0)], [(2, 0)]], name="square_lattice")
    raise GraphError(f"unknown example kind {kind!r}")


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, x, y):
        self.parent[self.find(x)] = self.find(y)


class PeriodicClosure:
    """N-cell cyclic closure of a periodic graph.

    Cells are indexed by k in prod(range(N_i)); the out-vertex of cell k
    is glued to the in-vertex of cell k + e_i mod N.  The resulting
    finite graph carries an exact translation action by isometries.
    """

    def __init__(self, periodic, N):
        N = tuple(int(n) for n in np.atleast_1d(N))
        if len(N) != periodic.dim:
            raise GraphError(f"need {periodic.dim} cell counts, got {len(N)}")
        if any(n < 3 for n in N):
            raise GraphError("closure needs at least 3 cells per direction")
        self.periodic = periodic
        self.N = N
        cell = periodic.cell
        self.cells = list(itertools.product(*(range(n) for n in N)))
        self._cell_index = {k: i for i, k in enumerate(self.cells)}
        nv = cell.num_vertices
        uf = _UnionFind(len(self.cells) * nv)
        for k in self.cells:
            base = self._cell_index[k] * nv
            for i, pairs in enumerate(periodic.gluings):
                k2 = self._shift(k, i, +1)
                base2 = self._cell_index[k2] * nv
                for a, b in pairs:
                    uf.union(base + a, base2 + b)
        # canonical representative = smallest raw index in each class
        rep = {}
        for raw in range(len(self.cells) * nv):
            r = uf.find(raw)
            rep.setdefault(r, raw)
            rep[r] = min(rep[r], raw)
        roots = sorted(set(rep[uf.find(raw)] for raw in range(len(self.cells) * nv)))
        self._root_of = {r: i for i, r in enumerate(roots)}
        self._vertex_of_raw = np.array(
            [self._root_of[rep[uf.find(raw)]] for raw in range(len(self.cells) * nv)], dtype=int
        )
        self.cell_of_vertex = np.array([roots[i] // nv for i in range(len(roots))], dtype=int)
        self.vertex_orbit = np.array([roots[i] % nv for i in range(len(roots))], dtype=int)
        edges = []
        self.cell_of_edge = []
        self.edge_orbit = []
        for k in self.cells:
            base = self._cell_index[k] * nv
            for j, e in enumerate(cell.edges):
                edges.append(
                    (self._vertex_of_raw[base + e.tail], self._vertex_of_raw[base + e.head], e.length)
                )
                self.cell_of_edge.append(self._cell_index[k])
                self.edge_orbit.append(j)
        self.cell_of_edge = np.array(self.cell_of_edge, dtype=int)
        self.edge_orbit = np.array(self.edge_orbit, dtype=int)
        names = [f"c{self.cells[roots[i] // nv]}_{cell.vertex_names[roots[i] % nv]}" for i in range(len(roots))]
        self.graph = MetricGraph(len(roots), edges, vertex_names=names)

    def _shift(self, k, i, step):
        k2 = list(k)
        k2[i] = (k2[i] + step) % self.N[i]
        return tuple(k2)

    def _shift_vec(self, k, delta):
        return tuple((k[i] + int(delta[i])) % self.N[i] for i in range(len(self.N)))

    def reduce_k(self, k):
        k = tuple(int(x) for x in np.atleast_1d(k))
        if len(k) != len(self.N):
            raise GraphError("translation vector has wrong dimension")
        return tuple(x % n for x, n in zip(k, self.N))

    def translate_vertices(self, k):
        """Permutation p with p[v] = image of closure vertex v under T^k."""
        k = self.reduce_k(k)
        nv = self.periodic.cell.num_vertices
        perm = np.empty(self.graph.num_vertices, dtype=int)
        for v in range(self.graph.num_vertices):
            kk = self.cells[self.cell_of_vertex[v]]
            raw = self._cell_index[self._shift_vec(kk, k)] * nv + self.vertex_orbit[v]
            perm[v] = self._vertex_of_raw[raw]
        return perm

    def translate_edges(self, k):
        """Permutation p with p[e] = image of closure edge e under T^k."""
        k = self.reduce_k(k)
        ne_cell = self.periodic.cell.num_edges
        perm = np.empty(self.graph.num_edges, dtype=int)
        for e in range(self.graph.num_edges):
            kk = self.cells[self.cell_of_edge[e]]
            perm[e] = self._cell_index[self._shift_vec(kk, k)] * ne_cell + self.edge_orbit[e]
        return perm

    @property
    def num_cells(self):
        return len(self.cells)


def close_periodically(periodic, N):
    """Build the cyclic N-cell closure (every N_i >= 3)."""
    return PeriodicClosure(periodic, N)


class BlochCell:
    """Quotient graph of a periodic graph with winding data per edge endpoint.

    Identifying the out/in vertex pairs of every generator within a single
    cell yields the quotient graph; each edge endpoint remembers the Z^d
    winding picked up while resolving the identification chain.  Couplings
    across a winding m carry the phase exp(i theta . m) in the twisted
    operator.
    """

    def __init__(self, periodic):
        self.periodic = periodic
        cell = periodic.cell
        uf = _UnionFind(cell.num_vertices)
        for pairs in periodic.gluings:
            for a, b in pairs:
                uf.union(a, b)
        roots = sorted({uf.find(v) for v in range(cell.num_vertices)})
        root_index = {r: i for i, r in enumerate(roots)}
        self.vertex_of_cell_vertex = np.array(
            [root_index[uf.find(v)] for v in range(cell.num_vertices)], dtype=int
        )

        def resolve(v):
            w = np.zeros(periodic.dim, dtype=int)
            seen = set()
            while v in periodic._out_map:
                if v in seen:
                    raise GraphError("gluing identification chain loops (action not free)")
                seen.add(v)
                i, v2 = periodic._out_map[v]
                w[i] += 1
                v = v2
            return v, w

        edges = []
        windings = []
        for e in cell.edges:
            vt, wt = resolve(e.tail)
            vh, wh = resolve(e.head)
            edges.append((root_index[uf.find(vt)], root_index[uf.find(vh)], e.length))
            windings.append((wt, wh))
        names = [cell.vertex_names[r] for r in roots]
        self.graph = MetricGraph(len(roots), edges, vertex_names=names)
        self.windings = tuple((np.array(a), np.array(b)) for a, b in windings)

    def edge_phase(self, theta):
        """Per-edge phase factors (tail, head) for Bloch parameter theta."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.periodic.dim,):
            raise GraphError("theta has wrong dimension")
        out = []
        for wt, wh in self.windings:
            out.append((np.exp(1j * float(theta @ wt)), np.exp(1j * float(theta @ wh))))
        return out


def quotient_cell(periodic):
    """Quotient of the periodic graph by its translation group."""
    return BlochCell(periodic)
