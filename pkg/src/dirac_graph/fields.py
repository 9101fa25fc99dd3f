"""Staggered grids on metric graphs, spinor fields, quadrature norms."""

from __future__ import annotations

import csv

import numpy as np

class GridError(ValueError):
    pass


class GraphGrid:
    """Staggered discretization of a metric graph.

    First-component samples live on nodes (vertex endpoints shared between
    incident edges plus per-edge interior nodes), second-component samples
    on cell midpoints.  The staggering avoids the spurious-mode doubling of
    naive central differences for first-order operators.

    Quadrature is trapezoidal on nodes and midpoint-rule on midpoints, so
    each layer's weights sum to the total graph length; a vertex carries
    the half-cells of all incident edge ends, w_v = sum_e h_e / 2.
    """

    def __init__(self, graph, nodes_per_edge):
        self.graph = graph
        ne = graph.num_edges
        if np.isscalar(nodes_per_edge):
            n = np.full(ne, int(nodes_per_edge), dtype=int)
        else:
            n = np.asarray(nodes_per_edge, dtype=int)
            if n.shape != (ne,):
                raise GridError("nodes_per_edge must be scalar or one count per edge")
        if np.any(n < 2):
            raise GridError("need at least 2 cells per edge")
        self.n = n
        self.h = np.array([graph.edges[e].length / n[e] for e in range(ne)])

        nv = graph.num_vertices
        self.num_u1 = nv + int(np.sum(n - 1))
        self.num_u2 = int(np.sum(n))
        self.size = self.num_u1 + self.num_u2

        # node_ids[e][j] = global u1 dof of node j on edge e (j = 0..n_e)
        self.node_ids = []
        self.mid_offset = np.zeros(ne, dtype=int)
        off = nv
        moff = 0
        for e in range(ne):
            rec = graph.edges[e]
            ids = np.empty(n[e] + 1, dtype=int)
            ids[0] = rec.tail
            ids[-1] = rec.head
            ids[1:-1] = np.arange(off, off + n[e] - 1)
            off += n[e] - 1
            self.node_ids.append(ids)
            self.mid_offset[e] = moff
            moff += n[e]

        self.w1 = np.zeros(self.num_u1)
        self.w2 = np.zeros(self.num_u2)
        for e in range(ne):
            he = self.h[e]
            ids = self.node_ids[e]
            self.w1[ids[0]] += he / 2
            self.w1[ids[-1]] += he / 2
            self.w1[ids[1:-1]] = he
            self.w2[self.mid_offset[e] : self.mid_offset[e] + n[e]] = he

        # combined weight vector in stacked (u1, u2) dof order
        self.weights = np.concatenate([self.w1, self.w2])

    def mids(self, e):
        return np.arange(self.mid_offset[e], self.mid_offset[e] + self.n[e])

    def node_x(self, e):
        """Arclength coordinates of the nodes of edge e."""
        return np.arange(self.n[e] + 1) * self.h[e]

    def mid_x(self, e):
        return (np.arange(self.n[e]) + 0.5) * self.h[e]

    def check_weights(self, tol=1e-12):
        L = self.graph.total_length
        return abs(self.w1.sum() - L) <= tol * L and abs(self.w2.sum() - L) <= tol * L


class SpinorField:
    """C^2-valued field sampled on a GraphGrid: u1 on nodes, u2 on midpoints."""

    __slots__ = ("grid", "u1", "u2")

    def __init__(self, grid, u1=None, u2=None):
        self.grid = grid
        self.u1 = np.zeros(grid.num_u1, dtype=complex) if u1 is None else np.asarray(u1, dtype=complex).copy()
        self.u2 = np.zeros(grid.num_u2, dtype=complex) if u2 is None else np.asarray(u2, dtype=complex).copy()
        if self.u1.shape != (grid.num_u1,) or self.u2.shape != (grid.num_u2,):
            raise GridError("field component shape mismatch")

    @classmethod
    def from_vector(cls, grid, vec):
        vec = np.asarray(vec, dtype=complex)
        return cls(grid, vec[: grid.num_u1], vec[grid.num_u1 :])

    def to_vector(self):
        return np.concatenate([self.u1, self.u2])

    def copy(self):
        return SpinorField(self.grid, self.u1, self.u2)

    def __add__(self, other):
        return SpinorField(self.grid, self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        return SpinorField(self.grid, self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c):
        return SpinorField(self.grid, c * self.u1, c * self.u2)

    __rmul__ = __mul__

    def __neg__(self):
        return SpinorField(self.grid, -self.u1, -self.u2)


def inner(f, g):
    """Weighted L^2 inner product <f, g> (conjugate-linear in f)."""
    gr = f.grid
    return complex(np.sum(np.conj(f.u1) * gr.w1 * g.u1) + np.sum(np.conj(f.u2) * gr.w2 * g.u2))


def norm_lp(f, p):
    """L^p norm, componentwise over the two spinor components.

    Only p >= 2 (or infinity) is supported; that is the range the energy
    estimates use.
    """
    if p != np.inf and p < 2:
        raise GridError("norm_lp requires p >= 2 or p = inf")
    a1 = np.abs(f.u1)
    a2 = np.abs(f.u2)
    if p == np.inf:
        m1 = a1.max() if a1.size else 0.0
        m2 = a2.max() if a2.size else 0.0
        return float(max(m1, m2))
    gr = f.grid
    s = np.sum(gr.w1 * a1**p) + np.sum(gr.w2 * a2**p)
    return float(s ** (1.0 / p))


def norm_l2(f):
    return norm_lp(f, 2)


def _deriv_samples(f):
    """Staggered first differences.

    Returns (d1, w_d1, d2, w_d2): u1 differences at midpoints with midpoint
    weights; u2 differences at interior nodes with cell weights, plus
    half-cell end corrections reusing the adjacent difference (the nearest
    available slope; O(h^2) overall for smooth fields).
    """
    gr = f.grid
    d1 = np.empty(gr.num_u2, dtype=complex)
    w_d1 = np.empty(gr.num_u2)
    d2_parts = []
    w2_parts = []
    for e in range(gr.graph.num_edges):
        he = gr.h[e]
        ids = gr.node_ids[e]
        sl = slice(gr.mid_offset[e], gr.mid_offset[e] + gr.n[e])
        u1e = f.u1[ids]
        d1[sl] = np.diff(u1e) / he
        w_d1[sl] = he
        u2e = f.u2[sl]
        if gr.n[e] >= 2:
            dd = np.diff(u2e) / he
            d2_parts.append(dd)
            w = np.full(dd.size, he)
            w[0] += he / 2
            w[-1] += he / 2
            w2_parts.append(w)
    d2 = np.concatenate(d2_parts) if d2_parts else np.zeros(0, dtype=complex)
    w_d2 = np.concatenate(w2_parts) if w2_parts else np.zeros(0)
    return d1, w_d1, d2, w_d2


def norm_h1(f):
    """Discrete H^1 norm: staggered first differences per edge plus L^2."""
    d1, w_d1, d2, w_d2 = _deriv_samples(f)
    dsq = np.sum(w_d1 * np.abs(d1) ** 2) + np.sum(w_d2 * np.abs(d2) ** 2)
    return float(np.sqrt(dsq + norm_l2(f) ** 2))


def gn_alpha(p, q):
    if q < 2:
        raise GridError("q must be >= 2")
    if p != np.inf and p < q:
        raise GridError("p must be >= q")
    qp = 0.0 if p == np.inf else q / p
    return (2.0 / (2.0 + q)) * (1.0 - qp)


def check_gagliardo_nirenberg(f, p, q):
    """Interpolation-inequality report for one field.

    Returns lhs = |f|_p, the product |f|_H1^alpha |f|_q^(1-alpha) with
    alpha = (2/(2+q)) (1 - q/p), and their ratio.  Test suites take the
    sup of the ratio over a corpus of fields.
    """
    nq = norm_lp(f, q)
    if nq == 0.0:
        raise GridError("zero field")
    alpha = gn_alpha(p, q)
    lhs = norm_lp(f, p)
    rhs = norm_h1(f) ** alpha * nq ** (1.0 - alpha)
    return {"lhs": lhs, "rhs_without_constant": rhs, "ratio": lhs / rhs, "alpha": alpha}


def orbit_translate(closure, grid, k, f):
    """Translated field k*u with (k*u)(x) = u(T^{-k} x).

    The grid must be built on closure.graph with per-edge node counts that
    are constant on translation orbits (scalar counts always qualify).
    """
    if f.grid is not grid:
        raise GridError("field lives on a different grid")
    vperm = closure.translate_vertices(k)
    eperm = closure.translate_edges(k)
    out = SpinorField(grid)
    out.u1[vperm] = f.u1[: closure.graph.num_vertices]
    for e in range(grid.graph.num_edges):
        te = eperm[e]
        if grid.n[e] != grid.n[te]:
            raise GridError("grid resolution is not translation invariant")
        ids = grid.node_ids[e][1:-1]
        tids = grid.node_ids[te][1:-1]
        out.u1[tids] = f.u1[ids]
        out.u2[grid.mids(te)] = f.u2[grid.mids(e)]
    return out


def restrict_field(f, coarse_grid):
    """Restrict a field from a 2x-refined grid onto the coarse grid.

    Coarse nodes coincide with even fine nodes (exact restriction); a
    coarse midpoint sits exactly between two fine midpoints, so their
    average is the centered second-order value there.
    """
    fine = f.grid
    if fine.graph is not coarse_grid.graph or np.any(fine.n != 2 * coarse_grid.n):
        raise GridError("restrict_field needs the same graph at exactly double resolution")
    out = SpinorField(coarse_grid)
    for e in range(coarse_grid.graph.num_edges):
        cid = coarse_grid.node_ids[e]
        fid = fine.node_ids[e]
        out.u1[cid] = f.u1[fid[::2]]
        fm = f.u2[fine.mids(e)]
        out.u2[coarse_grid.mids(e)] = 0.5 * (fm[0::2] + fm[1::2])
    return out


FIELD_CSV_HEADER = ["edge_id", "kind", "local_index", "arclength", "re_u1", "im_u1", "re_u2", "im_u2"]


def save_field_csv(f, path):
    """Write the per-edge sample table; vertex nodes repeat on each incident edge."""
    gr = f.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELD_CSV_HEADER)
        for e in range(gr.graph.num_edges):
            xs = gr.node_x(e)
            ids = gr.node_ids[e]
            for j in range(gr.n[e] + 1):
                z = f.u1[ids[j]]
                w.writerow([e, "node", j, f"{xs[j]:.17g}", f"{z.real:.17g}", f"{z.imag:.17g}", "", ""])
            xm = gr.mid_x(e)
            for j, m in enumerate(gr.mids(e)):
                z = f.u2[m]
                w.writerow([e, "mid", j, f"{xm[j]:.17g}", "", "", f"{z.real:.17g}", f"{z.imag:.17g}"])


def load_field_csv(grid, path, tol=1e-9):
    """Read a field written by save_field_csv back onto a matching grid."""
    f = SpinorField(grid)
    seen = np.zeros(grid.num_u1, dtype=bool)
    with open(path) as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != FIELD_CSV_HEADER:
            raise GridError("unexpected field CSV header")
        for row in rd:
            e, kind, j = int(row[0]), row[1], int(row[2])
            if kind == "node":
                z = complex(float(row[4]), float(row[5]))
                i = grid.node_ids[e][j]
                if seen[i] and abs(f.u1[i] - z) > tol * max(1.0, abs(z)):
                    raise GridError(f"inconsistent shared vertex sample at dof {i}")
                f.u1[i] = z
                seen[i] = True
            elif kind == "mid":
                f.u2[grid.mid_offset[e] + j] = complex(float(row[6]), float(row[7]))
            else:
                raise GridError(f"unknown sample kind {kind!r}")
    return f


def random_smooth_field(grid, rng, modes=4, amplitude=1.0):
    """Random band-limited field, used for norm-inequality corpora.

    Sum of a few random Fourier-type profiles per edge, made vertex
    consistent by averaging the incident edge limits into the shared dof.
    """
    f = SpinorField(grid)
    acc = np.zeros(grid.num_u1, dtype=complex)
    cnt = np.zeros(grid.num_u1)
    for e in range(grid.graph.num_edges):
        ell = grid.graph.edges[e].length
        xs = grid.node_x(e)
        xm = grid.mid_x(e)
        prof_n = np.zeros(xs.size, dtype=complex)
        prof_m = np.zeros(xm.size, dtype=complex)
        for _ in range(modes):
            c = amplitude * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2 * modes)
            kk = np.pi * rng.integers(0, modes + 1) / ell
            ph = rng.uniform(0, 2 * np.pi)
            prof_n += c * np.cos(kk * xs + ph)
            prof_m += amplitude * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2 * modes) * np.cos(kk * xm + ph)
        ids = grid.node_ids[e]
        acc[ids[1:-1]] += prof_n[1:-1]
        cnt[ids[1:-1]] += 1
        for i, val in ((ids[0], prof_n[0]), (ids[-1], prof_n[-1])):
            acc[i] += val
            cnt[i] += 1
        f.u2[grid.mids(e)] = prof_m
    f.u1 = acc / np.maximum(cnt, 1)
    return f
