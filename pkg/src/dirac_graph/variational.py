"""Action functional, its gradient, linking diagnostics, and the bound-state solver.

The action on a discretized closure is
    Phi(u) = (||u+||^2 - ||u-||^2)/2 + (omega/2) |u|_2^2 - int F(x, u),
with the split norms taken from a complete spectral decomposition.  The
nonlinear integral uses midpoint collocation (first component averaged
onto midpoints), which makes the discrete gradient exact: the strong-form
residual A u + omega u - F_u(x, u) is literally the gradient of Phi in
the quadrature inner product.  Critical points are computed by a damped,
gauge-fixed Newton iteration on that residual; distinct solutions are
found by rejecting convergence into the phase/translation orbit of
previously found states and re-seeding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import SpinorField, inner, norm_lp, orbit_translate
from .operator import check_vertex_conditions


class SolverError(RuntimeError):
    pass


class ConvergedToZero(SolverError):
    pass


class MaxIterationsExceeded(SolverError):
    pass


class DeflationExhausted(SolverError):
    pass


class ActionContext:
    """Everything needed to evaluate Phi and its derivatives on one closure."""

    def __init__(self, closure, grid, op, dec, params, nl):
        dec.require_complete()
        if dec.i_zero.size:
            raise SolverError("operator has (numerically) zero modes; the splitting is degenerate")
        self.closure = closure
        self.grid = grid
        self.op = op
        self.dec = dec
        self.params = params
        self.nl = nl
        n1 = grid.num_u1
        # midpoint collocation tables: left/right node of each midpoint cell
        self.mid_left = np.concatenate([grid.node_ids[e][:-1] for e in range(grid.graph.num_edges)])
        self.mid_right = np.concatenate([grid.node_ids[e][1:] for e in range(grid.graph.num_edges)])
        cell_edges = np.concatenate(
            [np.full(grid.n[e], closure.edge_orbit[e]) for e in range(grid.graph.num_edges)]
        )
        self.b_mid = nl.b_values(cell_edges)
        self.n1 = n1
        self.n = grid.size
        self._rk = None

    # -- nonlinear term -----------------------------------------------------

    def _collocated(self, vec):
        u1 = vec[: self.n1]
        u2 = vec[self.n1 :]
        ubar = 0.5 * (u1[self.mid_left] + u1[self.mid_right])
        return np.stack([ubar, u2], axis=-1)

    def nonlinear_integral(self, f, which="F"):
        """Midpoint-rule integral of F or Fhat along the graph."""
        vals = self._collocated(f.to_vector())
        fn = self.nl.F if which == "F" else self.nl.Fhat
        return float(np.sum(self.grid.w2 * fn(vals, self.b_mid)))

    def _nonlinear_grad_complex(self, vec):
        """Complex packing of the plain (unweighted) gradient of int F."""
        vals = self._collocated(vec)
        g = self.nl.F_u(vals, self.b_mid)  # (num_u2, 2) complex
        g1 = np.zeros(self.n1, dtype=complex)
        w2 = self.grid.w2
        np.add.at(g1, self.mid_left, 0.5 * w2 * g[:, 0])
        np.add.at(g1, self.mid_right, 0.5 * w2 * g[:, 0])
        return np.concatenate([g1, w2 * g[:, 1]])

    def _nonlinear_hessian_real(self, vec):
        """Plain real Hessian of int F over [Re z; Im z] dofs, sparse symmetric."""
        vals = self._collocated(vec)
        H4 = self.nl.F_uu(vals, self.b_mid) * self.grid.w2[:, None, None]
        B = np.array(
            [
                [0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.5, 0.5, 0.0],
                [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            ]
        )
        local = np.einsum("ji,mjk,kl->mil", B, H4, B)  # (num_u2, 6, 6)
        n = self.n
        m = np.arange(self.grid.num_u2)
        idx = np.stack(
            [
                self.mid_left,
                self.mid_right,
                self.n1 + m,
                n + self.mid_left,
                n + self.mid_right,
                n + self.n1 + m,
            ],
            axis=-1,
        )
        rows = np.repeat(idx, 6, axis=1).ravel()
        cols = np.tile(idx, (1, 6)).ravel()
        return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(2 * n, 2 * n)).tocsr()

    # -- action / gradient ---------------------------------------------------

    def psi(self, f):
        return self.nonlinear_integral(f, "F")

    def action(self, f):
        """Phi(f); the split-norm and quadratic-form expressions are cross-checked."""
        pos, neg = self.dec.split_norms_sq(f)
        qf = self.dec.quad_form(f)
        scale = max(abs(pos) + abs(neg), 1.0)
        if abs((pos - neg) - qf) > 1e-10 * scale:
            raise SolverError(
                f"spectral identity violated: ||u+||^2 - ||u-||^2 = {pos - neg:.15e} "
                f"but <A u, u> = {qf:.15e}"
            )
        l2sq = norm_lp(f, 2) ** 2
        return 0.5 * (pos - neg) + 0.5 * self.params.omega * l2sq - self.psi(f)

    def gradient(self, f):
        """Quadrature-inner-product gradient: A f + omega f - F_u(., f)."""
        vec = f.to_vector()
        g = self._nonlinear_grad_complex(vec) / self.grid.weights
        out = self.op.matvec(vec) + self.params.omega * vec - g
        return SpinorField.from_vector(self.grid, out)

    def residual_norm(self, f):
        g = self.gradient(f)
        return float(np.sqrt(np.sum(self.grid.weights * np.abs(g.to_vector()) ** 2)))

    # -- realified linear algebra for Newton ---------------------------------

    def _realified_linear(self):
        if self._rk is None:
            K = self.op.core.tocsr()
            W = sp.diags(self.grid.weights)
            A = K + self.params.omega * W
            self._rk = sp.bmat([[A.real, -A.imag], [A.imag, A.real]]).tocsr()
        return self._rk

    def _weighted_residual_real(self, vec):
        rc = (self.op.core @ vec) + self.params.omega * self.grid.weights * vec
        rc = rc - self._nonlinear_grad_complex(vec)
        return np.concatenate([rc.real, rc.imag])


@dataclass
class BoundState:
    field: SpinorField
    omega: float
    residual: float
    action: float
    fhat_integral: float
    nodes_per_edge: int
    closure_cells: tuple
    iterations: int
    init_label: str = ""

    def summary(self):
        return {
            "omega": self.omega,
            "residual": self.residual,
            "action": self.action,
            "fhat_integral": self.fhat_integral,
            "nodes_per_edge": self.nodes_per_edge,
            "closure_cells": list(self.closure_cells),
            "iterations": self.iterations,
            "init": self.init_label,
        }


def orbit_misfit(closure, u1, u2):
    """min over translations k and phases of ||u2 - e^{i theta} k*u1||_{L^2}.

    The optimal phase for fixed k is the argument of <k*u1, u2>; the
    difference norm is formed directly rather than via the polarization
    identity, which would lose half the significant digits to
    cancellation for near-identical states.
    """
    grid = u1.grid
    n2 = norm_lp(u2, 2)
    best = np.inf
    for k in closure.cells:
        t = orbit_translate(closure, grid, k, u1)
        ip = inner(t, u2)
        if abs(ip) > 0:
            t = (ip / abs(ip)) * t
        best = min(best, norm_lp(u2 - t, 2))
    return float(best)


def orbit_distance(closure, u1, u2):
    """Relative distance of u2 from the phase/translation orbit of u1.

    Normalized by the larger of the two norms; zero exactly when the
    states are gauge/translation copies of each other.
    """
    scale = max(norm_lp(u1, 2), norm_lp(u2, 2))
    if scale == 0:
        return 0.0
    return orbit_misfit(closure, u1, u2) / scale


def _cell_coordinate(ctx):
    """Per-dof position along generator 1 in cell units.

    Crossing edges interpolate linearly from their cell index to the next;
    non-crossing edges (stubs, rungs) sit at their cell's coordinate.  The
    resulting envelope profiles are exactly reflection symmetric about a
    vertex, which keeps Newton on the node-centered solution branch at
    every resolution.
    """
    from .graphs import BlochCell

    grid = ctx.grid
    bloch = BlochCell(ctx.closure.periodic)
    coord = np.zeros(ctx.n)
    n1 = grid.num_u1
    for e in range(grid.graph.num_edges):
        k = float(ctx.closure.cell_of_edge[e])
        ce = int(ctx.closure.edge_orbit[e])
        wt, wh = bloch.windings[ce]
        t0 = k + float(wt[0])
        t1 = k + float(wh[0])
        ell = grid.graph.edges[e].length
        coord[grid.node_ids[e]] = t0 + (t1 - t0) * grid.node_x(e) / ell
        coord[n1 + grid.mids(e)] = t0 + (t1 - t0) * grid.mid_x(e) / ell
    return coord


def _band_edge_init(ctx, scale=1.0, band_offset=0, envelope_cells=None):
    """Band-edge Bloch mode under a localized envelope, amplitude line-searched.

    Bound states bifurcate from band edges as envelope-modulated edge
    modes; without the envelope the iteration stays in the
    translation-symmetric subspace and lands on the periodic branch.
    envelope_cells = None picks a width of a few cells; pass 0 to disable.
    """
    dec = ctx.dec
    if dec.i_plus.size <= band_offset:
        raise SolverError("not enough positive eigenvalues for band-edge seeding")
    order = np.argsort(dec.lams[dec.i_plus])
    idx = dec.i_plus[order[band_offset]]
    phi = dec.eigenfield(int(idx))
    phi = (1.0 / norm_lp(phi, 2)) * phi
    n_cells = len(ctx.closure.cells)
    if envelope_cells is None:
        # gap states decay like exp(-sqrt(a^2 - omega^2) dist); start from
        # an envelope of about that width rather than one scaling with N
        kappa = np.sqrt(max(ctx.params.a**2 - ctx.params.omega**2, 1e-12))
        envelope_cells = min(max(1.5, 2.0 / kappa), n_cells / 4.0)
    if envelope_cells:
        coord = _cell_coordinate(ctx)
        center = n_cells // 2
        dist = np.minimum(np.abs(coord - center), n_cells - np.abs(coord - center))
        env = np.exp(-((dist / envelope_cells) ** 2))
        vec = phi.to_vector() * env
        phi = SpinorField.from_vector(ctx.grid, vec)
    phi = _amplitude_search(ctx, phi, scale=scale)
    return phi, f"band_edge_mode(scale={scale},offset={band_offset})"


def _amplitude_search(ctx, f, scale=1.0):
    """Pick the amplitude where the nonlinearity balances the linear gap.

    Minimizes ||G(t f)|| / t over a log grid; plain ||G|| would always
    prefer the trivial branch t -> 0.
    """
    f = (1.0 / norm_lp(f, 2)) * f
    ts = scale * np.geomspace(0.05, 40.0, 60)
    costs = [ctx.residual_norm(t * f) / t for t in ts]
    return ts[int(np.argmin(costs))] * f


def _vertex_distances(graph, source_edge):
    """Arclength distance from the midpoint of source_edge to every vertex."""
    import heapq

    rec = graph.edges[source_edge]
    dist = np.full(graph.num_vertices, np.inf)
    heap = [(rec.length / 2.0, rec.tail), (rec.length / 2.0, rec.head)]
    while heap:
        d, v = heapq.heappop(heap)
        if d >= dist[v]:
            continue
        dist[v] = d
        for eid, side in graph.incidence[v]:
            e = graph.edges[eid]
            w = e.head if side == 0 else e.tail
            if d + e.length < dist[w]:
                heapq.heappush(heap, (d + e.length, w))
    return dist


def _bump_init(ctx, edge, width=0.5, amp=1.0, fit_amplitude=True):
    """Band-edge mode under a Gaussian of graph distance from the given edge.

    A bare first-component Gaussian lacks the spinor structure of gap
    states (both components are order one in the middle of the gap), so
    the envelope modulates the lowest positive eigenvector instead; the
    center sits at the chosen edge's midpoint, which selects the
    edge-centered solution families.
    """
    grid = ctx.grid
    graph = grid.graph
    dec = ctx.dec
    order = np.argsort(dec.lams[dec.i_plus])
    phi = dec.eigenfield(int(dec.i_plus[order[0]]))
    phi = (1.0 / norm_lp(phi, 2)) * phi
    vd = _vertex_distances(graph, edge)
    env = np.zeros(ctx.n)
    n1 = grid.num_u1
    for e in range(graph.num_edges):
        rec = graph.edges[e]

        def dist_of(xs):
            d = np.minimum(vd[rec.tail] + xs, vd[rec.head] + (rec.length - xs))
            if e == edge:
                d = np.minimum(d, np.abs(xs - rec.length / 2.0))
            return d

        env[grid.node_ids[e]] = np.exp(-((dist_of(grid.node_x(e)) / width) ** 2))
        env[n1 + grid.mids(e)] = np.exp(-((dist_of(grid.mid_x(e)) / width) ** 2))
    f = SpinorField.from_vector(grid, phi.to_vector() * env)
    if fit_amplitude:
        f = _amplitude_search(ctx, f, scale=amp)
    else:
        f = amp * f
    return f, f"bump(edge={edge},width={width},amp={amp})"


def _bump_pair_init(ctx, width=1.0, separation=None):
    """Antisymmetric two-bump envelope on the band-edge mode (twisted pairs)."""
    dec = ctx.dec
    order = np.argsort(dec.lams[dec.i_plus])
    phi = dec.eigenfield(int(dec.i_plus[order[0]]))
    phi = (1.0 / norm_lp(phi, 2)) * phi
    coord = _cell_coordinate(ctx)
    n_cells = len(ctx.closure.cells)
    if separation is None:
        separation = n_cells / 2.0
    c1 = n_cells / 2.0 - separation / 2.0
    c2 = n_cells / 2.0 + separation / 2.0
    prof = np.exp(-(((coord - c1) / width) ** 2)) - np.exp(-(((coord - c2) / width) ** 2))
    f = SpinorField.from_vector(ctx.grid, phi.to_vector() * prof)
    f = _amplitude_search(ctx, f)
    return f, f"bump_pair(width={width},separation={separation})"


def _resolve_init(ctx, init):
    if isinstance(init, SpinorField):
        return init.copy(), "given"
    if isinstance(init, dict):
        kind = init.get("kind")
        if kind == "band_edge_mode":
            return _band_edge_init(
                ctx,
                scale=init.get("scale", 1.0),
                band_offset=init.get("band_offset", 0),
                envelope_cells=init.get("envelope_cells"),
            )
        if kind == "bump":
            return _bump_init(
                ctx,
                edge=init["edge"],
                width=init.get("width", 0.5),
                amp=init.get("amp", 1.0),
                fit_amplitude=init.get("fit_amplitude", True),
            )
        if kind == "bump_pair":
            return _bump_pair_init(
                ctx,
                width=init.get("width", 1.0),
                separation=init.get("separation"),
            )
        if kind == "zero":
            return SpinorField(ctx.grid), "zero"
    raise SolverError(f"unrecognized initializer {init!r}")


def _newton(ctx, u0, tol, max_iter, lm_lambda=1e-3):
    """Gauge-fixed Newton with a least-squares Levenberg-Marquardt fallback.

    The phase orbit is fixed by the bordered constraint Im <u_ref, u> = 0
    (u_ref = initial iterate).  The plain bordered step gives quadratic
    local convergence; when it fails to reduce the residual (the Jacobian
    is indefinite, and near the discrete translation residue the damped
    square system can produce ascent directions), the step is taken on
    the Gauss-Newton normal equations of [R_w; constraint] instead, which
    descends the merit function whenever its gradient is nonzero.
    """
    n = ctx.n
    grid = ctx.grid
    W2 = np.concatenate([grid.weights, grid.weights])
    D = sp.diags(W2)
    vec = u0.to_vector()
    x = np.concatenate([vec.real, vec.imag])
    lin = ctx._realified_linear()
    ref = vec.copy()  # phase gauge anchor

    def residual_of(x_):
        z = x_[:n] + 1j * x_[n:]
        return ctx.residual_norm(SpinorField.from_vector(grid, z))

    def constraint_of(x_):
        z = x_[:n] + 1j * x_[n:]
        return float(np.sum(grid.weights * (ref.real * z.imag - ref.imag * z.real)))

    cvec = np.concatenate([-grid.weights * ref.imag, grid.weights * ref.real])
    res = residual_of(x)
    lam = lm_lambda
    it = 0
    while res > tol:
        if it >= max_iter:
            raise MaxIterationsExceeded(f"residual {res:.3e} after {max_iter} iterations")
        z = x[:n] + 1j * x[n:]
        Rw = ctx._weighted_residual_real(z)
        cons = constraint_of(x)
        J = (lin - ctx._nonlinear_hessian_real(z)).tocsr()
        accepted = False

        def try_step(step):
            nonlocal x, res, accepted
            for frac in (1.0, 0.5, 0.25):
                x_new = x + frac * step
                res_new = residual_of(x_new)
                if res_new < res or res_new < tol:
                    x, res, accepted = x_new, res_new, True
                    return True
            return False

        # tier 1: plain bordered Newton (quadratic convergence locally)
        try:
            Jb = sp.bmat([[J, cvec[:, None]], [cvec[None, :], None]], format="csc")
            sol = spla.splu(Jb).solve(np.concatenate([-Rw, [-cons]]))
            try_step(sol[:-1])
        except RuntimeError:
            pass

        # tier 2: damped square system, a cheap trust-region surrogate
        if not accepted:
            for _ in range(6):
                try:
                    Jb = sp.bmat(
                        [[J + lam * D, cvec[:, None]], [cvec[None, :], None]], format="csc"
                    )
                    sol = spla.splu(Jb).solve(np.concatenate([-Rw, [-cons]]))
                except RuntimeError:
                    lam = max(lam, 1e-8) * 10.0
                    continue
                if try_step(sol[:-1]):
                    lam = max(lam * 0.25, 1e-12)
                    break
                lam = max(lam, 1e-10) * 8.0

        # tier 3: Gauss-Newton/LM on the merit |R_w|^2 + cons^2, a true
        # descent method for the indefinite Jacobian; the rank-1 gauge row
        # enters through Sherman-Morrison.  Fresh damping ladder: the
        # square-system lambda is meaningless on the squared Jacobian.
        if not accepted:
            merit = float(Rw @ Rw + cons * cons)
            lam3 = 1e-8
            for _ in range(25):
                A = (J @ J + lam3 * D).tocsc()
                try:
                    lu = spla.splu(A)
                except RuntimeError:
                    lam3 *= 10.0
                    continue
                y = lu.solve(-(J @ Rw + cvec * cons))
                w = lu.solve(cvec)
                step = y - w * (cvec @ y) / (1.0 + cvec @ w)
                x_new = x + step
                Rw_new = ctx._weighted_residual_real(x_new[:n] + 1j * x_new[n:])
                cons_new = constraint_of(x_new)
                merit_new = float(Rw_new @ Rw_new + cons_new * cons_new)
                if merit_new < merit:
                    x = x_new
                    res = residual_of(x)
                    lam = lm_lambda
                    accepted = True
                    break
                lam3 *= 10.0
            if not accepted:
                raise MaxIterationsExceeded(f"damping stalled at residual {res:.3e}")
        it += 1
    z = x[:n] + 1j * x[n:]
    return SpinorField.from_vector(ctx.grid, z), res, it


def solve_bound_state(
    ctx,
    init,
    tol=1e-9,
    max_iter=80,
    deflation=(),
    distinct_threshold=0.1,
    retry_inits=(),
):
    """Newton solve for a nontrivial critical point outside deflated orbits.

    `init` is a SpinorField or {'kind': 'band_edge_mode'|'bump'|...} spec;
    `deflation` lists BoundStates whose phase/translation orbits are
    rejected, in which case the retry initializers are tried in order.
    """
    if abs(ctx.params.omega) >= ctx.params.a:
        raise SolverError("frequency outside the spectral gap")
    tried = [init] + list(retry_inits)
    last_error = None
    for attempt in tried:
        u0, label = _resolve_init(ctx, attempt)
        # amplitude rescale ladder: the balance-point seed can sit inside
        # the trivial basin; from above the separatrix Newton contracts
        # onto the nontrivial branch
        u = None
        for mult in (1.0, 1.6, 2.56):
            try:
                u, res, it = _newton(ctx, mult * u0, tol, max_iter)
            except SolverError as exc:
                last_error = exc
                continue
            if norm_lp(u, 2) < 1e-6:
                last_error = ConvergedToZero("iteration collapsed onto the trivial solution")
                u = None
                continue
            break
        if u is None:
            continue
        clash = False
        for known in deflation:
            if orbit_distance(ctx.closure, known.field, u) <= distinct_threshold:
                clash = True
                break
        if clash:
            last_error = DeflationExhausted("converged into a deflated orbit")
            continue
        return BoundState(
            field=u,
            omega=ctx.params.omega,
            residual=res,
            action=ctx.action(u),
            fhat_integral=ctx.nonlinear_integral(u, "Fhat"),
            nodes_per_edge=int(ctx.grid.n.max()),
            closure_cells=tuple(int(v) for v in ctx.closure.N),
            iterations=it,
            init_label=label,
        )
    if isinstance(last_error, SolverError):
        raise last_error
    raise DeflationExhausted("no initializer produced a new state")


def default_deflation_inits(ctx, count=10):
    """Seed sequence for multiplicity runs.

    Band-edge envelopes, per-cell-edge bumps (distinct centering relative
    to the vertices), twisted two-bump pairs, and excited band modes.
    """
    inits = [{"kind": "band_edge_mode", "scale": 1.0}]
    cell = ctx.closure.periodic.cell
    mid_cell = len(ctx.closure.cells) // 2
    for ce in range(cell.num_edges):
        edge = int(
            np.flatnonzero(
                (ctx.closure.edge_orbit == ce) & (ctx.closure.cell_of_edge == mid_cell)
            )[0]
        )
        for width in (0.6, 0.35):
            inits.append({"kind": "bump", "edge": edge, "width": width})
    inits.append({"kind": "bump_pair", "width": 1.0})
    for off in (1, 2):
        inits.append({"kind": "band_edge_mode", "scale": 1.0, "band_offset": off})
    return inits[:count]


def solve_distinct_states(ctx, count, tol=1e-9, max_iter=80, distinct_threshold=0.1, extra_inits=()):
    """Deflated multi-solve returning up to `count` geometrically distinct states."""
    inits = list(extra_inits) + default_deflation_inits(ctx)
    found = []
    for init in inits:
        if len(found) >= count:
            break
        try:
            s = solve_bound_state(
                ctx,
                init,
                tol=tol,
                max_iter=max_iter,
                deflation=found,
                distinct_threshold=distinct_threshold,
            )
        except SolverError:
            continue
        found.append(s)
    if len(found) < count:
        raise DeflationExhausted(
            f"found {len(found)} distinct states, wanted {count}"
        )
    return found


def linking_diagnostics(
    ctx,
    rho_grid=None,
    sample_count=1000,
    seed=0,
    small_rho_grid=None,
    r1_initial=1.0,
):
    """Sampled linking geometry of Phi.

    Reports the sampled min of Phi on spheres in the positive subspace
    (eta at the best radius rho), the max of Phi on negative-subspace
    spheres and on the boundary of the linking cylinder Q spanned by the
    negative subspace and the lowest positive mode, and the small-rho
    quadratic slope.  Failures are reported in the dict, not raised.
    """
    dec = ctx.dec
    rng = np.random.default_rng(seed)
    if rho_grid is None:
        rho_grid = np.geomspace(0.05, 5.0, 12)
    if small_rho_grid is None:
        small_rho_grid = np.geomspace(1e-4, 1e-2, 5)
    lam_abs = np.abs(dec.lams)

    def random_unit(idx):
        c = np.zeros(dec.lams.size, dtype=complex)
        c[idx] = rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)
        c /= np.sqrt(np.sum(lam_abs[idx] * np.abs(c[idx]) ** 2))
        return c

    def phi_of_coeffs(c):
        return ctx.action(dec.synthesize(c))

    n_dirs = max(sample_count // max(len(rho_grid), 1), 32)
    dirs = [random_unit(dec.i_plus) for _ in range(n_dirs)]
    min_phi = []
    for rho in rho_grid:
        min_phi.append(min(phi_of_coeffs(rho * c) for c in dirs))
    min_phi = np.array(min_phi)
    i_star = int(np.argmax(min_phi))
    eta = float(min_phi[i_star])
    rho_star = float(rho_grid[i_star])

    small_dirs = dirs[: max(16, n_dirs // 4)]
    small_min = np.array(
        [min(phi_of_coeffs(rho * c) for c in small_dirs) for rho in small_rho_grid]
    )
    slope = np.nan
    if np.all(small_min > 0):
        slope = float(
            np.polyfit(np.log(np.asarray(small_rho_grid)), np.log(small_min), 1)[0]
        )

    # negative-subspace spheres: Phi should sit below the quadratic envelope
    a = ctx.params.a
    w = abs(ctx.params.omega)
    yminus_max = -np.inf
    yminus_margin = -np.inf
    for _ in range(max(sample_count // 4, 32)):
        rho = rng.uniform(0.2, 4.0)
        c = rho * random_unit(dec.i_minus)
        val = phi_of_coeffs(c)
        bound = -((a - w) / (2 * a)) * rho**2
        yminus_max = max(yminus_max, val)
        yminus_margin = max(yminus_margin, val - bound)

    # doubling search for the cylinder radius R1
    order = np.argsort(dec.lams[dec.i_plus])
    e1_idx = int(dec.i_plus[order[0]])

    def max_on_dq(R, samples):
        worst = -np.inf
        for _ in range(samples):
            xi = rng.uniform(0.0, 1.0)
            c = np.sqrt(max(1.0 - xi**2, 0.0)) * R * random_unit(dec.i_minus)
            c[e1_idx] += xi * R / np.sqrt(lam_abs[e1_idx])
            worst = max(worst, phi_of_coeffs(c))
        return worst

    R1 = float(r1_initial)
    dq_max = np.inf
    for _ in range(40):
        dq_max = max_on_dq(R1, sample_count)
        if dq_max <= 0:
            break
        R1 *= 2.0

    return {
        "rho_grid": np.asarray(rho_grid).tolist(),
        "min_phi_per_rho": min_phi.tolist(),
        "rho": rho_star,
        "eta": eta,
        "eta_positive": bool(eta > 0),
        "small_rho_slope": slope,
        "y_minus_max_phi": float(yminus_max),
        "y_minus_margin": float(yminus_margin),
        "R1": R1,
        "dq_max_phi": float(dq_max),
        "dq_nonpositive": bool(dq_max <= 0),
        "seed": seed,
        "sample_count": sample_count,
    }


def residual_report(ctx, state):
    """Strong-form and trace diagnostics for a computed state."""
    f = state.field
    g = ctx.gradient(f)
    grid = ctx.grid
    per_edge = []
    gv = g.to_vector()
    for e in range(grid.graph.num_edges):
        ids = grid.node_ids[e][1:-1]
        m = grid.mids(e)
        r2 = float(
            np.sum(grid.w1[ids] * np.abs(gv[ids]) ** 2)
            + np.sum(grid.w2[m] * np.abs(gv[grid.num_u1 + m]) ** 2)
        )
        per_edge.append(np.sqrt(r2))
    vc = check_vertex_conditions(f)
    pos, neg = ctx.dec.split_norms_sq(f)
    # per-cell amplitude profile for decay inspection
    amp = np.zeros(len(ctx.closure.cells))
    for e in range(grid.graph.num_edges):
        k = int(ctx.closure.cell_of_edge[e])
        ids = grid.node_ids[e]
        m = grid.mids(e)
        local = max(
            float(np.abs(f.u1[ids]).max()),
            float(np.abs(f.u2[m]).max()),
        )
        amp[k] = max(amp[k], local)
    l2 = norm_lp(f, 2)
    return {
        "residual": state.residual,
        "per_edge_residual": per_edge,
        "vertex_defect_max": vc["max_defect"],
        "action": state.action,
        "fhat_integral": state.fhat_integral,
        "action_minus_fhat": state.action - state.fhat_integral,
        "norm_split_sq": {"plus": pos, "minus": neg},
        "l2_norm": l2,
        "energy_norm_sq": pos + neg,
        "coercivity_margin": pos + neg - ctx.params.a * l2**2,
        "cell_amplitude": amp.tolist(),
        "decay_ratio": float(amp.min() / amp.max()) if amp.max() > 0 else 0.0,
    }
