"""Eigendecompositions, Bloch band sweeps, and spectral verification tools."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .fields import GraphGrid, SpinorField
from .graphs import BlochCell, GraphError, close_periodically
from .operator import assemble

DENSE_LIMIT = 4000
ZERO_TOL_FACTOR = 1e-9


class SpectralError(RuntimeError):
    pass


class SpectralDecomposition:
    """Eigenpairs of a Dirac operator, orthonormal in the weighted inner product.

    vecs may be None for an eigenvalue-only decomposition; coefficient
    operations then raise.
    """

    def __init__(self, op, lams, vecs, complete):
        self.op = op
        order = np.argsort(lams)
        self.lams = np.asarray(lams)[order]
        self.vecs = None if vecs is None else np.asarray(vecs)[:, order]
        self.complete = complete
        scale = float(np.abs(self.lams).max()) if self.lams.size else 1.0
        ztol = ZERO_TOL_FACTOR * max(scale, 1.0)
        self.i_plus = np.flatnonzero(self.lams > ztol)
        self.i_minus = np.flatnonzero(self.lams < -ztol)
        self.i_zero = np.flatnonzero(np.abs(self.lams) <= ztol)
        self.zero_tol = ztol

    @property
    def grid(self):
        return self.op.grid

    def require_vectors(self):
        if self.vecs is None:
            raise SpectralError("decomposition was computed without eigenvectors")

    def eigenfield(self, i):
        self.require_vectors()
        return SpinorField.from_vector(self.grid, self.vecs[:, i])

    def coeffs(self, f):
        """Expansion coefficients <phi_i, f> in the weighted inner product."""
        self.require_vectors()
        vec = f.to_vector() if isinstance(f, SpinorField) else np.asarray(f)
        return self.vecs.conj().T @ (self.op.weights * vec)

    def synthesize(self, c):
        return SpinorField.from_vector(self.grid, self.vecs @ c)

    def require_complete(self):
        if not self.complete:
            raise SpectralError("operation requires a complete decomposition")

    def norm_y_sq(self, f):
        """Energy norm ||f||^2 = <|A| f, f>."""
        self.require_complete()
        return float(np.sum(np.abs(self.lams) * np.abs(self.coeffs(f)) ** 2))

    def split_norms_sq(self, f):
        """(||f^+||^2, ||f^-||^2) over the positive/negative spectral subspaces."""
        self.require_complete()
        c2 = np.abs(self.coeffs(f)) ** 2
        pos = float(np.sum(np.abs(self.lams[self.i_plus]) * c2[self.i_plus]))
        neg = float(np.sum(np.abs(self.lams[self.i_minus]) * c2[self.i_minus]))
        return pos, neg

    def project(self, f, sign):
        """Projection onto the positive (sign=+1) or negative (sign=-1) subspace."""
        self.require_complete()
        idx = self.i_plus if sign > 0 else self.i_minus
        c = self.coeffs(f)
        mask = np.zeros_like(c)
        mask[idx] = c[idx]
        return self.synthesize(mask)

    def quad_form(self, f):
        """<A f, f> via the spectral calculus."""
        self.require_complete()
        return float(np.sum(self.lams * np.abs(self.coeffs(f)) ** 2))

    def residual_check(self, tol=1e-10, sample=None):
        """Max relative eigen-residual ||A phi - lam phi|| / ||A||."""
        self.require_vectors()
        scale = max(float(np.abs(self.lams).max()), 1.0) if self.lams.size else 1.0
        idx = range(self.lams.size) if sample is None else sample
        worst = 0.0
        for i in idx:
            v = self.vecs[:, i]
            r = self.op.matvec(v) - self.lams[i] * v
            rn = np.sqrt(np.sum(self.op.weights * np.abs(r) ** 2))
            worst = max(worst, rn / scale)
        return worst, worst <= tol


def decompose(op, m="all", tol=1e-10, vectors=True):
    """Eigendecomposition of the assembled operator.

    Dense below DENSE_LIMIT dofs; shift-invert Lanczos around zero above,
    returning the m eigenvalues nearest zero.  Eigenvectors come back
    orthonormal under the quadrature inner product; vectors=False skips
    them (and the residual check) for eigenvalue-only work like gap scans.
    """
    size = op.size
    sqw = np.sqrt(op.weights)
    if size <= DENSE_LIMIT:
        H = (op.symmetrized()).toarray()
        if not vectors:
            lams = scipy.linalg.eigvalsh(H)
            return SpectralDecomposition(op, lams, None, complete=True)
        lams, Y = scipy.linalg.eigh(H)
        vecs = Y / sqw[:, None]
        dec = SpectralDecomposition(op, lams, vecs, complete=True)
        if m != "all" and m < size:
            keep = np.argsort(np.abs(dec.lams))[:m]
            keep.sort()
            dec = SpectralDecomposition(op, dec.lams[keep], dec.vecs[:, keep], complete=False)
    else:
        if m == "all":
            raise SpectralError("complete decomposition only available below the dense limit")
        H = op.symmetrized()
        try:
            lams, Y = scipy.sparse.linalg.eigsh(H, k=m, sigma=0.0, which="LM")
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise SpectralError(f"shift-invert iteration did not converge: {exc}") from exc
        vecs = Y / sqw[:, None]
        dec = SpectralDecomposition(op, lams, vecs, complete=False)
    worst, ok = dec.residual_check(tol=tol, sample=range(0, dec.lams.size, max(1, dec.lams.size // 16)))
    if not ok:
        raise SpectralError(f"eigensolve residual {worst:.3e} exceeds {tol:.1e}")
    return dec


@dataclass
class BandStructure:
    thetas: list
    bands: np.ndarray  # (num_thetas, num_bands), sorted ascending per theta
    a: float
    sup_v: float
    dim: int

    @property
    def min_abs_lambda(self):
        return float(np.abs(self.bands).min())

    @property
    def gap(self):
        neg = self.bands[self.bands < 0]
        pos = self.bands[self.bands > 0]
        lo = float(neg.max()) if neg.size else -np.inf
        hi = float(pos.min()) if pos.size else np.inf
        return lo, hi


def band_sweep(periodic, nodes_per_edge, params, thetas, num_bands=8):
    """Floquet sweep: assemble the Bloch-twisted cell per theta and decompose.

    Each entry of `thetas` is a scalar (d=1) or a d-tuple in [0, 2 pi)^d.
    Returns the num_bands eigenvalues nearest zero per sample.
    """
    cell = BlochCell(periodic)
    grid = GraphGrid(cell.graph, nodes_per_edge)
    rows = []
    norm_thetas = []
    for th in thetas:
        th = np.atleast_1d(np.asarray(th, dtype=float))
        norm_thetas.append(tuple(th.tolist()))
        op = assemble(cell, grid, params, theta=th)
        H = op.symmetrized().toarray()
        lams = scipy.linalg.eigvalsh(H)
        k = min(num_bands, lams.size)
        nearest = np.sort(lams[np.argsort(np.abs(lams))[:k]])
        rows.append(nearest)
    bands = np.array(rows)
    return BandStructure(
        thetas=norm_thetas,
        bands=bands,
        a=params.a,
        sup_v=params.V.sup(periodic.cell),
        dim=periodic.dim,
    )


def verify_gap(bands, params, tol_h=0.0):
    """Check the spectral-gap bounds a <= min|lambda| <= a + sup V.

    tol_h should be the refinement-estimated discretization error of the
    band values (see estimate_band_tol).
    """
    m = bands.min_abs_lambda
    a = bands.a
    sup_v = bands.sup_v
    return {
        "min_abs_lambda": m,
        "a": a,
        "sup_V": sup_v,
        "lemma31_pass": bool(m >= a - tol_h),
        "lemma33_pass": bool(m <= a + sup_v + tol_h),
        "tol_h": float(tol_h),
    }


def estimate_band_tol(periodic, nodes_per_edge, params, thetas, num_bands=8):
    """Discretization error estimate from one n -> 2n refinement step.

    For a second-order scheme the fine-grid error is about one third of
    the coarse/fine gap; a 2x safety factor is applied.
    """
    coarse = band_sweep(periodic, nodes_per_edge, params, thetas, num_bands)
    fine = band_sweep(periodic, 2 * nodes_per_edge, params, thetas, num_bands)
    d = float(np.abs(coarse.bands - fine.bands).max())
    return fine, max(2.0 * d / 3.0, 1e-12)


# ---------------------------------------------------------------------------
# transfer-matrix secular oracle
# ---------------------------------------------------------------------------


def _edge_cs(lam, m, ell):
    """Entire solution kernels: c = cos(kappa ell), s = sin(kappa ell)/kappa.

    kappa^2 = lam^2 - m^2; both functions are real analytic in lam and
    valid in the oscillatory and evanescent regimes.
    """
    ksq = lam * lam - m * m
    if ksq > 0:
        k = np.sqrt(ksq)
        return np.cos(k * ell), np.sin(k * ell) / k
    if ksq < 0:
        k = np.sqrt(-ksq)
        return np.cosh(k * ell), np.sinh(k * ell) / k
    return 1.0, ell


@dataclass
class SecularResult:
    eigenvalues: np.ndarray
    suspect_intervals: list
    mesh_step: float


def _secular_sign_value(lam, theta_vec, edges):
    """Sign and log-magnitude of det(S) * prod_e s_e (lam + m_e).

    S is the Hermitian vertex-reduced secular matrix; the product clears
    its poles, so sign changes locate eigenvalues with vertex-supported
    eigenfunctions.
    """
    nv = edges["nv"]
    S = np.zeros((nv, nv), dtype=complex)
    logfac = 0.0
    sgnfac = 1.0
    for vt, vh, ell, m, dw in edges["list"]:
        c, s = _edge_cs(lam, m, ell)
        d = s * (lam + m)
        if d == 0.0:
            return 0.0, -np.inf
        phi = np.exp(1j * float(theta_vec @ dw))
        S[vt, vt] += -c / d
        S[vh, vh] += -c / d
        S[vt, vh] += phi / d
        S[vh, vt] += np.conj(phi) / d
        logfac += np.log(abs(d))
        sgnfac *= np.sign(d)
    sign, logabs = np.linalg.slogdet(S)
    if not np.isfinite(logabs):
        return 0.0, -np.inf
    s_re = float(np.real(sign))
    if s_re == 0.0:
        return 0.0, logabs + logfac
    return float(np.sign(s_re) * sgnfac), logabs + logfac


def _transfer_condition_matrix(lam, theta_vec, bloch, masses):
    """Full vertex-condition system C(lam, theta) on exact edge solutions.

    Unknowns are the initial spinor (u1(0), u2(0)) per quotient edge; the
    edge propagator is exp(x M) = c I + s M with M = i lam s1 - (a+V) s2.
    Rows stack first-component continuity and the signed trace sum per
    vertex; an eigenvalue is a lam where C is rank deficient.
    """
    graph = bloch.graph
    ne = graph.num_edges
    rows = []
    for v in range(graph.num_vertices):
        inc = []
        for eid, side in graph.incidence[v]:
            ell = graph.edges[eid].length
            m = masses[eid]
            wt, wh = bloch.windings[eid]
            if side == 0:
                T = np.eye(2, dtype=complex)
                w = wt
                sgn = +1.0
            else:
                c, s = _edge_cs(lam, m, ell)
                M = 1j * np.array([[0.0, lam + m], [lam - m, 0.0]])
                T = c * np.eye(2) + s * M
                w = wh
                sgn = -1.0
            ph = np.exp(-1j * float(theta_vec @ w))
            inc.append((eid, ph * T[0], ph * T[1], sgn))
        # continuity of the first trace against the reference incidence
        e0, t1_0, _, _ = inc[0]
        for eid, t1, _, _ in inc[1:]:
            row = np.zeros(2 * ne, dtype=complex)
            row[2 * eid : 2 * eid + 2] += t1
            row[2 * e0 : 2 * e0 + 2] -= t1_0
            rows.append(row)
        krow = np.zeros(2 * ne, dtype=complex)
        for eid, _, t2, sgn in inc:
            krow[2 * eid : 2 * eid + 2] += sgn * t2
        rows.append(krow)
    return np.array(rows)


def secular_bands(periodic, params, theta=0.0, lam_range=None, mesh_step=None, refine_tol=1e-12):
    """Exact eigenvalues from the transfer-matrix secular equation.

    Requires piecewise-constant V.  Roots are located by sign-change
    bracketing of the pole-cleared secular determinant on a lam mesh and
    refined by bisection; vertex-vanishing (flat-band) states invisible to
    the reduced determinant are recovered from the resonance candidates
    kappa_e ell_e in pi Z via a rank test of the full condition matrix.
    Intervals where a deep near-zero dip occurs without a sign change are
    reported as possible even-multiplicity roots.
    """
    if not params.V.is_piecewise_constant():
        raise GraphError("secular oracle requires piecewise-constant V")
    bloch = BlochCell(periodic)
    graph = bloch.graph
    a = params.a
    theta_vec = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta_vec.shape != (periodic.dim,):
        raise GraphError("theta has wrong dimension")
    masses = np.array(
        [a + params.V.edge_constant(e) for e in range(graph.num_edges)]
    )
    edges = {
        "nv": graph.num_vertices,
        "list": [
            (
                graph.edges[e].tail,
                graph.edges[e].head,
                graph.edges[e].length,
                masses[e],
                bloch.windings[e][1] - bloch.windings[e][0],
            )
            for e in range(graph.num_edges)
        ],
    }
    if lam_range is None:
        lmax = np.sqrt(masses.max() ** 2 + (7 * np.pi / min(g.length for g in graph.edges)) ** 2)
        lam_range = (-lmax, lmax)
    if mesh_step is None:
        mesh_step = 1e-3 * a

    lo, hi = lam_range
    npts = int(np.ceil((hi - lo) / mesh_step)) + 1
    # half-step offset keeps the mesh off lam = +-m_e style singular points
    mesh = lo + (np.arange(npts) + 0.493) * mesh_step
    mesh = mesh[mesh <= hi]

    vals = np.empty(mesh.size)
    logs = np.empty(mesh.size)
    for i, lam in enumerate(mesh):
        s, lg = _secular_sign_value(lam, theta_vec, edges)
        vals[i] = s
        logs[i] = lg

    roots = []
    for i in range(mesh.size - 1):
        if vals[i] == 0.0:
            roots.append(mesh[i])
            continue
        if vals[i] * vals[i + 1] < 0:
            x0, x1 = mesh[i], mesh[i + 1]
            f0 = vals[i]
            while x1 - x0 > refine_tol:
                xm = 0.5 * (x0 + x1)
                fm, _ = _secular_sign_value(xm, theta_vec, edges)
                if fm == 0.0:
                    x0 = x1 = xm
                    break
                if f0 * fm < 0:
                    x1 = xm
                else:
                    x0, f0 = xm, fm
            roots.append(0.5 * (x0 + x1))

    suspects = []
    finite = np.isfinite(logs)
    for i in range(1, mesh.size - 1):
        if not (finite[i - 1] and finite[i] and finite[i + 1]):
            continue
        if logs[i] < logs[i - 1] - 12 and logs[i] < logs[i + 1] - 12:
            if vals[i - 1] * vals[i + 1] > 0:
                suspects.append((float(mesh[i - 1]), float(mesh[i + 1])))

    # resonance candidates: eigenfunctions vanishing at every vertex
    candidates = set()
    for e in range(graph.num_edges):
        ell = graph.edges[e].length
        m = masses[e]
        n = 1
        while True:
            lam2 = m * m + (n * np.pi / ell) ** 2
            lam = np.sqrt(lam2)
            if lam > max(abs(lo), abs(hi)):
                break
            for cand in (lam, -lam):
                if lo <= cand <= hi:
                    candidates.add(round(cand, 12))
            n += 1
    for cand in sorted(candidates):
        C = _transfer_condition_matrix(cand, theta_vec, bloch, masses)
        sv = np.linalg.svd(C, compute_uv=False)
        if sv[-1] <= 1e-8 * max(sv[0], 1.0):
            roots.append(cand)

    roots = np.array(sorted(roots))
    if roots.size:
        keep = np.ones(roots.size, dtype=bool)
        for i in range(1, roots.size):
            if roots[i] - roots[i - 1] < 1e-9:
                keep[i] = False
        roots = roots[keep]
    return SecularResult(eigenvalues=roots, suspect_intervals=suspects, mesh_step=mesh_step)


# ---------------------------------------------------------------------------
# cutoff test functions (spectral-bottom witnesses)
# ---------------------------------------------------------------------------


def cutoff_test_functions(periodic, cell_counts, params, nodes_per_edge=8):
    """Normalized plateau/ramp spinors (eta_N, 0) on growing closures.

    Returns one record per N with |v'|_2^2 and |A v|_2; the first decays
    like 1/N and the second approaches a + sup V from above, witnessing
    the upper bound on the bottom of |A|'s spectrum.
    """
    if periodic.dim != 1:
        raise GraphError("cutoff construction is defined for d = 1")
    bloch = BlochCell(periodic)
    out = []
    for N in cell_counts:
        closure = close_periodically(periodic, (N,))
        grid = GraphGrid(closure.graph, nodes_per_edge)
        plateau = N // 2

        def profile(j):
            j = j % N
            if j <= plateau:
                return 1.0
            return 0.0

        f = SpinorField(grid)
        for e in range(closure.graph.num_edges):
            k = int(closure.cell_of_edge[e])
            ce = int(closure.edge_orbit[e])
            wt, wh = bloch.windings[ce]
            pt = profile(k + int(wt[0]))
            ph_ = profile(k + int(wh[0]))
            xs = grid.node_x(e) / closure.graph.edges[e].length
            vals = pt + (ph_ - pt) * xs
            ids = grid.node_ids[e]
            f.u1[ids] = vals
        nrm = np.sqrt(np.sum(grid.w1 * np.abs(f.u1) ** 2))
        f.u1 /= nrm
        dsq = 0.0
        for e in range(closure.graph.num_edges):
            ids = grid.node_ids[e]
            d = np.diff(f.u1[ids]) / grid.h[e]
            dsq += float(np.sum(grid.h[e] * np.abs(d) ** 2))
        op = assemble(closure, grid, params)
        av = op.matvec(f.to_vector())
        av_norm = float(np.sqrt(np.sum(grid.weights * np.abs(av) ** 2)))
        out.append(
            {
                "N": int(N),
                "v_prime_sq": dsq,
                "av_norm": av_norm,
                "v_norm": float(np.sqrt(np.sum(grid.w1 * np.abs(f.u1) ** 2))),
            }
        )
    return out


# ---------------------------------------------------------------------------
# fractional calculus and the interpolation-norm identity
# ---------------------------------------------------------------------------


def fractional_apply(dec, s, f):
    """|A|^s f through the spectral calculus; needs the full decomposition."""
    dec.require_complete()
    if not 0 < s <= 1:
        raise SpectralError("fractional power s must lie in (0, 1]")
    c = dec.coeffs(f)
    return dec.synthesize(np.abs(dec.lams) ** s * c)


def k_functional_closed(d, csq, t):
    """K(t, x) = < t D (1 + t D)^{-1} x, x> for diagonal D."""
    return float(np.sum((t * d / (1.0 + t * d)) * csq))


def k_functional_bruteforce(d, coeffs, t, rng, trials=200, scale=0.3):
    """Exact-minimizer value of K(t, x) and the best randomly perturbed split.

    The optimal decomposition is x1 = (1 + tD)^{-1} x, x0 = x - x1;
    random perturbations of x1 must never beat it.
    """
    d = np.asarray(d, dtype=float)
    coeffs = np.asarray(coeffs, dtype=complex)
    x1 = coeffs / (1.0 + t * d)
    x0 = coeffs - x1
    k_exact = float(np.sum(np.abs(x0) ** 2) + t * np.sum(d * np.abs(x1) ** 2))
    best = np.inf
    amp = scale * max(np.sqrt(np.sum(np.abs(x1) ** 2)), 1e-30)
    for _ in range(trials):
        delta = amp * (rng.standard_normal(coeffs.size) + 1j * rng.standard_normal(coeffs.size))
        y1 = x1 + delta * rng.uniform(0.01, 1.0)
        y0 = coeffs - y1
        val = float(np.sum(np.abs(y0) ** 2) + t * np.sum(d * np.abs(y1) ** 2))
        best = min(best, val)
    return k_exact, best


def c_theta_quadrature(theta, smin=1e-16, smax=1e16, npts=2001):
    """C_theta = int_0^inf s^{-theta} / (1 + s) ds by log-substitution trapezoid."""
    tau = np.linspace(np.log(smin), np.log(smax), npts)
    g = np.exp((1.0 - theta) * tau) / (1.0 + np.exp(tau))
    return float(np.trapezoid(g, tau))


def interpolation_identity_check(dec, theta, f, t_grid=None, rng=None):
    """Numerical check of ||x||_theta^2 = C_theta <D^theta x, x> with D = 1 + A^2.

    The K-functional is evaluated in closed form from the spectral
    coefficients and integrated over a log-spaced t grid; the exact
    minimizing decomposition is perturbed randomly at a few t values to
    confirm minimality.
    """
    dec.require_complete()
    if not 0 < theta < 1:
        raise SpectralError("interpolation order theta must lie in (0, 1)")
    if t_grid is None:
        t_grid = np.geomspace(1e-10, 1e10, 400)
    t_grid = np.asarray(t_grid, dtype=float)
    c = dec.coeffs(f)
    csq = np.abs(c) ** 2
    d = 1.0 + dec.lams**2
    tau = np.log(t_grid)
    K = np.array([k_functional_closed(d, csq, t) for t in t_grid])
    lhs = float(np.trapezoid(np.exp(-theta * tau) * K, tau))
    c_th = c_theta_quadrature(theta)
    rhs = c_th * float(np.sum(d**theta * csq))
    minimality_ok = True
    if rng is not None:
        for t in np.geomspace(t_grid[0] * 1e3, t_grid[-1] * 1e-3, 3):
            k_exact, best = k_functional_bruteforce(d, c, t, rng, trials=100)
            if best < k_exact - 1e-10 * max(abs(k_exact), 1.0):
                minimality_ok = False
    return {
        "lhs": lhs,
        "rhs": rhs,
        "ratio": lhs / rhs if rhs else np.inf,
        "C_theta": c_th,
        "minimality_ok": minimality_ok,
    }


# ---------------------------------------------------------------------------
# split parameters and norm-inequality corpus checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitParameters:
    """Eigenvalue window (gamma0, gamma] used for the linking subspaces."""

    gamma0: float
    gamma: float

    def __post_init__(self):
        if not self.gamma0 < self.gamma:
            raise SpectralError("need gamma0 < gamma")

    @classmethod
    def from_problem(cls, params, cell=None, margin=1.0):
        g0 = params.a + abs(params.omega) + params.V.sup(cell)
        return cls(gamma0=g0, gamma=g0 + margin)

    def window_indices(self, dec):
        return np.flatnonzero((dec.lams > self.gamma0) & (dec.lams <= self.gamma))


def _random_coeff_field(dec, idx, rng):
    c = np.zeros(dec.lams.size, dtype=complex)
    c[idx] = rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx))
    return c


def check_norm_inequalities(dec, params, n_samples=100, seed=0, roundoff=1e-12):
    """Corpus check of the coercivity and sandwich norm inequalities.

    For random fields u: a |u|_2^2 <= ||u||^2.  For random u in the
    positive / negative spectral subspaces:
    (a - |w|)/a ||u||^2 <= ||u||^2 +- w |u|_2^2 <= (a + |w|)/a ||u||^2.
    Margins below -roundoff * scale count as violations.
    """
    dec.require_complete()
    rng = np.random.default_rng(seed)
    a = params.a
    w = params.omega
    lam_abs = np.abs(dec.lams)
    all_idx = np.arange(dec.lams.size)
    records = {"lemma34": [], "sandwich_plus": [], "sandwich_minus": []}
    violations = 0
    for _ in range(n_samples):
        c = _random_coeff_field(dec, all_idx, rng)
        csq = np.abs(c) ** 2
        y2 = float(np.sum(lam_abs * csq))
        l2 = float(np.sum(csq))
        margin = y2 - a * l2
        records["lemma34"].append(margin)
        if margin < -roundoff * max(y2, 1.0):
            violations += 1
        for name, idx in (("sandwich_plus", dec.i_plus), ("sandwich_minus", dec.i_minus)):
            cc = _random_coeff_field(dec, idx, rng)
            ccsq = np.abs(cc) ** 2
            y2s = float(np.sum(lam_abs * ccsq))
            l2s = float(np.sum(ccsq))
            for sgn in (+1.0, -1.0):
                mid = y2s + sgn * w * l2s
                lo = (a - abs(w)) / a * y2s
                hi = (a + abs(w)) / a * y2s
                m1 = mid - lo
                m2 = hi - mid
                records[name].append(min(m1, m2))
                if min(m1, m2) < -roundoff * max(y2s, 1.0):
                    violations += 1
    return {
        "violations": violations,
        "min_margin_lemma34": float(np.min(records["lemma34"])),
        "min_margin_sandwich": float(
            np.min(records["sandwich_plus"] + records["sandwich_minus"])
        ),
        "n_samples": n_samples,
    }


def check_window_inequality(dec, split, n_samples=20, seed=0, roundoff=1e-12):
    """gamma0 |u|_2^2 <= ||u||^2 <= gamma |u|_2^2 on the window subspace."""
    dec.require_complete()
    idx = split.window_indices(dec)
    if idx.size == 0:
        return {"violations": 0, "n_samples": 0, "window_dim": 0}
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(n_samples):
        c = _random_coeff_field(dec, idx, rng)
        csq = np.abs(c) ** 2
        y2 = float(np.sum(np.abs(dec.lams) * csq))
        l2 = float(np.sum(csq))
        if y2 < split.gamma0 * l2 - roundoff * max(y2, 1.0):
            violations += 1
        if y2 > split.gamma * l2 + roundoff * max(y2, 1.0):
            violations += 1
    return {"violations": violations, "n_samples": n_samples, "window_dim": int(idx.size)}
