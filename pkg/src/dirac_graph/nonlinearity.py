"""Nonlinear coupling terms and machine checks of their growth hypotheses.

Pointwise values of the spinor are complex arrays of shape (..., 2); real
derivatives are taken after the identification C^2 ~ R^4 in the order
(Re u1, Im u1, Re u2, Im u2).  Both built-in families are gauge invariant
and even: they depend on u only through |u|, with an x-dependent
coefficient in the asymptotically linear case.
"""

from __future__ import annotations

import numpy as np


class HypothesisError(ValueError):
    """A constructed nonlinearity violates one of its structural hypotheses."""


THEOREM_11_SET = ("omega", "V1", "F0", "F1", "F2", "F3", "F4", "F5")
THEOREM_12_SET = ("omega", "V1", "F0", "F1", "F2", "F5", "F6", "F7")
ALL_HYPOTHESES = ("omega", "V1", "F0", "F1", "F2", "F3", "F4", "F5", "F6", "F7")


def _radial_eval(u):
    u = np.asarray(u, dtype=complex)
    r = np.sqrt(np.abs(u[..., 0]) ** 2 + np.abs(u[..., 1]) ** 2)
    return u, r


class Nonlinearity:
    """Radial nonlinearity F(x, u) = phi(b(x), |u|) with derivative evaluators.

    `b` is the coefficient field: a scalar or one value per fundamental
    cell edge (hence exactly cell periodic).  Callers supply the sampled b
    values matching the u samples; the power family ignores them.
    """

    def __init__(self, kind, phi, dphi, d2phi, params, metadata, b=None, uses_b=False):
        self.kind = kind
        self._phi = phi
        self._dphi = dphi
        self._d2phi = d2phi
        self.params = params
        self.metadata = dict(metadata)
        self.b = b
        self.uses_b = uses_b
        self.even = True
        self.gauge_invariant = True

    def _coeff(self, b, shape):
        if not self.uses_b:
            return 1.0
        if b is None:
            if np.isscalar(self.b):
                return float(self.b)
            raise HypothesisError("per-edge coefficient field needs explicit b samples")
        return np.asarray(b, dtype=float)

    def b_values(self, cell_edge_indices):
        """Coefficient samples for the given fundamental-cell edge indices."""
        if not self.uses_b:
            return np.ones(np.shape(cell_edge_indices))
        if np.isscalar(self.b):
            return np.full(np.shape(cell_edge_indices), float(self.b))
        return np.asarray(self.b)[np.asarray(cell_edge_indices, dtype=int)]

    def F(self, u, b=None):
        u, r = _radial_eval(u)
        return self._phi(self._coeff(b, r.shape), r)

    def F_u(self, u, b=None):
        """Real gradient packed as a complex pair: dF/dRe + i dF/dIm per component."""
        u, r = _radial_eval(u)
        coef = self._dphi(self._coeff(b, r.shape), r)  # phi'(r) / r, finite at 0
        return coef[..., None] * u

    def Fhat(self, u, b=None):
        """Fhat = F_u . u / 2 - F; positive away from zero for the built-ins."""
        u, r = _radial_eval(u)
        bb = self._coeff(b, r.shape)
        return 0.5 * self._dphi(bb, r) * r**2 - self._phi(bb, r)

    def F_uu(self, u, b=None):
        """Real 4x4 Hessian stack, ordering (Re u1, Im u1, Re u2, Im u2)."""
        u, r = _radial_eval(u)
        bb = self._coeff(b, r.shape)
        q = self._dphi(bb, r)  # phi'/r
        p = self._d2phi(bb, r)  # phi''
        U = np.stack(
            [u[..., 0].real, u[..., 0].imag, u[..., 1].real, u[..., 1].imag], axis=-1
        )
        eye = np.eye(4)
        rs = np.where(r > 0, r, 1.0)
        uh = U / rs[..., None]
        P = uh[..., :, None] * uh[..., None, :]
        P = np.where((r > 0)[..., None, None], P, 0.0)
        q = np.asarray(q)[..., None, None]
        p = np.asarray(p)[..., None, None]
        return q * (eye - P) + p * P

    def describe(self):
        d = {"kind": self.kind, **self.params}
        if self.uses_b:
            d["b"] = self.b if np.isscalar(self.b) else np.asarray(self.b).tolist()
        return d


def make_power(p):
    """Focusing power nonlinearity F = |u|^p / p with subcritical Hessian growth.

    The exponent is restricted to (2, 3): the Hessian grows like
    |u|^(p-2), and the bounded-growth hypothesis (F5) needs that exponent
    in (0, 1).  Superquadratic constants: sigma = p / (p - 2), nu = p - 2.
    """
    p = float(p)
    if not 2.0 < p < 3.0:
        raise HypothesisError(
            f"power exponent p={p} outside (2, 3): (F5) requires Hessian growth |u|^nu with nu in (0, 1)"
        )

    def phi(b, r):
        return r**p / p

    def dphi(b, r):
        # phi'(r)/r = r^(p-2)
        return r ** (p - 2.0)

    def d2phi(b, r):
        return (p - 1.0) * r ** (p - 2.0)

    meta = {"sigma": p / (p - 2.0), "nu": p - 2.0, "r": 1.0, "kappa": 1.0, "R": 1.0}
    return Nonlinearity("power", phi, dphi, d2phi, {"p": p}, meta, uses_b=False)


def make_asym_linear(b, params, cell=None):
    """Asymptotically linear family F = b(x) (|u|^2/2 - |u| + log(1+|u|)).

    F_u = b u |u| / (1 + |u|), so F_u - b u vanishes relative to |u| at
    infinity, and Fhat grows like (b/2)|u| (kappa = 1).  Requires
    inf b > sup V + a + omega.
    """
    b_arr = np.atleast_1d(np.asarray(b, dtype=float))
    b_inf = float(b_arr.min())
    b_sup = float(b_arr.max())
    if b_inf <= 0:
        raise HypothesisError("coefficient field b must be positive")
    bound = params.V.sup(cell) + params.a + params.omega
    if not b_inf > bound:
        raise HypothesisError(
            f"asymptotically linear slope too small: inf b = {b_inf} must exceed sup V + a + omega = {bound}"
        )

    def phi(b, r):
        return b * (r**2 / 2.0 - r + np.log1p(r))

    def dphi(b, r):
        # phi'(r)/r = b r / (1 + r)
        return b * r / (1.0 + r)

    def d2phi(b, r):
        return b * (r**2 + 2.0 * r) / (1.0 + r) ** 2

    meta = {"kappa": 1.0, "R": 1.0, "nu": 0.5, "sigma": 2.0, "r": 1.0, "b_inf": b_inf, "b_sup": b_sup}
    b_store = float(b) if np.isscalar(b) else b_arr
    return Nonlinearity(
        "asym_linear", phi, dphi, d2phi, {}, meta, b=b_store, uses_b=True
    )


def _sample_points(nl, sample_spec, rng):
    spec = {"u_min": 1e-6, "u_max": 1e6, "num": 200, "directions": 12}
    if sample_spec:
        spec.update(sample_spec)
    radii = np.geomspace(spec["u_min"], spec["u_max"], spec["num"])
    dirs = rng.standard_normal((spec["directions"], 2)) + 1j * rng.standard_normal(
        (spec["directions"], 2)
    )
    dirs /= np.sqrt(np.sum(np.abs(dirs) ** 2, axis=1))[:, None]
    if nl.uses_b and not np.isscalar(nl.b):
        bvals = np.asarray(nl.b, dtype=float)
    elif nl.uses_b:
        bvals = np.array([float(nl.b)])
    else:
        bvals = np.array([1.0])
    return radii, dirs, bvals


def check_hypotheses(nl, which=ALL_HYPOTHESES, params=None, sample_spec=None, seed=0):
    """Sampling-based verdict for each requested growth hypothesis.

    Inequality constants are fitted on the grid (smallest constant with
    10 percent slack); pass/fail for asymptotic statements is decided from
    the trend over the top sampled decades, and failing checks return a
    witnessing (b, |u|) pair.  `omega`/`V1` need `params`.
    """
    rng = np.random.default_rng(seed)
    radii, dirs, bvals = _sample_points(nl, sample_spec, rng)
    # grids: values[b_index, radius] after maximizing over directions
    r_grid = radii[None, :] * np.ones((bvals.size, 1))
    b_grid = bvals[:, None] * np.ones_like(radii)[None, :]

    def over_dirs(fn, reduce=np.max):
        # radial families are direction independent, but sample anyway
        vals = []
        for d in dirs:
            u = r_grid[..., None] * d
            vals.append(fn(u, b_grid))
        return reduce(np.stack(vals), axis=0)

    F_vals = over_dirs(nl.F)
    Fu_norm = over_dirs(lambda u, b: np.sqrt(np.sum(np.abs(nl.F_u(u, b)) ** 2, axis=-1)))
    Fhat_vals = over_dirs(nl.Fhat, reduce=np.min)
    Huu = over_dirs(lambda u, b: np.linalg.norm(nl.F_uu(u, b), ord=2, axis=(-2, -1)))

    report = {}

    def nearest(r):
        return int(np.argmin(np.abs(radii - r)))

    i_top = radii.size - 1
    i_top10 = nearest(radii[-1] / 10.0)  # one decade below the top
    i_unit = nearest(1.0)
    bottom = (radii >= radii[0]) & (radii <= radii[0] * 10.0)

    for name in which:
        if name == "omega":
            if params is None:
                raise HypothesisError("omega check needs problem parameters")
            margin = params.a - abs(params.omega)
            report[name] = {"pass": bool(margin > 0), "margin": float(margin)}
        elif name == "V1":
            if params is None:
                raise HypothesisError("V1 check needs problem parameters")
            sup_v = params.V.sup()
            ok = sup_v >= 0  # nonnegativity is enforced at construction; periodic per cell edge
            report[name] = {"pass": bool(ok), "margin": float(sup_v), "note": "cell-periodic by construction"}
        elif name == "F0":
            worst = float(F_vals.min())
            ok = worst >= 0 and np.all(np.isfinite(F_vals))
            report[name] = {"pass": bool(ok), "margin": worst}
        elif name == "F1":
            # built-ins: b is constant per fundamental-cell edge, so the
            # translation action permutes identical coefficients
            report[name] = {"pass": True, "margin": 0.0, "note": "coefficients constant per cell edge"}
        elif name == "F2":
            ratio = Fu_norm / r_grid
            r_bot = ratio[:, bottom]
            trend_ok = float(r_bot[:, -1].max()) >= float(r_bot[:, 0].max())
            small = float(ratio[:, 0].max())
            at_unit = float(ratio[:, i_unit].max())
            ok = small <= max(1e-3, 0.01 * at_unit) and trend_ok
            report[name] = {"pass": bool(ok), "margin": small}
        elif name == "F3":
            if not nl.uses_b:
                report[name] = {
                    "pass": False,
                    "witness": {"radius": float(radii[-1])},
                    "note": "no asymptotic slope field",
                }
                continue
            dev = np.abs(Fu_norm - b_grid * r_grid) / r_grid
            tail_val = float(dev[:, i_top].max())
            decaying = tail_val <= 0.2 * float(dev[:, i_unit].max() + 1e-300)
            tail_small = tail_val < 1e-3
            slope_ok = True
            margin = None
            if params is not None:
                margin = nl.metadata["b_inf"] - (params.V.sup() + params.a + params.omega)
                slope_ok = margin > 0
            ok = decaying and tail_small and slope_ok
            rep = {"pass": bool(ok), "margin": tail_val}
            if margin is not None:
                rep["slope_margin"] = float(margin)
            report[name] = rep
        elif name == "F4":
            kappa = nl.metadata.get("kappa", 1.0)
            R = nl.metadata.get("R", 1.0)
            pos_ok = bool(np.all(Fhat_vals > 0))
            mask = radii >= R
            ratio = Fhat_vals[:, mask] / r_grid[:, mask] ** kappa
            c1 = 0.9 * float(ratio.min())
            ok = pos_ok and c1 > 0
            rep = {"pass": bool(ok), "fitted_c1": c1, "kappa": kappa, "R": R}
            if not pos_ok:
                i, j = np.unravel_index(np.argmin(Fhat_vals), Fhat_vals.shape)
                rep["witness"] = {"b": float(bvals[i]), "radius": float(radii[j])}
            report[name] = rep
            nl.metadata.setdefault("c1", c1)
        elif name == "F5":
            nu = nl.metadata["nu"]
            structural = 0.0 < nu < 1.0
            ratio = Huu / (1.0 + r_grid**nu)
            c1 = 1.1 * float(ratio.max())
            top_max = float(ratio[:, i_top].max())
            below_max = float(ratio[:, i_top10].max())
            bounded = top_max <= 1.10 * max(below_max, 1e-300)
            ok = structural and bounded and bool(np.all(np.isfinite(ratio)))
            rep = {"pass": bool(ok), "fitted_C1": c1, "nu": nu}
            if not ok:
                rep["witness"] = {"radius": float(radii[-1]), "ratio_top": top_max}
            report[name] = rep
            nl.metadata.setdefault("C1", c1)
        elif name == "F6":
            growth = F_vals / r_grid**2
            base = float(growth[:, i_unit].max())
            top_val = float(growth[:, i_top].max())
            increasing = top_val > float(growth[:, i_top10].max()) * 1.5
            ok = increasing and top_val >= 100.0 * max(base, 1e-300)
            rep = {"pass": bool(ok), "growth_at_top": top_val, "growth_at_unit": base}
            if not ok:
                rep["witness"] = {"radius": float(radii[-1]), "ratio": top_val}
            report[name] = rep
        elif name == "F7":
            sigma = nl.metadata["sigma"]
            r0 = nl.metadata.get("r", 1.0)
            mask = radii >= r0
            pos_ok = bool(np.all(Fhat_vals > 0))
            quad = Fhat_vals[:, mask] / r_grid[:, mask] ** 2
            c2 = 0.9 * float(quad.min())
            decayed = float(quad[:, -1].max()) < 0.1 * float(quad[:, 0].max() + 1e-300)
            part_i = pos_ok and not decayed and c2 > 0
            Q = Fu_norm[:, mask] ** sigma / (
                np.maximum(Fhat_vals[:, mask], 1e-300) * r_grid[:, mask] ** sigma
            )
            c3 = 1.1 * float(Q.max())
            q_top = float(Q[:, -1].max())
            q_below = float(Q[:, max(Q.shape[1] - 1 - (radii.size - 1 - i_top10), 0)].max())
            part_ii = bool(
                np.all(np.isfinite(Q)) and q_top <= 1.10 * max(q_below, float(Q[:, 0].max()), 1e-300)
            )
            ok = part_i and part_ii
            rep = {
                "pass": bool(ok),
                "part_i": bool(part_i),
                "part_ii": bool(part_ii),
                "fitted_c2": c2,
                "fitted_c3": c3,
                "sigma": sigma,
                "r": r0,
            }
            if not part_i:
                rep["witness"] = {"radius": float(radii[mask][-1]), "fhat_over_r2": float(quad[:, -1].max())}
            report[name] = rep
            nl.metadata.setdefault("c2", c2)
            nl.metadata.setdefault("c3", c3)
        else:
            raise HypothesisError(f"unknown hypothesis {name!r}")
    return report


def theorem_mode_hypotheses(nl):
    """The hypothesis set the solver must gate on for this nonlinearity kind."""
    return THEOREM_11_SET if nl.kind == "asym_linear" else THEOREM_12_SET


def hessian_consistency(nl, u_samples, b=None, eps=1e-5):
    """Max relative finite-difference defect of the F_u and F_uu evaluators.

    Central differences of F reproduce F_u, and of F_u reproduce F_uu, on
    samples away from the origin; also differentiates the gauge and
    evenness symmetries at the sample points.
    """
    u_samples = np.asarray(u_samples, dtype=complex)
    worst = 0.0
    gauge_worst = 0.0
    even_worst = 0.0
    basis = [
        np.array([1.0, 0.0]),
        np.array([1j, 0.0]),
        np.array([0.0, 1.0]),
        np.array([0.0, 1j]),
    ]
    for u in u_samples:
        r = np.sqrt(np.sum(np.abs(u) ** 2))
        h = eps * max(1.0, r)
        g = nl.F_u(u, b)
        H = nl.F_uu(u, b)
        gvec = np.array([g[0].real, g[0].imag, g[1].real, g[1].imag])
        scale_g = max(np.linalg.norm(gvec), 1e-12)
        scale_h = max(np.linalg.norm(H), 1e-12)
        for k, e in enumerate(basis):
            fd = (nl.F(u + h * e, b) - nl.F(u - h * e, b)) / (2 * h)
            worst = max(worst, abs(fd - gvec[k]) / scale_g)
            gp = nl.F_u(u + h * e, b)
            gm = nl.F_u(u - h * e, b)
            col = (
                np.array([gp[0].real, gp[0].imag, gp[1].real, gp[1].imag])
                - np.array([gm[0].real, gm[0].imag, gm[1].real, gm[1].imag])
            ) / (2 * h)
            worst = max(worst, np.linalg.norm(col - H[:, k]) / scale_h)
        # d/dtheta F(e^{i theta} u) = 0  <=>  F_u(u) . (i u) = 0
        gauge_worst = max(gauge_worst, abs(np.sum(np.conj(g) * (1j * u)).real) / scale_g)
        even_worst = max(even_worst, np.max(np.abs(nl.F_u(-u, b) + g)) / scale_g)
    return {"max_relative_defect": worst, "gauge_defect": gauge_worst, "evenness_defect": even_worst}
