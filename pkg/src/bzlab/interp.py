"""Periodic B-spline interpolation of bands and the observables built on it.

Splines of degree 1 (multilinear hats) or 2 (quadratic, C^1) interpolate band
samples on the uniform grid B_L; the integrated density of states, Fermi
level and ground-state energy are then computed from the interpolants by
sublevel-set quadrature. Indicator regions always go through the generic
level-set subdivider, for either order.
"""

import warnings
from dataclasses import replace

import numpy as np

from .quadrature import LevelSetQuadConfig, levelset_integrate, staged_bisect_root


class BudgetWarning(UserWarning):
    """A level-set quadrature stopped before certifying its error budget."""


class TorusSpline:
    """Tensor-product periodic B-spline of one band over the BZ torus.

    ``coeffs`` live on the (L,)*d periodic knot lattice with knots at the grid
    nodes i/L. Degree 1 interpolates directly (coeffs == samples); degree 2
    requires the cyclic collocation solve done by fit_spline. Evaluation is a
    convex combination of nearby coefficients, so the spline range is bounded
    by the coefficient range.
    """

    def __init__(self, coeffs, order, band=0):
        coeffs = np.asarray(coeffs, dtype=float)
        if order not in (1, 2):
            raise ValueError("spline order must be 1 or 2")
        sides = set(coeffs.shape)
        if len(sides) != 1:
            raise ValueError("coefficient lattice must be a hypercube")
        self.coeffs = coeffs
        self.order = int(order)
        self.d = coeffs.ndim
        self.L = coeffs.shape[0]
        self.band = int(band)

    def eval(self, pts):
        """Spline values at an (n, d) array of fractional k-points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != self.d:
            raise ValueError(f"expected k-points of dimension {self.d}")
        n, d = pts.shape
        u = (pts % 1.0) * self.L
        if self.order == 1:
            base = np.floor(u).astype(np.int64)
            t = u - base
            span = 2
            w = np.empty((n, d, 2))
            w[:, :, 0] = 1.0 - t
            w[:, :, 1] = t
        else:
            base = np.floor(u + 0.5).astype(np.int64)
            t = u - base
            span = 3
            w = np.empty((n, d, 3))
            w[:, :, 0] = 0.5 * (0.5 - t) ** 2
            w[:, :, 1] = 0.75 - t * t
            w[:, :, 2] = 0.5 * (0.5 + t) ** 2
            base -= 1
        idx = (base[:, :, None] + np.arange(span)[None, None, :]) % self.L

        # One flattened gather beats per-corner fancy indexing.
        flat_idx, weight = idx[:, 0, :], w[:, 0, :]
        for a in range(1, d):
            flat_idx = (flat_idx[:, :, None] * self.L + idx[:, a, None, :]).reshape(n, -1)
            weight = (weight[:, :, None] * w[:, a, None, :]).reshape(n, -1)
        return np.einsum("ij,ij->i", self.coeffs.reshape(-1)[flat_idx], weight)

    def coeff_range(self):
        return float(self.coeffs.min()), float(self.coeffs.max())

    def to_text(self):
        """Serialize as 'd L order band' header plus coefficients, lexicographic."""
        lines = [f"{self.d} {self.L} {self.order} {self.band}"]
        lines.extend("%.17g" % c for c in self.coeffs.reshape(-1))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        d, L, order, band = (int(x) for x in lines[0].split())
        vals = np.array([float(x) for x in lines[1:]])
        if len(vals) != L ** d:
            raise ValueError(f"expected {L ** d} coefficients, got {len(vals)}")
        return cls(vals.reshape((L,) * d), order, band=band)


def _thomas(diag, rhs):
    """Tridiagonal solve with unit off-diagonals and the given diagonal; rhs (L, m)."""
    L = rhs.shape[0]
    cp = np.empty(L)
    x = np.array(rhs, dtype=float)
    cp[0] = 1.0 / diag[0]
    x[0] = x[0] / diag[0]
    for i in range(1, L):
        denom = diag[i] - cp[i - 1]
        cp[i] = 1.0 / denom
        x[i] = (x[i] - x[i - 1]) / denom
    for i in range(L - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x


def _cyclic_collocation_solve(rhs):
    """Solve the periodic collocation system c_{j-1} + 6 c_j + c_{j+1} = 8 s_j.

    Sherman-Morrison reduction of the cyclic corners onto a plain tridiagonal
    solve; O(L) per right-hand side, no FFT.
    """
    L = rhs.shape[0]
    b = 6.0
    gamma = -b
    diag = np.full(L, b)
    diag[0] = b - gamma
    diag[-1] = b - 1.0 / gamma
    y = _thomas(diag, 8.0 * rhs)
    u = np.zeros((L, 1))
    u[0, 0] = gamma
    u[-1, 0] = 1.0
    q = _thomas(diag, u)[:, 0]
    vy = y[0] + y[-1] / gamma
    vq = q[0] + q[-1] / gamma
    return y - np.outer(q, vy / (1.0 + vq))


def fit_spline(samples, order, d=None, band=0):
    """Fit a TorusSpline to band samples taken on make_grid(d, L).

    ``samples`` is either the (L,)*d sample array or the flat grid-ordered
    vector (then ``d`` is required). Order 1 uses the samples directly; order
    2 solves the cyclic collocation system along each dimension in turn.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        if d is None:
            raise ValueError("flat samples need the dimension d")
        L = round(len(samples) ** (1.0 / d))
        if L ** d != len(samples):
            raise ValueError(f"sample count {len(samples)} is not a {d}-cube")
        samples = samples.reshape((L,) * d)
    if order == 1:
        return TorusSpline(samples.copy(), 1, band=band)
    if order != 2:
        raise ValueError("spline order must be 1 or 2")
    L = samples.shape[0]
    if L < 3:
        raise ValueError("order-2 fitting needs L >= 3")
    coeffs = samples
    for axis in range(samples.ndim):
        moved = np.moveaxis(coeffs, axis, 0).reshape(L, -1)
        solved = _cyclic_collocation_solve(moved)
        coeffs = np.moveaxis(solved.reshape(np.moveaxis(coeffs, axis, 0).shape), 0, axis)
    return TorusSpline(coeffs, 2, band=band)


def eval_spline(spline, k):
    """Value of the interpolant at a single fractional k-point."""
    return float(spline.eval(np.atleast_2d(k))[0])


def _check_family(splines):
    if not splines:
        raise ValueError("need at least one spline")
    d, L, order = splines[0].d, splines[0].L, splines[0].order
    for s in splines[1:]:
        if (s.d, s.L, s.order) != (d, L, order):
            raise ValueError("splines must share (d, L, order)")
    return d, L, order


def _root_offset(order, L):
    # Align root cells with the interpolant's polynomial pieces: degree-1
    # pieces break at the nodes, degree-2 pieces at the half-integer knots.
    return 0.0 if order == 1 else -0.5 / L


def counting_interp(splines, eps, cfg=None, depth0_caches=None):
    """Integrated density of states of the interpolated bands at level eps.

    ``depth0_caches`` (one dict per spline) lets repeated calls at different
    levels skip re-sampling the root tiling; see levelset_integrate.
    """
    cfg = cfg or LevelSetQuadConfig()
    d, L, _ = _check_family(splines)
    total = 0.0
    for i, s in enumerate(splines):
        lo, hi = s.coeff_range()
        if lo > eps:
            continue
        if hi < eps:
            total += 1.0
            continue
        res = levelset_integrate(s.eval, None, eps, cfg, d, root_div=L,
                                 depth0_cache=None if depth0_caches is None
                                 else depth0_caches[i])
        if not res.converged:
            warnings.warn(f"counting budget {cfg.abs_tol} not certified "
                          f"(bound {res.error_bound:.3g})", BudgetWarning, stacklevel=2)
        total += res.measure
    return total


def solve_fermi_interp(splines, n_electrons, cfg=None):
    """Any root of N^{L,q}(eps) = N by bisection, to bracket width 1e-10.

    An exact tie N(mid) == N returns mid immediately, which pins the Fermi
    level of particle-hole symmetric models to the symmetric value. Early
    iterations run the counting at a relaxed budget; only the final ones pay
    for the full cfg.abs_tol.
    """
    cfg = cfg or LevelSetQuadConfig()
    _check_family(splines)
    if not 0.0 < n_electrons < len(splines):
        raise ValueError(f"need 0 < N < {len(splines)} (bands supplied)")
    los, his = zip(*(s.coeff_range() for s in splines))
    lo = min(los) - 1.0
    hi = max(his) + 1.0

    # Counting error divides by the density of states on its way into the
    # root, so the endgame runs below the nominal budget.
    fine = max(cfg.abs_tol / 8.0, 1e-12)
    caches = [{} for _ in splines]

    def func(eps, tol):
        call_cfg = replace(cfg, abs_tol=tol) if tol != cfg.abs_tol else cfg
        return counting_interp(splines, eps, call_cfg, depth0_caches=caches) - n_electrons

    schedule = lambda w: min(1e-4, max(fine, 0.005 * w))
    return staged_bisect_root(func, lo, hi, -n_electrons, len(splines) - n_electrons,
                              width=1e-10, tol_schedule=schedule, final_tol=fine)


def energy_interp(splines_p, splines_q, fermi_q, cfg=None):
    """Ground-state energy per cell: integral of the order-p interpolants over
    the sublevel sets of the order-q interpolants at the given Fermi level."""
    cfg = cfg or LevelSetQuadConfig()
    dq, Lq, _ = _check_family(splines_q)
    dp, Lp, order_p = _check_family(splines_p)
    if (dp, Lp) != (dq, Lq) or len(splines_p) != len(splines_q):
        raise ValueError("splines_p and splines_q must come from the same band samples")
    total = 0.0
    offset = _root_offset(order_p, Lp)
    for sp, sq in zip(splines_p, splines_q):
        lo, _ = sq.coeff_range()
        if lo > fermi_q:
            continue
        res = levelset_integrate(sq.eval, sp.eval, fermi_q, cfg, dq,
                                 root_div=Lq, root_offset=offset)
        if not res.converged:
            warnings.warn(f"energy budget {cfg.abs_tol} not certified "
                          f"(bound {res.error_bound:.3g})", BudgetWarning, stacklevel=2)
        total += res.integral
    return total


def select_bands(energies, cutoff):
    """Indices of bands worth interpolating: minimum sample below the cutoff.

    Bands entirely above the cutoff contribute nothing to occupied-region
    integrals and are skipped by the study sweeps.
    """
    energies = np.asarray(energies)
    return [b for b in range(energies.shape[1]) if energies[:, b].min() < cutoff]
