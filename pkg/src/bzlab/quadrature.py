"""Uniform BZ grids, deterministic Riemann sums, and a level-set integrator.

The level-set routine computes the measure of a sublevel set {f <= level} on
the unit torus and optionally the integral of a second function g over it. It
subdivides a root tiling of the torus as a 2^d-tree: a cell is accepted once
every sampled value (corners, edge midpoints, center) sits on one side of the
level by a margin exceeding a sampled-slope bound; straddling cells subdivide.
Whatever straddles when refinement stops is integrated by a first-order
interface cut (the exact sub-box fraction of the cell's linearized f, times
the center value of g) and drives the reported error bound.

Callers integrating piecewise-polynomial g should pass a root tiling aligned
with g's breakpoints (``root_div``/``root_offset``); accepted cells are then
integrated exactly by the fixed Gauss rule.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bands import wrap_frac
from .errors import NonFiniteIntegrandError
from .parallel import fixed_chunk_sum

# The interface-cut remainder converges like 4^-depth, so successive whole-
# domain values admit Richardson extrapolation: refinement stops once the
# projected error of the extrapolated value is inside the budget, far earlier
# than the conservative undecided-area criterion could allow.
_MIN_RICHARDSON_DEPTH = 3
_MAX_FRONTIER_CELLS = 2 ** 21
_RATIO_WINDOW = (2.5, 6.0)


@dataclass(frozen=True)
class UniformGrid:
    """The Gamma-centered L^d grid B_L with equal weights 1/L^d."""

    d: int
    L: int
    points: np.ndarray

    @property
    def weight(self):
        return self.L ** (-self.d)

    def __len__(self):
        return self.points.shape[0]


def make_grid(d, L):
    """Uniform grid {(i1/L, ..., id/L)} wrapped to [-1/2, 1/2), lexicographic in i."""
    if d not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    L = int(L)
    if L < 1:
        raise ValueError("L must be >= 1")
    axis = wrap_frac(np.arange(L) / L)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack(mesh, axis=-1).reshape(-1, d)
    pts.setflags(write=False)
    return UniformGrid(d=d, L=L, points=pts)


def riemann_sum(grid, integrand, threads=None, chunk=4096):
    """(1/L^d) sum of ``integrand`` over the grid, in fixed chunked order.

    ``integrand`` maps an (n, d) array of k-points to (n,) values. The chunk
    decomposition is fixed, so the reduction is bit-identical for any thread
    count. Non-finite integrand values raise, naming the offending k-point.
    """
    pts = grid.points
    vals = np.empty(len(pts), dtype=float)
    for start in range(0, len(pts), chunk):
        vals[start:start + chunk] = integrand(pts[start:start + chunk])
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise NonFiniteIntegrandError(
            f"integrand returned {vals[i]!r} at k={pts[i]}", kpoint=pts[i].copy())
    return fixed_chunk_sum(vals, chunk=chunk, threads=threads) * grid.weight


@dataclass(frozen=True)
class LevelSetQuadConfig:
    """Error budget and subdivision cap for sublevel-set quadrature."""

    abs_tol: float = 1e-6
    max_depth: int = 20

    def __post_init__(self):
        if self.abs_tol < 1e-12:
            raise ValueError("abs_tol must be >= 1e-12")
        if not (1 <= self.max_depth <= 24):
            raise ValueError("max_depth must be in 1..24")


@dataclass(frozen=True)
class LevelSetResult:
    measure: float
    integral: float
    error_bound: float
    undecided_area: float
    depth: int
    converged: bool


_STENCILS = {}
_GAUSS = {}


def _stencil(d):
    """3^d sampling offsets in cell units plus the pair table for slope bounds.

    Also records, per axis, the indices of the two face-center samples used
    for the central-difference gradient.
    """
    if d not in _STENCILS:
        axes = [np.array([-1.0, 0.0, 1.0])] * d
        offs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        center = int(np.flatnonzero(~offs.any(axis=1))[0])
        n = len(offs)
        ia, ib = np.triu_indices(n, k=1)
        dist = np.linalg.norm(offs[ia] - offs[ib], axis=1)
        grad_pairs = []
        for a in range(d):
            unit = np.zeros(d)
            unit[a] = 1.0
            plus = int(np.flatnonzero((offs == unit).all(axis=1))[0])
            minus = int(np.flatnonzero((offs == -unit).all(axis=1))[0])
            grad_pairs.append((plus, minus))
        _STENCILS[d] = (offs, center, ia, ib, dist, tuple(grad_pairs))
    return _STENCILS[d]


def _halfspace_fraction(t, amps):
    """Fraction of the box prod_i [-A_i, A_i] lying in {sum_i u_i <= t}.

    ``t`` has shape (n,), ``amps`` (n, d) with A_i >= 0. This is the CDF of a
    sum of independent symmetric uniforms, evaluated by inclusion-exclusion;
    near-zero amplitudes are clamped, keeping the formula stable, and the
    upper tail is computed by complement so frac(-t) == 1 - frac(t) and fully
    degenerate cells fall back to the center-value indicator.
    """
    t = np.asarray(t, dtype=float)
    amps = np.asarray(amps, dtype=float)
    n, d = amps.shape
    if n == 0:
        return np.zeros(0)
    scale = np.maximum(amps.max(axis=1), np.abs(t))
    degenerate = amps.sum(axis=1) <= 1e-14 * np.maximum(scale, 1e-30)
    amps = np.maximum(amps, (1e-6 * np.maximum(scale, 1e-30))[:, None])

    def lower_tail(tt):
        # Volume{sum x_i <= s, x_i in [0, w_i]} / prod w_i with s = tt + sum A.
        w = 2.0 * amps
        s = tt + amps.sum(axis=1)
        vol = np.zeros(n)
        for mask in range(2 ** d):
            wsum = np.zeros(n)
            bits = 0
            for a in range(d):
                if mask >> a & 1:
                    wsum += w[:, a]
                    bits += 1
            vol += (-1.0) ** bits * np.maximum(s - wsum, 0.0) ** d
        vol /= math.factorial(d)
        return np.clip(vol / np.prod(w, axis=1), 0.0, 1.0)

    pos = t > 0.0
    frac = np.where(pos, 1.0 - lower_tail(-t), lower_tail(t))
    return np.where(degenerate, (t >= 0.0).astype(float), frac)


def _gauss_rule(d, npts=5):
    """Tensor-product Gauss-Legendre rule on [-1, 1]^d."""
    if (d, npts) not in _GAUSS:
        x, w = np.polynomial.legendre.leggauss(npts)
        nodes = np.stack(np.meshgrid(*([x] * d), indexing="ij"), axis=-1).reshape(-1, d)
        weights = np.stack(np.meshgrid(*([w] * d), indexing="ij"), axis=-1).reshape(-1, d)
        _GAUSS[(d, npts)] = (nodes, np.prod(weights, axis=1))
    return _GAUSS[(d, npts)]


def _eval_at(func, pts):
    vals = np.asarray(func(wrap_frac(pts.reshape(-1, pts.shape[-1]))), dtype=float)
    return vals.reshape(pts.shape[:-1])


def levelset_integrate(f, g, level, cfg, d, root_div=16, root_offset=0.0,
                       depth0_cache=None):
    """Measure of {f <= level} and the integral of g over it, on the unit torus.

    ``f`` (and ``g`` if given) map (n, d) arrays of fractional k-points to (n,)
    values and must be continuous on the torus. ``g=None`` means g == 1, in
    which case the integral equals the measure. The root tiling has
    ``root_div`` cells per dimension starting at ``root_offset``.

    ``depth0_cache`` is an optional dict owned by the caller; the root-tiling
    samples of f are level-independent, so a Fermi solver bisecting on the
    level can reuse them across calls.

    Returns a LevelSetResult; ``converged`` is False when the budget could not
    be certified before ``cfg.max_depth`` (the values are still the best
    interface-cut estimates and the caller decides what to do).
    """
    level = float(level)
    offs, center_idx, ia, ib, pair_dist, grad_pairs = _stencil(d)
    half = 0.5 / root_div
    axis = root_offset + (np.arange(root_div) + 0.5) / root_div
    centers = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)

    acc_measure = 0.0
    acc_integral = 0.0
    history = []
    err_est = math.inf
    measure = integral = 0.0
    undecided_area = 0.0
    depth = 0
    converged = False

    for depth in range(cfg.max_depth + 1):
        area = (2.0 * half) ** d
        cache_key = (root_div, float(root_offset))
        if depth == 0 and depth0_cache is not None and cache_key in depth0_cache:
            vals, margin = depth0_cache[cache_key]
        else:
            pts = centers[:, None, :] + offs[None, :, :] * half
            vals = _eval_at(f, pts)
            slope = np.max(np.abs(vals[:, ia] - vals[:, ib]) / (pair_dist[None, :] * half),
                           axis=1)
            margin = slope * (2.0 * half * math.sqrt(d)) * 2.0
            if depth == 0 and depth0_cache is not None:
                depth0_cache[cache_key] = (vals, margin)

        vmin = vals.min(axis=1)
        vmax = vals.max(axis=1)
        inside = vmax < level - margin
        outside = vmin > level + margin
        straddle = ~(inside | outside)

        n_in = int(np.count_nonzero(inside))
        acc_measure += n_in * area
        if g is not None and n_in:
            acc_integral += _gauss_cells(g, centers[inside], half, d)

        # Straddle remainder: linearize f per cell from the face-center
        # central differences and take the exact sub-box fraction.
        svals = vals[straddle]
        t = level - svals[:, center_idx]
        amps = np.stack([np.abs(svals[:, pl] - svals[:, mi]) * 0.5
                         for pl, mi in grad_pairs], axis=1)
        frac = _halfspace_fraction(t, amps)
        measure = acc_measure + area * float(np.sum(frac))
        if g is None:
            integral = measure
        else:
            gc = _eval_at(g, centers[straddle]) if straddle.any() else np.zeros(0)
            integral = acc_integral + area * float(np.sum(gc * frac))

        n_straddle = int(np.count_nonzero(straddle))
        undecided_area = n_straddle * area
        history.append((measure, integral))
        if n_straddle == 0:
            converged = True
            err_est = 0.0
            break
        if undecided_area < cfg.abs_tol:
            converged = True
            err_est = undecided_area
            break
        if len(history) >= 3:
            measure, m_bound = _extrapolate([h[0] for h in history])
            if g is None:
                integral, i_bound = measure, m_bound
            else:
                integral, i_bound = _extrapolate([h[1] for h in history])
            err_est = max(m_bound, i_bound)
            if depth >= _MIN_RICHARDSON_DEPTH and err_est <= 0.5 * cfg.abs_tol:
                converged = True
                break
        if depth == cfg.max_depth or n_straddle * (2 ** d) > _MAX_FRONTIER_CELLS:
            break

        centers = _children(centers[straddle], half, d)
        half *= 0.5

    if not math.isfinite(err_est):
        err_est = undecided_area
    error_bound = min(undecided_area, 2.0 * err_est)
    converged = converged and error_bound <= cfg.abs_tol
    return LevelSetResult(measure=measure, integral=integral, error_bound=error_bound,
                          undecided_area=undecided_area, depth=depth, converged=converged)


def _extrapolate(values):
    """Richardson-accelerate the tail of a refinement sequence.

    Returns (best value, error estimate). When the last two signed increments
    shrink by a ratio inside the quadratic window, the geometric tail is summed
    and a fraction of that correction is reported as the error; otherwise the
    raw value is kept with the increments as a conservative estimate.
    """
    v2, v1, v0 = values[-3], values[-2], values[-1]
    d1 = v0 - v1
    d0 = v1 - v2
    if d1 == 0.0:
        return v0, 0.25 * abs(d0)
    ratio = d0 / d1
    if _RATIO_WINDOW[0] <= ratio <= _RATIO_WINDOW[1]:
        corr = d1 / (ratio - 1.0)
        return v0 + corr, max(0.35 * abs(corr), 1e-16 * max(1.0, abs(v0)))
    return v0, max(abs(d1), abs(d0) / 6.0)


def _children(centers, half, d):
    offs = _stencil(d)[0]
    corner = offs[np.all(np.abs(offs) == 1.0, axis=1)]
    kids = centers[:, None, :] + corner[None, :, :] * (half * 0.5)
    return kids.reshape(-1, d)


def _gauss_cells(g, centers, half, d):
    nodes, weights = _gauss_rule(d)
    pts = centers[:, None, :] + nodes[None, :, :] * half
    vals = _eval_at(g, pts)
    return float(np.sum(vals @ weights)) * half ** d


def bisect_root(func, lo, hi, flo, fhi, width, max_iter=200):
    """Deterministic bisection for func(x) = 0 given a sign-changing bracket.

    An exact zero at a midpoint returns immediately (useful when symmetry makes
    the crossing value exact). Returns the bracket midpoint once the bracket is
    narrower than ``width``. When ``func`` accepts an extra keyword ``coarse``
    use staged_bisect_root instead.
    """
    return staged_bisect_root(lambda x, tol: func(x), lo, hi, flo, fhi, width,
                              lambda w: 0.0, max_iter=max_iter)


def staged_bisect_root(func, lo, hi, flo, fhi, width, tol_schedule, final_tol=0.0,
                       max_iter=200):
    """Bisection whose function is evaluated at a width-dependent tolerance.

    ``func(x, tol)`` evaluates the residual to accuracy ``tol``, scheduled by
    ``tol_schedule(bracket width)`` so early iterations run cheap. A residual
    whose magnitude is inside its own trust margin cannot be signed safely and
    is re-evaluated at ``final_tol`` before the bracket moves; this keeps a
    coarse near-tie from locking the bracket onto the wrong side. The schedule
    depends only on the deterministic width sequence, so results are
    reproducible.
    """
    if not (flo < 0.0 < fhi or fhi < 0.0 < flo):
        if flo == 0.0:
            return lo
        if fhi == 0.0:
            return hi
        raise ValueError("bracket does not change sign")
    ascending = flo < 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo < width or mid == lo or mid == hi:
            return mid
        call_tol = tol_schedule(hi - lo)
        fmid = func(mid, call_tol)
        if call_tol > final_tol and abs(fmid) <= 3.0 * call_tol:
            fmid = func(mid, final_tol)
        if fmid == 0.0:
            return mid
        if (fmid < 0.0) == ascending:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
