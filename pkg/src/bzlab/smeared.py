"""Smearing-method observables on uniform grids.

Everything here is a plain Riemann sum over B_L of smooth smeared occupations:
the electron count N^{sigma,L}, the Fermi level solving N^{sigma,L} = N, the
energy E^{sigma,L}, the entropy sum S^{sigma,L}, the entropy-extrapolated
energy, the smeared density of states, and (for plane-wave models) the smeared
real-space electronic density.
"""

from dataclasses import dataclass

import numpy as np

from .bands import PlaneWaveModel
from .errors import NoRootError
from .parallel import fixed_chunk_sum
from .quadrature import make_grid

# Kernel arguments beyond this are numerically zero for every scheme
# (occupations < 1e-17), so whole bands can be skipped.
TAIL_CUTOFF = 40.0

# Sign of the entropy correction in the extrapolated energy. The leading
# sigma^(p+1) coefficients of the energy and entropy expansions cancel for
# the plus sign (the build-time calibration test measures the slopes both
# ways; minus leaves the raw order p+1 intact).
EXTRAPOLATION_SIGN = +1.0


def band_energies(model, grid):
    """Band energies on the whole grid, shape (len(grid), band_count)."""
    return model.bands_many(grid.points)


def _check_sigma(sigma):
    if not sigma > 0.0:
        raise ValueError("sigma must be positive")


def _band_sum(energies, weight, kernel, skip_low=None, skip_high=None):
    """Deterministic per-band chunked sum of kernel(band values)."""
    total = 0.0
    for b in range(energies.shape[1]):
        col = energies[:, b]
        if skip_low is not None and skip_low(col):
            continue
        if skip_high is not None and skip_high(col):
            continue
        total += fixed_chunk_sum(kernel(col))
    return total * weight


def smeared_counting(model, scheme, grid, sigma, eps, energies=None):
    """N^{sigma,L}(eps) = (1/L^d) sum_k sum_n f1((e_nk - eps) / sigma)."""
    _check_sigma(sigma)
    e = band_energies(model, grid) if energies is None else energies
    return _band_sum(
        e, grid.weight,
        lambda col: scheme.occupation((col - eps) / sigma),
        skip_low=lambda col: (col.min() - eps) / sigma > TAIL_CUTOFF)


def solve_fermi(model, scheme, grid, sigma, n_electrons, energies=None):
    """The Fermi level: a root of N^{sigma,L}(eps) = N, by bisection.

    The initial bracket comes from a coarse 8^d pre-scan of the bands padded
    by 10 sigma, then doubles until it encloses a sign change. Bisection is
    robust to the local non-monotonicity of higher-order schemes; any root is
    acceptable and the returned one is deterministic. An exact tie
    N(mid) == N returns mid immediately.
    """
    _check_sigma(sigma)
    if not 0.0 < n_electrons < model.band_count:
        raise ValueError(f"need 0 < N < {model.band_count} (band count)")
    e = band_energies(model, grid) if energies is None else energies
    coarse = band_energies(model, make_grid(model.d, 8))
    lo = coarse.min() - 10.0 * sigma
    hi = coarse.max() + 10.0 * sigma

    def func(eps):
        return smeared_counting(model, scheme, grid, sigma, eps, energies=e) - n_electrons

    flo, fhi = func(lo), func(hi)
    for _ in range(60):
        if flo < 0.0 < fhi:
            break
        span = hi - lo
        if flo >= 0.0:
            lo -= span
            flo = func(lo)
        if fhi <= 0.0:
            hi += span
            fhi = func(hi)
    else:
        raise NoRootError(f"no Fermi bracket for N={n_electrons} after 60 doublings")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < 1e-13 * max(1.0, abs(mid)) or mid in (lo, hi):
            return mid
        fmid = func(mid)
        if fmid == 0.0:
            return mid
        if fmid < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def smeared_energy(model, scheme, grid, sigma, fermi, energies=None):
    """E^{sigma,L} = (1/L^d) sum e_nk f1((e_nk - fermi) / sigma)."""
    _check_sigma(sigma)
    e = band_energies(model, grid) if energies is None else energies
    return _band_sum(
        e, grid.weight,
        lambda col: col * scheme.occupation((col - fermi) / sigma),
        skip_low=lambda col: (col.min() - fermi) / sigma > TAIL_CUTOFF)


def smeared_entropy(model, scheme, grid, sigma, fermi, energies=None):
    """S^{sigma,L} = (1/L^d) sum s((e_nk - fermi) / sigma); decays both ways."""
    _check_sigma(sigma)
    e = band_energies(model, grid) if energies is None else energies
    return _band_sum(
        e, grid.weight,
        lambda col: scheme.entropy_kernel((col - fermi) / sigma),
        skip_low=lambda col: (col.min() - fermi) / sigma > TAIL_CUTOFF,
        skip_high=lambda col: (col.max() - fermi) / sigma < -TAIL_CUTOFF)


def extrapolated_energy(energy, entropy, sigma, order):
    """Entropy-corrected energy, consistent of order p+2 instead of p+1."""
    if order < 1:
        raise ValueError("scheme order must be >= 1")
    return energy + EXTRAPOLATION_SIGN * sigma * (order / (order + 1.0)) * entropy


def smeared_dos(model, scheme, grid, sigma, eps, energies=None):
    """Smeared density of states (1/(sigma L^d)) sum delta((e_nk - eps)/sigma)."""
    _check_sigma(sigma)
    e = band_energies(model, grid) if energies is None else energies
    return _band_sum(
        e, grid.weight / sigma,
        lambda col: scheme.delta((col - eps) / sigma),
        skip_low=lambda col: (col.min() - eps) / sigma > TAIL_CUTOFF,
        skip_high=lambda col: (col.max() - eps) / sigma < -TAIL_CUTOFF)


@dataclass
class RealSpaceDensity:
    """Electronic density sampled on a uniform real-space grid of the unit cell."""

    grid_shape: tuple
    values: np.ndarray
    cell_volume: float = 1.0

    def total_electrons(self):
        return float(self.values.mean()) * self.cell_volume

    def to_csv(self, path):
        d = len(self.grid_shape)
        header = ",".join(f"r{a + 1}" for a in range(d)) + ",rho"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            coords = [np.arange(m) / m for m in self.grid_shape]
            for idx in np.ndindex(*self.grid_shape):
                pos = ",".join("%.17g" % coords[a][idx[a]] for a in range(d))
                fh.write(f"{pos},{'%.17g' % self.values[idx]}\n")


def smeared_density(model, scheme, grid, sigma, fermi, grid_shape):
    """f^sigma-weighted density sum_nk |u_nk(r)|^2 on a real-space grid.

    Each eigenvector's plane-wave coefficients are placed on the frequency
    lattice and inverse-FFT'd; the grid must resolve the basis
    (every dimension >= 2*basis_radius + 1), which also makes the grid mean
    equal to the exact cell average.
    """
    _check_sigma(sigma)
    if not isinstance(model, PlaneWaveModel):
        raise TypeError(f"smeared_density requires a plane-wave model, got {model.kind}")
    shape = tuple(int(m) for m in grid_shape)
    if len(shape) != model.d:
        raise ValueError(f"grid_shape must have {model.d} dimensions")
    need = int(2 * model.basis_radius) + 1
    if any(m < need for m in shape):
        raise ValueError(f"grid_shape {shape} under-resolves the basis; need >= {need}")

    kint = model.basis.astype(np.int64)
    kmod = tuple(kint[:, a] % shape[a] for a in range(model.d))
    rho = np.zeros(shape)
    axes = tuple(range(1, model.d + 1))
    scale = float(np.prod(shape))
    for k in grid.points:
        w, v = model.states(k)
        x = (w - fermi) / sigma
        keep = x <= TAIL_CUTOFF
        if not keep.any():
            continue
        occ = scheme.occupation(x[keep])
        coeff = np.zeros((int(keep.sum()),) + shape, dtype=complex)
        coeff[(slice(None),) + kmod] = v[:, keep].T
        psi = np.fft.ifftn(coeff, axes=axes) * scale
        rho += grid.weight * np.tensordot(occ, np.abs(psi) ** 2, axes=(0, 0))
    return RealSpaceDensity(grid_shape=shape, values=rho, cell_volume=1.0)
