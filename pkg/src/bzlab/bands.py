"""Band-structure models on the Brillouin-zone torus B = (-1/2, 1/2)^d.

All k-points are fractional reciprocal coordinates. Every model evaluates a
fixed number of bands, sorted ascending, at any k; evaluation is pure and
models are immutable, so they can be shared freely across threads.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_frac(k):
    """Wrap fractional coordinates into [-1/2, 1/2). Idempotent; 1/2 maps to -1/2."""
    return (np.asarray(k, dtype=float) + 0.5) % 1.0 - 0.5


def _as_points(k, d):
    """Coerce a single k-point or an (n, d) batch to a 2-D array, checking dimension."""
    arr = np.atleast_2d(np.asarray(k, dtype=float))
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValueError(f"expected k-points of dimension {d}, got shape {np.shape(k)}")
    return arr


class BandModel:
    """Base class: d-dimensional model returning band_count sorted energies per k."""

    d = None
    band_count = None
    kind = None

    def bands_many(self, pts):
        """Energies at an (n, d) array of fractional k-points -> (n, band_count), sorted."""
        raise NotImplementedError

    def bands(self, k):
        """Energies at a single k-point -> (band_count,) non-decreasing array."""
        return self.bands_many(_as_points(k, self.d))[0]


class AnalyticCosineBand(BandModel):
    """The single analytic 2-D test band 3 cos(2pi k1) cos(2pi k2) + sin(4pi k1) cos(4pi k2)."""

    d = 2
    band_count = 1
    kind = "AnalyticSingleBand"

    def bands_many(self, pts):
        pts = _as_points(pts, 2)
        k1 = pts[:, 0]
        k2 = pts[:, 1]
        e = (3.0 * np.cos(TWO_PI * k1) * np.cos(TWO_PI * k2)
             + np.sin(2.0 * TWO_PI * k1) * np.cos(2.0 * TWO_PI * k2))
        return e[:, None]


class GrapheneTightBinding(BandModel):
    """Nearest-neighbour tight-binding graphene: 2x2 fiber with zero diagonal.

    The off-diagonal entry is sum_j exp(-2 pi i c_j(k)) with
    c1 = (k1+k2)/3, c2 = (k1-2 k2)/3, c3 = (-2 k1+k2)/3, so the two bands are
    -|h(k)| and +|h(k)|. The matrix itself is only pseudo-periodic, but its
    eigenvalues are periodic on the torus, which is all we evaluate.
    """

    d = 2
    band_count = 2
    kind = "GrapheneTB"

    @staticmethod
    def offdiag(pts):
        pts = _as_points(pts, 2)
        k1 = pts[:, 0]
        k2 = pts[:, 1]
        c1 = (k1 + k2) / 3.0
        c2 = (k1 - 2.0 * k2) / 3.0
        c3 = (-2.0 * k1 + k2) / 3.0
        return (np.exp(-TWO_PI * 1j * c1)
                + np.exp(-TWO_PI * 1j * c2)
                + np.exp(-TWO_PI * 1j * c3))

    def bands_many(self, pts):
        a = np.abs(self.offdiag(pts))
        return np.stack([-a, a], axis=1)


class PlaneWaveModel(BandModel):
    """Plane-wave discretization of the fiber of -1/2 Laplacian + V at wavevector k.

    The basis is every integer vector K with |K| <= basis_radius; the matrix is
        H(k)[K, K'] = 1/2 |k + K|^2 delta_{KK'} + vhat(K - K'),
    Hermitian by the stored coefficient symmetry vhat(-G) = conj(vhat(G)).
    Eigenvalues of a fixed truncated basis are not exactly periodic in k; the
    violation is tiny at the basis sizes used here and is accepted.
    """

    kind = "PlaneWave"

    def __init__(self, potential, basis_radius, d):
        if basis_radius <= 0:
            raise ValueError("basis_radius must be positive")
        if d not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        self.d = d
        self.basis_radius = float(basis_radius)
        self.potential = dict(potential)
        self.basis = _ball_basis(d, self.basis_radius)
        self.band_count = len(self.basis)
        self._vmat = self._potential_matrix()

    def _potential_matrix(self):
        nb = self.band_count
        v = np.zeros((nb, nb), dtype=complex)
        for i in range(nb):
            for j in range(nb):
                g = tuple(int(x) for x in (self.basis[i] - self.basis[j]))
                v[i, j] = self.potential.get(g, 0.0)
        if np.max(np.abs(v - v.conj().T)) > 1e-13 * max(1.0, np.max(np.abs(v))):
            raise ValueError("potential coefficients violate Hermitian symmetry")
        return v

    def hamiltonian(self, k):
        """Dense Hermitian fiber matrix at one fractional k-point."""
        k = np.asarray(k, dtype=float).reshape(self.d)
        kin = 0.5 * np.sum((k[None, :] + self.basis) ** 2, axis=1)
        h = self._vmat.copy()
        h[np.diag_indices_from(h)] += kin
        return h

    def bands_many(self, pts):
        pts = _as_points(pts, self.d)
        kin = 0.5 * np.sum((pts[:, None, :] + self.basis[None, :, :]) ** 2, axis=2)
        h = np.broadcast_to(self._vmat, (len(pts),) + self._vmat.shape).copy()
        idx = np.arange(self.band_count)
        h[:, idx, idx] += kin
        return np.linalg.eigvalsh(h)

    def states(self, k):
        """Energies and orthonormal eigenvector coefficients at one k-point.

        Returns (energies, states) with states[:, n] the coefficient vector of
        the n-th band over the plane-wave basis. Vectors within a degenerate
        cluster are only defined up to rotation.
        """
        w, v = np.linalg.eigh(self.hamiltonian(k))
        return w, v

    def sup_potential_bound(self):
        """Upper bound on sup |V(r)|: sum of coefficient magnitudes."""
        return float(sum(abs(c) for c in self.potential.values()))


def _ball_basis(d, radius):
    """All integer vectors with Euclidean norm <= radius, in lexicographic order."""
    r = int(np.floor(radius))
    axes = [np.arange(-r, r + 1)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    keep = np.sum(grid.astype(float) ** 2, axis=1) <= radius ** 2 + 1e-12
    return grid[keep].astype(float)


def build_planewave_model(coeffs, basis_radius, d):
    """Build a PlaneWaveModel from potential Fourier coefficients.

    ``coeffs`` maps integer K-tuples to complex values. Missing mirrors -K are
    filled in by conjugation; if both K and -K are supplied they must already
    be conjugate, otherwise the potential would not be real-valued.
    """
    full = {}
    for key, val in coeffs.items():
        key = tuple(int(x) for x in (key if isinstance(key, tuple) else (key,)))
        if len(key) != d:
            raise ValueError(f"coefficient key {key} does not have dimension {d}")
        val = complex(val)
        mirror = tuple(-x for x in key)
        if key in full and abs(full[key] - val) > 1e-13 * max(1.0, abs(val)):
            raise ValueError(f"conflicting coefficients supplied for {key}")
        full[key] = val
        if mirror in coeffs:
            other = complex(coeffs[mirror])
            if abs(other - val.conjugate()) > 1e-13 * max(1.0, abs(val)):
                raise ValueError(f"coefficients at {key} and {mirror} are not conjugate")
        full[mirror] = val.conjugate()
    return PlaneWaveModel(full, basis_radius, d)


def load_potential(path, d):
    """Read potential coefficients from a text file of lines ``K1 ... Kd re im``."""
    coeffs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != d + 2:
                raise ValueError(f"{path}:{lineno}: expected {d + 2} fields, got {len(parts)}")
            try:
                key = tuple(int(p) for p in parts[:d])
                re, im = float(parts[d]), float(parts[d + 1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            coeffs[key] = complex(re, im)
    return coeffs


def eval_bands(model, k):
    """Sorted band energies of ``model`` at fractional k-point ``k``."""
    return model.bands(k)


def eval_states(model, k):
    """Energies plus plane-wave eigenvector coefficients; plane-wave models only."""
    if not isinstance(model, PlaneWaveModel):
        raise TypeError(f"eval_states requires a plane-wave model, got {model.kind}")
    return model.states(k)


_NAMED_MODELS = {
    "case1": AnalyticCosineBand,
    "case2": AnalyticCosineBand,
    "graphene": GrapheneTightBinding,
}


def model_by_name(name):
    """Analytic test-band lookup for the names used by the CLI and studies."""
    try:
        return _NAMED_MODELS[name]()
    except KeyError:
        raise ValueError(f"unknown band model {name!r}; known: {sorted(_NAMED_MODELS)}") from None
