"""Occupation families for smeared Brillouin-zone sums.

Each scheme supplies three dimensionless kernels:

* ``occupation(x)``  -- smooth step f1, falling from 1 to 0;
* ``delta(x)``       -- mollifier, exactly -d/dx occupation;
* ``entropy_kernel(x)`` -- the unique Schwartz antiderivative s with s' = x delta(x).

Callers apply the sigma-scaling themselves, i.e. they evaluate the kernels at
(energy - level) / sigma. A scheme's order p is the moment order of delta:
M_0 = 1 and M_1 .. M_p = 0. All kernels accept scalars or numpy arrays and are
overflow-safe for |x| up to 1e4.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc

from .errors import SchemeOrderError

SQRT_PI = math.sqrt(math.pi)

# Largest p probed by validate_order; MP with N > 3 is out of scope.
MAX_PROBED_ORDER = 8


def hermite(n, x):
    """Physicists' Hermite polynomial H_n via H_{n+1} = 2x H_n - 2n H_{n-1}."""
    x = np.asarray(x, dtype=float)
    h_prev = np.zeros_like(x)
    h = np.ones_like(x)
    for m in range(n):
        h, h_prev = 2.0 * x * h - 2.0 * m * h_prev, h
    return h


class SmearingScheme:
    """Base class; concrete schemes define the three kernels and declared_order."""

    name = None
    declared_order = None

    def occupation(self, x):
        raise NotImplementedError

    def delta(self, x):
        raise NotImplementedError

    def entropy_kernel(self, x):
        raise NotImplementedError

    # delta decays at least like exp(-|x|); this cutoff makes integer-moment
    # tails smaller than 1e-12 up to n = 12.
    moment_cutoff = 100.0

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} p={self.declared_order}>"


class FermiDirac(SmearingScheme):
    """f1(x) = 1/(1 + e^x), computed on the stable branch for either sign."""

    name = "fd"
    declared_order = 1

    def occupation(self, x):
        x = np.asarray(x, dtype=float)
        t = np.exp(-np.abs(x))
        return np.where(x > 0, t, 1.0) / (1.0 + t)

    def delta(self, x):
        x = np.asarray(x, dtype=float)
        t = np.exp(-np.abs(x))
        return t / (1.0 + t) ** 2

    def entropy_kernel(self, x):
        # s = f ln f + (1-f) ln(1-f) = -|x| t/(1+t) - log1p(t), t = e^{-|x|}
        x = np.abs(np.asarray(x, dtype=float))
        t = np.exp(-x)
        return -x * t / (1.0 + t) - np.log1p(t)


class Gaussian(SmearingScheme):
    """f1(x) = erfc(x)/2, delta = exp(-x^2)/sqrt(pi)."""

    name = "gauss"
    declared_order = 1
    moment_cutoff = 15.0

    def occupation(self, x):
        return 0.5 * erfc(np.asarray(x, dtype=float))

    def delta(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-x * x) / SQRT_PI

    def entropy_kernel(self, x):
        x = np.asarray(x, dtype=float)
        return -np.exp(-x * x) / (2.0 * SQRT_PI)


class MethfesselPaxton(SmearingScheme):
    """Hermite-corrected Gaussian of order 2N+1.

    f1 = f1_gauss + sum_{n=1..N} A_n H_{2n-1}(x) exp(-x^2), with
    A_n = (-1)^n / (n! 4^n sqrt(pi)); the mollifier is
    delta = sum_{n=0..N} A_n H_{2n}(x) exp(-x^2). Not monotone for N >= 1.
    """

    moment_cutoff = 15.0

    def __init__(self, n):
        n = int(n)
        if n < 0 or n > 3:
            raise ValueError("Methfessel-Paxton N must be in 0..3")
        self.n = n
        self.name = f"mp{n}"
        self.declared_order = 2 * n + 1
        self._coeff = [(-1.0) ** m / (math.factorial(m) * 4.0 ** m * SQRT_PI)
                       for m in range(n + 1)]

    def occupation(self, x):
        x = np.asarray(x, dtype=float)
        out = 0.5 * erfc(x)
        if self.n:
            gauss = np.exp(-x * x)
            for m in range(1, self.n + 1):
                out = out + self._coeff[m] * hermite(2 * m - 1, x) * gauss
        return out

    def delta(self, x):
        x = np.asarray(x, dtype=float)
        gauss = np.exp(-x * x)
        out = self._coeff[0] * gauss
        for m in range(1, self.n + 1):
            out = out + self._coeff[m] * hermite(2 * m, x) * gauss
        return out

    def entropy_kernel(self, x):
        # Antiderivative of t*delta from x H_{2m} = H_{2m+1}/2 + 2m H_{2m-1}
        # and d/dx [H_j e^{-x^2}] = -H_{j+1} e^{-x^2}.
        x = np.asarray(x, dtype=float)
        gauss = np.exp(-x * x)
        out = -self._coeff[0] * 0.5 * gauss
        for m in range(1, self.n + 1):
            term = 0.5 * hermite(2 * m, x) + 2.0 * m * hermite(2 * m - 2, x)
            out = out - self._coeff[m] * term * gauss
        return out


class ColdSmearing(SmearingScheme):
    """Cold smearing with mollifier (a x^3 - x^2 - 3a x/2 + 3/2) exp(-x^2)/sqrt(pi).

    The occupation is the exact complementary antiderivative of the mollifier,
    f1_gauss + (2a x^2 - 2x - a) exp(-x^2)/(4 sqrt(pi)), so delta = -f1' holds
    identically. The third moment is 3a/4, so the declared order 3 requires
    the default a = 0 (see validate_order); a is kept configurable.
    """

    name = "cold"
    declared_order = 3
    moment_cutoff = 15.0
    DEFAULT_A = 0.0

    def __init__(self, a=None):
        self.a = float(self.DEFAULT_A if a is None else a)

    def occupation(self, x):
        x = np.asarray(x, dtype=float)
        a = self.a
        corr = (2.0 * a * x * x - 2.0 * x - a) * np.exp(-x * x) / (4.0 * SQRT_PI)
        return 0.5 * erfc(x) + corr

    def delta(self, x):
        x = np.asarray(x, dtype=float)
        a = self.a
        poly = a * x ** 3 - x * x - 1.5 * a * x + 1.5
        return poly * np.exp(-x * x) / SQRT_PI

    def entropy_kernel(self, x):
        x = np.asarray(x, dtype=float)
        a = self.a
        poly = 0.5 * x * x - 0.25 - 0.5 * a * x ** 3
        return poly * np.exp(-x * x) / SQRT_PI


def scheme_by_name(name, cold_a=None):
    """Named scheme lookup used by config files and the CLI."""
    table = {
        "fd": FermiDirac,
        "gauss": Gaussian,
        "mp1": lambda: MethfesselPaxton(1),
        "mp2": lambda: MethfesselPaxton(2),
        "cold": lambda: ColdSmearing(cold_a),
    }
    try:
        return table[name]()
    except KeyError:
        raise ValueError(f"unknown smearing scheme {name!r}; known: {sorted(table)}") from None


ALL_SCHEME_NAMES = ("fd", "gauss", "mp1", "mp2", "cold")


def moment(scheme, n):
    """n-th moment of the scheme's mollifier, by adaptive quadrature.

    Integrates x^n delta(x) over [-T, T] with T = scheme.moment_cutoff, which
    keeps the neglected tail below 1e-12 for n <= 12; the quadrature itself is
    run at 1e-13 absolute so the total error stays under 1e-10.
    """
    n = int(n)
    if n < 0 or n > 12:
        raise ValueError("moment order must be in 0..12")
    t = scheme.moment_cutoff

    def integrand(x):
        return x ** n * float(scheme.delta(x))

    # Split at 0: the integrand can be sharply peaked there.
    lo, _ = quad(integrand, -t, 0.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    hi, _ = quad(integrand, 0.0, t, epsabs=1e-13, epsrel=1e-12, limit=200)
    return lo + hi


def validate_order(scheme, moment_tol=1e-8):
    """Measure the scheme's order from its moments and check the declaration.

    Returns the largest p <= MAX_PROBED_ORDER with M_0 = 1 and |M_n| <= tol
    for 1 <= n <= p. A mismatch against declared_order raises SchemeOrderError.
    """
    m0 = moment(scheme, 0)
    if abs(m0 - 1.0) > moment_tol:
        raise SchemeOrderError(f"{scheme.name}: M_0 = {m0!r}, expected 1")
    p = 0
    for n in range(1, MAX_PROBED_ORDER + 1):
        if abs(moment(scheme, n)) > moment_tol:
            break
        p = n
    if p != scheme.declared_order:
        raise SchemeOrderError(
            f"{scheme.name}: measured order {p} != declared order {scheme.declared_order}")
    return p


def scan_cold_parameter(lo=0.0, hi=4.0, step=1e-3, xstep=1e-3, xmax=8.0):
    """Largest a with min f1_cold(x) >= 0 on [-xmax, xmax], scanned at step 1e-3.

    Kept as the tuning oracle for the cold occupation's non-negativity; the
    result is incompatible with the order-3 moment condition M_3 = 3a/4 = 0,
    which is why ColdSmearing defaults to a = 0 instead.
    """
    xs = np.arange(-xmax, xmax + xstep / 2, xstep)
    best = None
    for a in np.arange(lo, hi + step / 2, step):
        if float(np.min(ColdSmearing(a).occupation(xs))) >= 0.0:
            best = float(a)
    return best
