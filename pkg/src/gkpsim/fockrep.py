"""Photon-number representation of approximate GKP and sensor states.

Coefficients are obtained from Hermite-function comb sums, normalized with
Jacobi theta functions. For u = exp(-2 Delta^2) the normalization of
exp(-Delta^2 n) applied to an ideal comb is a two-dimensional Riemann theta
value, which factorizes into products of one-dimensional thetas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .errors import NumericalError

SQRT_PI = math.sqrt(math.pi)
ROMIK_PHI = gamma(0.25) ** 8 / (128.0 * math.pi**4)
STATE_KINDS = ("gkp0", "gkp1", "sensor")


def hermite_psi(n, q):
    """Normalized Hermite function Psi_n(q) by the stable two-term recursion.

    Parameters
    ----------
    n : int
        Order, n >= 0.
    q : float or array_like
        Evaluation points.

    Returns
    -------
    float or ndarray
        Psi_n(q), same shape as ``q``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    table = hermite_table(n, q)
    return table[n] if np.ndim(q) else float(table[n])


def hermite_table(n_max, q):
    """All Hermite functions Psi_0..Psi_{n_max} at ``q``, shape (n_max+1, *q.shape)."""
    q = np.asarray(q, dtype=float)
    out = np.empty((n_max + 1,) + q.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * q * q)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * q * out[0]
    for n in range(2, n_max + 1):
        out[n] = q * math.sqrt(2.0 / n) * out[n - 1] - math.sqrt((n - 1) / n) * out[n - 2]
    return out


def theta(a, b, x):
    """Theta with characteristics at z = 0 and tau = i x.

    theta[a; b](0, i x) = sum_k exp(-pi x (k+a)^2 + 2 pi i (k+a) b). Returned as
    a float when the imaginary part vanishes (all characteristics used in this
    package), else as a complex number.
    """
    if not x > 0:
        raise ValueError("theta requires x > 0")
    kmax = int(math.ceil(math.sqrt(18 * math.log(10) / (math.pi * x)) + abs(a))) + 2
    k = np.arange(-kmax, kmax + 1) + a
    terms = np.exp(-math.pi * x * k * k) * np.exp(2j * math.pi * k * b)
    val = terms.sum()
    if abs(val.imag) <= 1e-15 * max(np.abs(terms).sum(), 1e-300):
        return float(val.real)
    return complex(val)


def theta2(x):
    return theta(0.5, 0.0, x)


def theta3(x):
    return theta(0.0, 0.0, x)


def theta4(x):
    return theta(0.0, 0.5, x)


@dataclass(frozen=True)
class ThetaParams:
    """Parameters of the theta-function normalizations at squeezing Delta."""

    delta: float
    u: float = field(init=False)
    omega: np.ndarray = field(init=False, repr=False)
    sigma2: float = field(init=False)

    def __post_init__(self):
        u = math.exp(-2.0 * self.delta**2)
        om = (2j / (1 - u * u)) * np.array([[1 + u * u, -2 * u], [-2 * u, 1 + u * u]])
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "sigma2", 0.5 * math.tanh(self.delta**2))
        if np.any(np.linalg.eigvalsh(om.imag) <= 0):
            raise NumericalError("Im(Omega) is not positive definite")


def riemann_theta_2d(a, b, omega, tol=1e-18):
    """Two-dimensional Riemann theta theta[a; b](0, Omega) by direct lattice sum.

    ``a`` and ``b`` are length-2 characteristics; Im(Omega) must be positive
    definite. Terms are kept while exp(-pi * lambda_min * |k|^2) > tol.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lam = np.linalg.eigvalsh(np.asarray(omega).imag).min()
    if lam <= 0:
        raise ValueError("Im(Omega) must be positive definite")
    kmax = int(math.ceil(math.sqrt(-math.log(tol) / (math.pi * lam)))) + 2
    k = np.arange(-kmax, kmax + 1)
    k1, k2 = np.meshgrid(k + a[0], k + a[1], indexing="ij")
    quad = omega[0, 0] * k1 * k1 + 2 * omega[0, 1] * k1 * k2 + omega[1, 1] * k2 * k2
    val = np.exp(1j * math.pi * quad + 2j * math.pi * (k1 * b[0] + k2 * b[1])).sum()
    return float(val.real) if abs(val.imag) < 1e-12 * abs(val) else complex(val)


def gkp_normalization(delta, j):
    """Norm of exp(-Delta^2 n) applied to the ideal comb of logical j (theta product)."""
    u = math.exp(-2.0 * delta**2)
    s2 = 0.5 * (1 - u) / (1 + u)
    t = theta(j / 2, 0.0, 8 * s2) * theta(0.0, 0.0, s2 / 2) + theta((j + 1) / 2, 0.0, 8 * s2) * theta(
        0.0, 0.5, s2 / 2
    )
    return t / (2 * SQRT_PI * (1 + u))


def gkp_normalization_riemann(delta, j):
    """Same normalization evaluated as a two-dimensional Riemann theta."""
    p = ThetaParams(delta)
    return riemann_theta_2d([j / 2, j / 2], [0, 0], p.omega) / math.sqrt(math.pi * (1 - p.u**2))


def sensor_normalization(delta):
    """Norm of exp(-Delta^2 n) applied to the ideal sensor comb sum_k |k sqrt(2 pi)>."""
    p = ThetaParams(delta)
    return riemann_theta_2d([0, 0], [0, 0], p.omega / 2) / math.sqrt(math.pi * (1 - p.u**2))


@dataclass(frozen=True)
class FockExpansion:
    """Photon-number coefficients c_0..c_{n_max} of an approximate code state."""

    coeffs: np.ndarray
    delta: float
    state_kind: str
    tail_mass: float

    @property
    def n_max(self):
        return len(self.coeffs) - 1


def default_n_max(delta):
    return 4 * math.ceil(1.0 / delta**2) + 100


def comb_hermite_sums(n_max, spacing, offset=0.0, alternating=False):
    """S_n = sum_k (+-1)^k Psi_n(offset + k*spacing) for n = 0..n_max.

    Points are kept while |q| <= 2 sqrt(n_max) + 9, beyond which every Psi_n
    with n <= n_max is below 1e-16.
    """
    qmax = 2.0 * math.sqrt(n_max) + 9.0
    kmax = int(math.ceil((qmax + abs(offset)) / spacing)) + 1
    k = np.arange(-kmax, kmax + 1)
    pts = offset + k * spacing
    keep = np.abs(pts) <= qmax
    pts, k = pts[keep], k[keep]
    w = np.where(k % 2 == 0, 1.0, -1.0) if alternating else np.ones_like(pts)
    table = hermite_table(n_max, pts)
    return table @ w


def fock_coeffs(delta, kind="gkp0", n_max=None):
    """Fock coefficients of exp(-Delta^2 n)|ideal> for a GKP codeword or the sensor state.

    Parameters
    ----------
    delta : float
        Squeezing parameter.
    kind : {"gkp0", "gkp1", "sensor"}
    n_max : int, optional
        Highest photon number kept; defaults to 4*ceil(1/Delta^2) + 100.

    Returns
    -------
    FockExpansion
        Real coefficients. Odd entries (GKP) or entries with n != 0 mod 4
        (sensor) are exactly zero. ``tail_mass`` is 1 - sum c_n^2.
    """
    if kind not in STATE_KINDS:
        raise ValueError(f"unknown state kind {kind!r}")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    n_max = default_n_max(delta) if n_max is None else int(n_max)
    n = np.arange(n_max + 1)
    if kind == "sensor":
        sums = comb_hermite_sums(n_max, math.sqrt(2 * math.pi))
        norm = sensor_normalization(delta)
        allowed = n % 4 == 0
    else:
        j = 0 if kind == "gkp0" else 1
        sums = comb_hermite_sums(n_max, 2 * SQRT_PI, offset=j * SQRT_PI)
        norm = gkp_normalization(delta, j)
        allowed = n % 2 == 0
    c = np.where(allowed, np.exp(-(delta**2) * n) * sums / math.sqrt(norm), 0.0)
    tail = max(1.0 - float(np.sum(c * c)), 0.0)
    if tail > 1e-4:
        raise NumericalError(f"n_max={n_max} leaves tail mass {tail:.2e} > 1e-4")
    return FockExpansion(coeffs=c, delta=float(delta), state_kind=kind, tail_mass=tail)


def thermal_asymptote(delta):
    """Mean photon number u/(1-u) of the thermal law approximating the Fock envelope."""
    u = math.exp(-2.0 * delta**2)
    return u / (1.0 - u)


def thermal_pn(nbar, n):
    """Geometric photon-number law p_n = (nbar+1)^-1 (nbar/(nbar+1))^n."""
    n = np.asarray(n, dtype=float)
    return (nbar / (nbar + 1.0)) ** n / (nbar + 1.0)


def dephased_distribution(exp):
    """Photon-number distribution left after full dephasing: c_n^2."""
    return np.asarray(exp.coeffs, dtype=float) ** 2


def romik_sign(n):
    """Sign of d(n) from the lattice sum over z = t + i s of exp(-pi|z|^2/2) z^(4n) (-1)^(ts).

    Returns +1 or -1, or 0 when the sum is below 1e-12 of its largest term
    (indeterminate). Valid for 0 <= n <= 40.
    """
    if not 0 <= n <= 40:
        raise ValueError("romik_sign supports 0 <= n <= 40")
    p = 4 * n
    r = int(math.ceil(2 * math.sqrt(p) + 10))
    t, s = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1), indexing="ij")
    z = t + 1j * s
    mod2 = (t * t + s * s).astype(float)
    with np.errstate(divide="ignore"):
        logmag = -0.5 * math.pi * mod2 + (0.5 * p * np.log(mod2) if p else 0.0)
    if p:
        logmag = np.where(mod2 > 0, logmag, -np.inf)
    ref = logmag.max()
    phase = np.exp(1j * p * np.angle(z)) * np.where((t * s) % 2 == 0, 1.0, -1.0)
    terms = np.exp(logmag - ref) * phase
    total = terms.sum().real
    if abs(total) < 1e-12:
        return 0
    return 1 if total > 0 else -1


def romik_d(m, n_max=None):
    """Floating-point value of the integer d(m) recovered from the sensor comb sum.

    Uses sum_k Psi_{4m}(k sqrt(2 pi)) = theta3(1) sqrt(16^m Phi^(2m) / (sqrt(pi) (4m)!)) d(m).
    """
    n = 4 * m
    s = comb_hermite_sums(n, math.sqrt(2 * math.pi))[n]
    log_scale = 0.5 * (2 * m * math.log(4 * ROMIK_PHI) - 0.5 * math.log(math.pi) - math.lgamma(n + 1))
    return s / (theta3(1.0) * math.exp(log_scale))


def write_fock_csv(exp, path):
    """CSV with columns n, c_n, c_n_squared, thermal_pn; header carries Delta, kind, n_max."""
    n = np.arange(exp.n_max + 1)
    pn = thermal_pn(thermal_asymptote(exp.delta), n)
    data = np.column_stack([n, exp.coeffs, exp.coeffs**2, pn])
    header = f"delta={exp.delta}, kind={exp.state_kind}, n_max={exp.n_max}\nn,c_n,c_n_squared,thermal_pn"
    np.savetxt(path, data, delimiter=",", header=header, fmt=["%d", "%.17g", "%.17g", "%.17g"])
