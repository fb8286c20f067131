"""Noise channels acting on GKP states.

Photon loss acts on the position density P(q) as an Ornstein-Uhlenbeck
process: q shrinks by exp(-kt/2) and is blurred by a Gaussian of variance
(1 - exp(-kt))/2. In Fourier space both steps are a single product,
chi_t(k) = chi_0(k exp(-kt/2)) exp(-sigma^2 k^2 / 2), and the scaled transform
is a chirp-z transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import czt

from . import fockrep
from . import gridstate as gs

SQRT_PI = gs.SQRT_PI
READOUT_MODELS = ("single_ancilla_logical", "surface_check")


@dataclass(frozen=True)
class LossParams:
    kappa_t: float
    decay: float = field(init=False)
    sigma2: float = field(init=False)

    def __post_init__(self):
        if not self.kappa_t >= 0:
            raise ValueError("kappa_t must be nonnegative")
        object.__setattr__(self, "decay", math.exp(-0.5 * self.kappa_t))
        object.__setattr__(self, "sigma2", -0.5 * math.expm1(-self.kappa_t))

    def then(self, other):
        """Loss of duration self followed by other (exposures add)."""
        return LossParams(self.kappa_t + other.kappa_t)


@dataclass(frozen=True, eq=False)
class QDensity:
    grid: gs.GridSpec
    p: np.ndarray

    def __post_init__(self):
        if np.any(self.p < 0):
            raise ValueError("density must be nonnegative")

    @classmethod
    def from_wavefunction(cls, psi):
        w = np.abs(psi.amp) ** 2
        return cls(psi.grid, w / (psi.grid.spacing * w.sum()))

    def mass(self):
        return float(self.grid.spacing * self.p.sum())

    def logical_prob(self):
        """(P0, P1) as for homodyne_logical_prob."""
        bits = gs.logical_bit(self.grid.q)
        p1 = float(self.p[bits == 1].sum())
        tot = float(self.p.sum())
        return (tot - p1) / tot, p1 / tot

    def expectation(self, alpha):
        """<exp(i alpha q)> by quadrature on the grid."""
        return complex(self.grid.spacing * np.sum(self.p * np.exp(1j * alpha * self.grid.q)))


def _scaled_transform(v, x0, dx, k0, dk, m, sign):
    """sum_n v_n exp(sign i (k0 + j dk)(x0 + n dx)) for j = 0..m-1, via the chirp-z transform."""
    a = np.exp(-sign * 1j * k0 * dx)
    w = np.exp(sign * 1j * dk * dx)
    out = czt(np.asarray(v, dtype=complex), m, w, a)
    return out * np.exp(sign * 1j * (k0 + dk * np.arange(m)) * x0)


def ou_evolve(p0, loss):
    """Evolve a position density under photon loss of exposure ``loss.kappa_t``."""
    grid = p0.grid
    if loss.kappa_t == 0:
        return QDensity(grid, p0.p.copy())
    n, h, x0 = grid.points, grid.spacing, -grid.half_width
    dk = 2 * math.pi / (n * h)
    k0 = -dk * (n // 2)
    k = k0 + dk * np.arange(n)
    chi = h * _scaled_transform(p0.p, x0, h, loss.decay * k0, loss.decay * dk, n, +1)
    chi *= np.exp(-0.5 * loss.sigma2 * k * k)
    p = (dk / (2 * math.pi)) * _scaled_transform(chi, k0, dk, x0, h, n, -1).real
    p = np.clip(p, 0.0, None)
    # chi_t(0) = chi_0(0), so only roundoff moves the mass
    return QDensity(grid, p * (p0.mass() / (h * p.sum())))


def stabilizer_expectation_decay(alpha, loss, initial_expect, m_shift=0):
    """<exp(i alpha q)> after loss for a state shifted by m_shift stabilizer steps 2 sqrt(pi) in q.

    ``initial_expect(a)`` returns <exp(i a q)> of the unshifted initial state.
    The shift contributes the phase exp(i alpha(t) 2 sqrt(pi) m), which is
    exp(2 pi i m exp(-kt/2)) for alpha = sqrt(pi).
    """
    at = alpha * loss.decay
    phase = np.exp(1j * at * 2 * SQRT_PI * m_shift)
    return complex(phase * math.exp(-0.25 * (alpha**2 - at**2)) * initial_expect(at))


def f_state_expectation(delta, logical="zero"):
    """Closed-form <exp(i a q)> of the F-kind approximate GKP state, as a callable of a."""
    s, sign = gs._peaks(logical, 14.0 / delta)
    w = sign * np.exp(-0.5 * delta**2 * s * s)
    ww = np.outer(w, w) * np.exp(-((s[:, None] - s[None, :]) ** 2) / (4 * delta**2))
    c = 0.5 * (s[:, None] + s[None, :])
    norm = ww.sum()

    def expect(a):
        return complex(np.sum(ww * np.exp(1j * a * c)) * math.exp(-0.25 * a * a * delta**2) / norm)

    return expect


def gaussian_displacement_params(delta, convention="half"):
    """sigma_0 of the Gaussian displacement channel matched to Delta: Delta/sqrt2 (half) or Delta (full)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if convention == "half":
        return delta / math.sqrt(2)
    if convention == "full":
        return float(delta)
    raise ValueError("convention must be 'half' or 'full'")


def db(delta):
    """Squeezing in dB, -10 log10 Delta^2."""
    return -20.0 * math.log10(delta)


def dephasing_smallangle(exp, var_theta):
    """Density matrix c_m c_n (1 - var_theta (m-n)^2 / 2) after small random rotations.

    First order in <theta^2>; ``var_theta`` >= 0.5 is rejected.
    """
    if not 0 <= var_theta < 0.5:
        raise ValueError("var_theta must lie in [0, 0.5)")
    c = np.asarray(exp.coeffs if hasattr(exp, "coeffs") else exp, dtype=complex)
    n = np.arange(len(c))
    d = n[:, None] - n[None, :]
    return np.outer(c, np.conj(c)) * (1.0 - 0.5 * var_theta * d * d)


def dephasing_full(exp):
    """Fully dephased density matrix (diagonal of photon-number probabilities)."""
    return np.diag(fockrep.dephased_distribution(exp))


def purity(rho):
    return float(np.real(np.sum(rho * rho.T)))


def readout_flip_prob(delta, model="single_ancilla_logical"):
    """Closed-form readout flip probability: (1 - exp(-pi Delta^2/4))/2 or (1 - exp(-pi Delta^2))/2."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if model == "single_ancilla_logical":
        return 0.5 * (1 - math.exp(-math.pi * delta**2 / 4))
    if model == "surface_check":
        return 0.5 * (1 - math.exp(-math.pi * delta**2))
    raise ValueError(f"model must be one of {READOUT_MODELS}")


def loss_sweep(psi, kappa_ts, alpha=SQRT_PI):
    """Rows (kappa_t, p_correct, Re <exp(i alpha q)>, Im <...>) for an initial wavefunction."""
    d0 = QDensity.from_wavefunction(psi)
    rows = []
    for kt in kappa_ts:
        d = ou_evolve(d0, LossParams(kt))
        e = d.expectation(alpha)
        rows.append((kt, d.logical_prob()[0], e.real, e.imag))
    return np.array(rows)


def write_loss_csv(rows, path):
    np.savetxt(path, rows, delimiter=",", header="kappa_t,p_correct,expectation_re,expectation_im", comments="", fmt="%.12g")
