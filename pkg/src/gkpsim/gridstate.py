"""Single-mode pure states on a uniform position grid.

Conventions: q = (a + a^dag)/sqrt2, p = i(a^dag - a)/sqrt2, and
exp(-i u p)|q> = |q + u>. The grid is q_i = -L + i h, i = 0..N-1, with h = 2L/N,
so q = 0 sits on index N/2. Translations by arbitrary amounts are done with a
momentum-space phase (band-limited interpolation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import fockrep
from .errors import GridError

SQRT_PI = math.sqrt(math.pi)
KINDS = ("E", "D", "F", "FV")
LOGICALS = ("zero", "one", "plus", "minus")
EDGE_TOL = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Uniform position grid of ``points`` nodes on [-half_width, half_width)."""

    half_width: float = 20 * SQRT_PI
    points: int = 2**13

    def __post_init__(self):
        n = int(self.points)
        if n < 2 or n & (n - 1):
            raise GridError(f"points must be a power of two, got {self.points}")
        if not self.half_width > 0:
            raise GridError("half_width must be positive")

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.points

    @cached_property
    def q(self):
        return -self.half_width + self.spacing * np.arange(self.points)

    @cached_property
    def k(self):
        """Angular wavenumbers in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    @property
    def p_max(self):
        return np.pi / self.spacing

    def check_resolves(self, delta):
        if self.spacing > delta / 8:
            raise GridError(f"grid too coarse: h={self.spacing:.4g} > delta/8={delta / 8:.4g}")

    @classmethod
    def for_delta(cls, delta, half_width=None, drift=12.0):
        """Smallest power-of-two grid with h <= delta/8 on the given (or a delta-adapted) range.

        The default range holds the exp(-delta^2 q^2/2) envelope down to 1e-12
        plus ``drift`` for envelope spreading during repeated error correction.
        """
        if half_width is None:
            half_width = max(10 * SQRT_PI, 7.5 / delta + drift)
            half_width = SQRT_PI * math.ceil(half_width / SQRT_PI)
        n = 2 ** math.ceil(math.log2(2 * half_width / (delta / 8)))
        return cls(half_width=float(half_width), points=int(n))


@dataclass(frozen=True)
class GkpApprox:
    """Which finite-squeezing approximation of which logical state to build."""

    kind: str
    delta: float
    logical: str = "zero"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.logical not in LOGICALS:
            raise ValueError(f"logical must be one of {LOGICALS}")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: GridSpec
    amp: np.ndarray
    normalized: bool = True

    @property
    def q(self):
        return self.grid.q

    def norm(self):
        return float(self.grid.spacing * np.sum(np.abs(self.amp) ** 2))

    def density(self):
        return np.abs(self.amp) ** 2

    def normalize(self):
        return WaveFunction(self.grid, self.amp / math.sqrt(self.norm()), True)


def _comb(logical):
    """(spacing, offset, alternating) of the ideal comb for a logical state."""
    return {
        "zero": (2 * SQRT_PI, 0.0, False),
        "one": (2 * SQRT_PI, SQRT_PI, False),
        "plus": (SQRT_PI, 0.0, False),
        "minus": (SQRT_PI, 0.0, True),
    }[logical]


def _peaks(logical, reach):
    spacing, offset, alt = _comb(logical)
    kmax = int(math.ceil((reach + abs(offset)) / spacing)) + 1
    k = np.arange(-kmax, kmax + 1)
    s = offset + k * spacing
    keep = np.abs(s) <= reach
    sign = np.where(k % 2 == 0, 1.0, -1.0) if alt else np.ones(k.shape)
    return s[keep], sign[keep]


def fv_log_amplitude(x, delta, which):
    """Log of the unnormalized reverse-Villain ancilla amplitude, zero at x = 0.

    ``which`` is "zero" (cos(sqrt(pi) x) comb) or "plus" (cos(2 sqrt(pi) x) comb).
    """
    x = np.asarray(x, dtype=float)
    if which == "zero":
        comb = (np.cos(SQRT_PI * x) - 1.0) / (math.pi * delta**2)
    elif which == "plus":
        comb = (np.cos(2 * SQRT_PI * x) - 1.0) / (4 * math.pi * delta**2)
    else:
        raise ValueError("FV ancillas are 'zero' or 'plus'")
    return -0.5 * delta**2 * x * x + comb


def _amplitude(spec, approx):
    q = spec.q
    d = approx.delta
    if approx.kind == "FV":
        if approx.logical in ("zero", "plus"):
            return np.exp(fv_log_amplitude(q, d, approx.logical)).astype(complex)
        if approx.logical == "one":
            return np.exp(fv_log_amplitude(q - SQRT_PI, d, "zero")).astype(complex)
        return np.exp(fv_log_amplitude(q, d, "plus")) * np.exp(1j * SQRT_PI * q)
    if approx.kind == "D":
        return _d_amplitude(q, d, approx.logical).astype(complex)
    s, sign = _peaks(approx.logical, spec.half_width + 12 * d)
    x = q[:, None] - s[None, :]
    if approx.kind == "F":
        expo = -0.5 * x * x / d**2 - 0.5 * d**2 * s[None, :] ** 2
    else:
        expo = -0.5 * x * x / d**2 - d**2 * (q[:, None] + s[None, :]) ** 2 / 8
    return (np.exp(expo) @ sign).astype(complex)


def d_state_n_max(delta):
    return max(fockrep.default_n_max(delta), int(math.ceil(14 * math.log(10) / (2 * delta**2))))


def _d_amplitude(q, delta, logical):
    n_max = d_state_n_max(delta)
    spacing, offset, alt = _comb(logical)
    sums = fockrep.comb_hermite_sums(n_max, spacing, offset, alt)
    c = np.exp(-(delta**2) * np.arange(n_max + 1)) * sums
    c[np.abs(c) < 1e-300] = 0.0
    out = np.zeros_like(q)
    # Hermite rows are generated on the fly to avoid storing the full table
    psi_prev = math.pi**-0.25 * np.exp(-0.5 * q * q)
    psi = math.sqrt(2.0) * q * psi_prev
    out += c[0] * psi_prev
    if n_max >= 1:
        out += c[1] * psi
    for n in range(2, n_max + 1):
        psi, psi_prev = q * math.sqrt(2.0 / n) * psi - math.sqrt((n - 1) / n) * psi_prev, psi
        out += c[n] * psi
    return out


def _fix_phase(amp):
    mag = np.abs(amp)
    ref = amp[len(amp) // 2]
    if abs(ref) <= 1e-14 * mag.max():
        ref = amp[np.argmax(mag > 1e-14 * mag.max())]
    if abs(ref) == 0:
        return amp
    return amp * (abs(ref) / ref)


def check_edges(psi, tol=EDGE_TOL):
    mag = np.abs(psi.amp)
    edge = max(mag[:4].max(), mag[-4:].max())
    if edge > tol * mag.max():
        raise GridError(f"envelope truncated: edge amplitude {edge / mag.max():.2e} of peak")


def prepare_gkp(spec, approx, check=True):
    """Normalized approximate GKP state on ``spec``.

    Kinds: F is the Gaussian-enveloped comb of Gaussians, E the Gaussian
    displacement channel applied to the ideal comb (closed form of the
    displacement integral), D the photon-number damping exp(-Delta^2 n)
    synthesized from Fock coefficients, FV the reverse-Villain comb.

    Raises GridError if the grid is too coarse (h > Delta/8) or the envelope is
    cut by the grid edge (edge amplitude above 1e-8 of the peak) when ``check``.
    """
    if check:
        spec.check_resolves(approx.delta)
    amp = _fix_phase(_amplitude(spec, approx))
    psi = WaveFunction(spec, amp, False).normalize()
    if check:
        check_edges(psi)
    return psi


def vacuum(spec):
    amp = math.pi**-0.25 * np.exp(-0.5 * spec.q**2)
    return WaveFunction(spec, amp.astype(complex), False).normalize()


def translate(amp, grid, shift):
    """psi(q - shift) via a momentum-space phase."""
    if shift == 0:
        return np.array(amp, dtype=complex)
    return np.fft.ifft(np.fft.fft(amp) * np.exp(-1j * grid.k * shift))


def _check_margin(grid, shift_q, shift_p):
    if abs(shift_q) >= grid.half_width / 2 or abs(shift_p) >= grid.p_max / 2:
        raise GridError(f"shift ({shift_q:.3g}, {shift_p:.3g}) exceeds the safe grid margin")


def apply_displacement(psi, shift_q, shift_p):
    """psi(q) -> exp(i shift_p q) psi(q - shift_q): moves <q> by shift_q and <p> by shift_p."""
    _check_margin(psi.grid, shift_q, shift_p)
    amp = translate(psi.amp, psi.grid, shift_q)
    if shift_p:
        amp = amp * np.exp(1j * shift_p * psi.grid.q)
    return WaveFunction(psi.grid, amp, psi.normalized)


def expectation_displacement(psi, shift_q, shift_p):
    """<psi| exp(i shift_q q) exp(-i shift_p p) |psi> = int psi*(q) e^{i shift_q q} psi(q - shift_p) dq."""
    _check_margin(psi.grid, shift_p, shift_q)
    moved = translate(psi.amp, psi.grid, shift_p)
    val = np.sum(np.conj(psi.amp) * np.exp(1j * shift_q * psi.grid.q) * moved) * psi.grid.spacing
    return complex(val)


def effective_squeezing(psi):
    """(Delta_q, Delta_p) with Delta = sqrt(ln(1/|<S>|^2) / (2 pi)).

    <S_q> = <exp(i 2 sqrt(pi) q)> and <S_p> = int psi*(q) psi(q - 2 sqrt(pi)) dq.
    Returns inf for a quadrature whose |<S>| is below 1e-12.
    """
    out = []
    for sq, sp in ((2 * SQRT_PI, 0.0), (0.0, 2 * SQRT_PI)):
        mag = abs(expectation_displacement(psi, sq, sp))
        out.append(math.inf if mag < 1e-12 else math.sqrt(max(-math.log(mag * mag), 0.0) / (2 * math.pi)))
    return tuple(out)


def mean_photon_number(psi):
    """<n> = (<p^2> + <q^2>)/2 - 1/2 with <p^2> from the spectral derivative."""
    g = psi.grid
    dens = np.abs(psi.amp) ** 2
    q2 = np.sum(g.q**2 * dens) * g.spacing
    spec = np.fft.fft(psi.amp)
    p2 = np.sum(g.k**2 * np.abs(spec) ** 2) * g.spacing / g.points
    return float(0.5 * (q2 + p2) / psi.norm() - 0.5)


def logical_bit(q):
    """Parity of the multiple of sqrt(pi) closest to q (0 = even coset)."""
    return (np.floor(np.asarray(q) / SQRT_PI + 0.5).astype(np.int64) % 2).astype(np.int64)


def homodyne_logical_prob(psi):
    """(P0, P1): mass of |psi|^2 on grid cells centred in the even/odd cosets."""
    w = np.abs(psi.amp) ** 2 * psi.grid.spacing
    bits = logical_bit(psi.grid.q)
    p1 = float(np.sum(w[bits == 1]))
    p0 = float(np.sum(w[bits == 0]))
    tot = p0 + p1
    return p0 / tot, p1 / tot


def fidelity(a, b):
    """|<a|b>|^2 for normalized states on the same grid."""
    ov = np.sum(np.conj(a.amp) * b.amp) * a.grid.spacing
    return float(abs(ov) ** 2)


def write_wavefunction_csv(psi, path):
    g = psi.grid
    header = f"gkpsim wavefunction v1, L={g.half_width!r}, N={g.points}\nq,re_psi,im_psi"
    data = np.column_stack([g.q, psi.amp.real, psi.amp.imag])
    np.savetxt(path, data, delimiter=",", header=header, fmt="%.17g")


def read_wavefunction_csv(path):
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# gkpsim wavefunction v1"):
        raise ValueError("not a gkpsim wavefunction file")
    fields = dict(part.strip().split("=") for part in first.split(",")[1:])
    grid = GridSpec(float(fields["L"]), int(fields["N"]))
    data = np.loadtxt(path, delimiter=",", comments="#")
    return WaveFunction(grid, data[:, 1] + 1j * data[:, 2], True)
