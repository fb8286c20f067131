"""Repeated Steane error correction of a single GKP mode with finitely squeezed ancillas.

One round is Z-EC followed by X-EC. In Z-EC an FV |0> ancilla controls a CNOT onto
the data and is read out in p. In X-EC the data controls a CNOT onto an FV |+>
ancilla, which is read out in q. Integrating out the ancillas leaves
single-mode maps:

    Z-EC:  psi'(q)  = int dx psi0(x) exp(-i p_out x) psi(q - x)
    X-EC:  psi''(q) = psi_plus(q - q_out) psi'(q)

The Born density of p_out follows from Parseval:

    P(p) = (1/2pi) int dq |psi'_p(q)|^2 = sum_d C_a(d) conj(C_psi(d)) exp(-i p h d) h^3/2pi

where C are autocorrelations over lags d on the grid. The density of q_out is
the convolution of |psi'|^2 with |psi_plus|^2. Every transform is zero-padded
to 2N points, so the convolutions are linear (no wraparound). The part of the
Z-EC output that falls outside the grid is tracked as a truncation loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from . import gridstate as gs
from .errors import GridError, NumericalError

SQRT_PI = gs.SQRT_PI
FEEDBACK_MODES = ("none", "recenter", "memoryless")
ANCILLA_KINDS = ("FV", "F")
TRUNCATION_TOL = 1e-8


def ancilla_log_amplitude(x, delta, which, kind="FV"):
    """Log of the unnormalized ancilla amplitude at x, for which in {"zero", "plus"}.

    Kind FV is the reverse-Villain form used throughout. Kind F is the
    Gaussian-enveloped comb of Gaussians, kept for comparison with the
    closed-form Gaussian-comb dynamics.
    """
    if kind == "FV":
        return gs.fv_log_amplitude(x, delta, which)
    if kind != "F":
        raise ValueError(f"ancilla kind must be one of {ANCILLA_KINDS}")
    x = np.asarray(x, dtype=float)
    s, _ = gs._peaks(which, float(np.abs(x).max()) + 12 * delta)
    expo = -0.5 * (x[..., None] - s) ** 2 / delta**2 - 0.5 * delta**2 * s * s
    return logsumexp(expo, axis=-1)


@dataclass(frozen=True)
class EcRound:
    p_out: float
    q_out: float
    fb_q: float = 0.0
    fb_p: float = 0.0

    @property
    def feedback_applied(self):
        return (self.fb_q, self.fb_p)


@dataclass
class EcRecord:
    delta: float
    rounds: list = field(default_factory=list)
    feedback_mode: str = "none"
    seed: object = None

    @property
    def M(self):
        return len(self.rounds)

    @property
    def p_out(self):
        return np.array([r.p_out for r in self.rounds])

    @property
    def q_out(self):
        return np.array([r.q_out for r in self.rounds])

    @property
    def fb_q(self):
        return np.array([r.fb_q for r in self.rounds])

    @property
    def fb_p(self):
        return np.array([r.fb_p for r in self.rounds])

    def prefix(self, m):
        return EcRecord(self.delta, list(self.rounds[:m]), self.feedback_mode, self.seed)


@dataclass
class Trajectory:
    """A sampled run: record, per-round diagnostics, final state and final homodyne bit.

    ``probs[m]`` holds (P0, P1) of the state after m rounds (m = 0..M), so
    estimators for every prefix length come from a single run. ``diag`` rows
    are (dq_after_z, dp_after_z, dq, dp, nbar) after each round.
    """

    record: EcRecord
    diag: np.ndarray
    probs: np.ndarray
    final_state: gs.WaveFunction
    final_bit: int
    log_norms: np.ndarray
    max_truncation: float


class EcEngine:
    """Cached ancilla data for one (grid, Delta, ancilla kind)."""

    def __init__(self, grid, delta, ancilla="FV"):
        self.grid = grid
        self.delta = float(delta)
        self.ancilla = ancilla
        n = grid.points
        h = grid.spacing
        self.n = n
        offsets = np.arange(-n // 2, n // 2) * h
        # ancilla |0>: convolution kernel stored circularly by offset in a 2N buffer
        a = np.exp(ancilla_log_amplitude(offsets, delta, "zero", ancilla))
        a /= math.sqrt(h * np.sum(a * a))
        self.kernel0 = np.zeros(2 * n, dtype=complex)
        idx = np.arange(-n // 2, n // 2) % (2 * n)
        self.kernel0[idx] = a
        self.offsets2 = np.zeros(2 * n)
        self.offsets2[idx] = offsets
        self.auto0 = np.fft.ifft(np.abs(np.fft.fft(self.kernel0)) ** 2)
        # ancilla |+>: density kernel for the q_out distribution and its normalization
        bl = 2 * ancilla_log_amplitude(offsets, delta, "plus", ancilla)
        self.log_norm_plus = math.log(h * np.sum(np.exp(bl)))
        bdens = np.zeros(2 * n)
        bdens[idx] = np.exp(bl - self.log_norm_plus)
        self.fft_plus = np.conj(np.fft.fft(bdens))
        self.p_nodes = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(2 * n, d=h))
        self.q_nodes = -2 * grid.half_width + h * np.arange(2 * n)
        self.bits = gs.logical_bit(grid.q)

    # Born densities -------------------------------------------------------
    def p_density(self, amp):
        """(nodes, density) of the Z-EC outcome p for data amplitude ``amp``."""
        h = self.grid.spacing
        spec = np.fft.fft(amp, 2 * self.n)
        auto = np.fft.ifft(np.abs(spec) ** 2)
        dens = np.fft.fft(self.auto0 * np.conj(auto)).real * h**3 / (2 * np.pi)
        return self.p_nodes, np.clip(np.fft.fftshift(dens), 0.0, None), spec

    def q_density(self, amp):
        """(nodes, density) of the X-EC outcome q for data amplitude ``amp``."""
        h = self.grid.spacing
        dens = np.abs(amp) ** 2
        corr = np.fft.ifft(np.fft.fft(dens, 2 * self.n) * self.fft_plus).real * h
        return self.q_nodes, np.clip(np.roll(corr, self.n // 2), 0.0, None)

    # Conditional maps -----------------------------------------------------
    def z_map(self, amp, p_out, spec=None):
        """Unnormalized Z-EC output and the fraction of its mass lying off the grid."""
        h = self.grid.spacing
        if spec is None:
            spec = np.fft.fft(amp, 2 * self.n)
        ker = self.kernel0 * np.exp(-1j * p_out * self.offsets2)
        full = np.fft.ifft(np.fft.fft(ker) * spec) * h
        out = full[: self.n]
        inside = np.sum(np.abs(out) ** 2)
        total = inside + np.sum(np.abs(full[self.n :]) ** 2)
        return out, (1.0 - inside / total) if total > 0 else 1.0

    def plus_amplitude(self, x):
        return np.exp(ancilla_log_amplitude(x, self.delta, "plus", self.ancilla) - 0.5 * self.log_norm_plus)

    def x_map(self, amp, q_out):
        return amp * self.plus_amplitude(self.grid.q - q_out)

    def probs(self, amp):
        w = np.abs(amp) ** 2
        p1 = float(np.sum(w[self.bits == 1]))
        tot = float(np.sum(w))
        return (tot - p1) / tot, p1 / tot


@lru_cache(maxsize=16)
def engine(grid, delta, ancilla="FV"):
    return EcEngine(grid, float(delta), ancilla)


def ec_grid(delta, feedback="none"):
    """Grid for M <= 10 rounds: without feedback the envelope keeps broadening, so it gets a wider margin."""
    return gs.GridSpec.for_delta(delta, drift=24.0 if feedback == "none" else 12.0)


def sample_density(nodes, dens, rng):
    """Inverse-CDF sample from a density tabulated on equispaced nodes (linear CDF interpolation)."""
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]))])
    if not np.isfinite(cdf[-1]) or cdf[-1] <= 0:
        raise NumericalError("degenerate Born density")
    u = rng.random() * cdf[-1]
    return float(np.interp(u, cdf, nodes))


def _normalize(amp, h):
    nrm = h * np.sum(np.abs(amp) ** 2)
    if not np.isfinite(nrm) or nrm <= 0:
        raise NumericalError("state norm vanished after conditioning")
    return amp / math.sqrt(nrm), 0.5 * math.log(nrm)


def _apply_z(eng, amp, rng, outcome):
    spec = None
    if outcome is None:
        nodes, dens, spec = eng.p_density(amp)
        outcome = sample_density(nodes, dens, rng)
    out, lost = eng.z_map(amp, outcome, spec)
    if lost > TRUNCATION_TOL:
        raise GridError(f"Z-EC output leaks {lost:.1e} of its mass beyond the grid")
    out, lognorm = _normalize(out, eng.grid.spacing)
    return out, outcome, lognorm, lost


def _apply_x(eng, amp, rng, outcome):
    if outcome is None:
        nodes, dens = eng.q_density(amp)
        outcome = sample_density(nodes, dens, rng)
    out, lognorm = _normalize(eng.x_map(amp, outcome), eng.grid.spacing)
    return out, outcome, lognorm


def z_correct(psi, delta, rng=None, p_out=None, ancilla="FV"):
    """One Z-EC half round: sample p from its Born density and return (psi', p).

    Pass ``p_out`` to condition on a given outcome instead of sampling.
    """
    eng = engine(psi.grid, delta, ancilla)
    amp, p, _, _ = _apply_z(eng, psi.amp, rng, p_out)
    return gs.WaveFunction(psi.grid, amp, True), p


def x_correct(psi, delta, rng=None, q_out=None, ancilla="FV"):
    """One X-EC half round: sample q from its Born density and return (psi'', q)."""
    eng = engine(psi.grid, delta, ancilla)
    amp, q, _ = _apply_x(eng, psi.amp, rng, q_out)
    return gs.WaveFunction(psi.grid, amp, True), q


def p_born_density(psi, delta, ancilla="FV"):
    nodes, dens, _ = engine(psi.grid, delta, ancilla).p_density(psi.amp)
    return nodes, dens


def q_born_density(psi, delta, ancilla="FV"):
    return engine(psi.grid, delta, ancilla).q_density(psi.amp)


def decompose_outcome(x):
    """Split x = l sqrt(pi) + n 2 sqrt(pi) + e with l in {0,1}, integer n, |e| <= sqrt(pi)/2."""
    j = int(np.floor(x / SQRT_PI + 0.5))
    e = x - j * SQRT_PI
    return j % 2, (j - j % 2) // 2, e


def feedback_shift(mode, p_out, q_out):
    """(shift_q, shift_p) applied after a round for the given feedback mode."""
    if mode == "none":
        return 0.0, 0.0
    if mode == "recenter":
        return -q_out, p_out
    if mode == "memoryless":
        lq, nq, eq = decompose_outcome(q_out)
        lp, np_, ep = decompose_outcome(p_out)
        return -(2 * SQRT_PI * nq + eq), 2 * SQRT_PI * np_ + ep
    raise ValueError(f"unknown feedback mode {mode!r}")


def _diag(psi):
    dq, dp = gs.effective_squeezing(psi)
    return dq, dp, gs.mean_photon_number(psi)


def run_trajectory(psi_in, delta, M, feedback="none", rng=None, diagnostics=True, record=None):
    """Run M rounds of Steane EC on ``psi_in``.

    With ``record`` given, outcomes and feedback are replayed from it instead of
    sampled (no randomness is used except for the final homodyne bit, which is
    then skipped and reported as -1).
    """
    if feedback not in FEEDBACK_MODES:
        raise ValueError(f"feedback must be one of {FEEDBACK_MODES}")
    eng = engine(psi_in.grid, delta)
    h = psi_in.grid.spacing
    amp = np.array(psi_in.amp, dtype=complex)
    rounds = []
    diag = np.full((M, 5), np.nan)
    probs = np.empty((M + 1, 2))
    probs[0] = eng.probs(amp)
    log_norms = np.zeros(M)
    worst = 0.0
    for m in range(M):
        given = record.rounds[m] if record is not None else None
        amp, p, ln_z, lost = _apply_z(eng, amp, rng, None if given is None else given.p_out)
        worst = max(worst, lost)
        if diagnostics:
            dz = gs.effective_squeezing(gs.WaveFunction(psi_in.grid, amp))
        amp, q, ln_x = _apply_x(eng, amp, rng, None if given is None else given.q_out)
        if given is not None:
            fb = (given.fb_q, given.fb_p)
        else:
            fb = feedback_shift(feedback, p, q)
        if fb != (0.0, 0.0):
            amp = gs.apply_displacement(gs.WaveFunction(psi_in.grid, amp), *fb).amp
        rounds.append(EcRound(p, q, float(fb[0]), float(fb[1])))
        log_norms[m] = ln_z + ln_x
        probs[m + 1] = eng.probs(amp)
        if diagnostics:
            diag[m] = (*dz, *_diag(gs.WaveFunction(psi_in.grid, amp)))
    final = gs.WaveFunction(psi_in.grid, amp / math.sqrt(h * np.sum(np.abs(amp) ** 2)))
    if record is None:
        bit = int(rng.random() < probs[M, 1])
    else:
        bit = -1
    rec = EcRecord(float(delta), rounds, feedback, None if record is None else record.seed)
    return Trajectory(rec, diag, probs, final, bit, log_norms, worst)


def trajectory_rng(master_seed, index, stream=None):
    """RNG of trajectory ``index``: default_rng(SeedSequence([master_seed, index])).

    A nonnegative integer ``stream`` is appended to the entropy, giving
    independent families of streams under one master seed.
    """
    entropy = [int(master_seed), int(index)] + ([] if stream is None else [int(stream)])
    return np.random.default_rng(np.random.SeedSequence(entropy))


def write_trajectory_csv(trajectories, path, start_id=0):
    """Trajectory log: one row per round, then a final row per trajectory carrying final_bit."""
    with open(path, "w") as fh:
        fh.write("traj_id,round,p_out,q_out,fb_q,fb_p,dq_eff,dp_eff,nbar,final_bit\n")
        for t_id, tr in enumerate(trajectories, start=start_id):
            for m, rnd in enumerate(tr.record.rounds):
                dq, dp, nb = tr.diag[m, 2:]
                fh.write(
                    f"{t_id},{m + 1},{rnd.p_out:.12g},{rnd.q_out:.12g},{rnd.fb_q:.12g},"
                    f"{rnd.fb_p:.12g},{dq:.10g},{dp:.10g},{nb:.10g},\n"
                )
            fh.write(f"{t_id},final,,,,,,,,{tr.final_bit}\n")
