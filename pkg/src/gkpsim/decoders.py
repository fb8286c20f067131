"""Decoders for repeated GKP Steane error correction and their error estimators.

The action of a position path q_0..q_M under the record (p_m, q_m) is

    S = sum_m T(q_m - q_{m-1}) + U(qo_m - q_m) + i p_m (q_m - q_{m-1})
    T(x) = Delta^2 x^2 / 2 - cos(sqrt(pi) x) / (pi Delta^2)
    U(x) = Delta^2 x^2 / 2 - cos(2 sqrt(pi) x) / (4 pi Delta^2)

which is -ln of the product of the per-round Green factors built from the
reverse-Villain ancillas. With feedback the path lives in the frame after each
applied shift fb_q, so the pre-shift position of round m is q_m - fb_q_m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import gridstate as gs
from .steane_ec import decompose_outcome, run_trajectory

SQRT_PI = gs.SQRT_PI
DECODERS = ("mld", "forward", "passive", "memoryless", "parity")
K_WINDOW = 4


@dataclass(frozen=True)
class DecoderVerdict:
    decoder: str
    flip: int
    confidence: float | None = None


@dataclass(frozen=True)
class ActionPath:
    positions: np.ndarray
    re: float
    im: float


def kinetic(x, delta):
    return 0.5 * delta**2 * x * x - np.cos(SQRT_PI * x) / (math.pi * delta**2)


def potential(x, delta):
    return 0.5 * delta**2 * x * x - np.cos(2 * SQRT_PI * x) / (4 * math.pi * delta**2)


def _pre_shift(path, record, feedback_adapted):
    q = np.asarray(path, dtype=float)
    if len(q) != record.M + 1:
        raise ValueError("path length must be M + 1")
    pre = q[1:] - record.fb_q if feedback_adapted else q[1:]
    return q, pre


def action_re(path, record, delta, feedback_adapted=False):
    """Re S of a path; with ``feedback_adapted`` positions are taken in the post-feedback frame."""
    q, pre = _pre_shift(path, record, feedback_adapted)
    return float(np.sum(kinetic(pre - q[:-1], delta)) + np.sum(potential(record.q_out - pre, delta)))


def action_im(path, record, feedback_adapted=False):
    """Im S = sum_m p_m (q_m - q_{m-1}) using pre-feedback positions."""
    q, pre = _pre_shift(path, record, feedback_adapted)
    return float(np.sum(record.p_out * (pre - q[:-1])))


def action_kinetic(path, delta):
    q = np.asarray(path, dtype=float)
    return float(np.sum(kinetic(np.diff(q), delta)))


def _round_increment(x, prev, qo, delta):
    return kinetic(x - prev, delta) + potential(qo - x, delta)


def forward_path(record, delta, q0=0.0, feedback_adapted=False):
    """Greedy minimizer of Re S, one round at a time.

    Round m picks the pre-shift position x minimizing T(x - q_{m-1}) + U(qo_m - x)
    among the candidates qo_m + k sqrt(pi). k covers K_WINDOW steps around
    both qo_m and q_{m-1}. The best two candidates are then refined with a
    bounded scalar minimization on a window of width sqrt(pi)/2.

    The candidates follow the potential wells, so when the hopping term
    dominates (small Delta) the chosen point can be a local rather than the
    global minimum of the increment.
    """
    q = [float(q0)]
    for rnd in record.rounds:
        prev, qo = q[-1], rnd.q_out
        k0 = int(round((prev - qo) / SQRT_PI))
        ks = np.union1d(np.arange(-K_WINDOW, K_WINDOW + 1), np.arange(k0 - K_WINDOW, k0 + K_WINDOW + 1))
        cands = qo + ks * SQRT_PI
        vals = _round_increment(cands, prev, qo, delta)
        best_x, best_v = None, np.inf
        for c in cands[np.argsort(vals)[:2]]:
            res = minimize_scalar(
                _round_increment,
                bounds=(c - SQRT_PI / 4, c + SQRT_PI / 4),
                args=(prev, qo, delta),
                method="bounded",
                options={"xatol": 1e-10},
            )
            if res.fun < best_v:
                best_x, best_v = float(res.x), float(res.fun)
        q.append(best_x + (rnd.fb_q if feedback_adapted else 0.0))
    q = np.array(q)
    return ActionPath(q, action_re(q, record, delta, feedback_adapted), action_im(q, record, feedback_adapted))


def forward_decode(record, delta, q0=0.0, feedback_adapted=False):
    path = forward_path(record, delta, q0, feedback_adapted)
    return DecoderVerdict("forward", int(gs.logical_bit(path.positions[-1])))


def forward_flips(record, delta, q0=0.0, feedback_adapted=False):
    """Forward verdicts for every prefix length m = 0..M (the greedy path is causal)."""
    path = forward_path(record, delta, q0, feedback_adapted)
    return gs.logical_bit(path.positions)


def mld_probs(input_hypothesis, record, delta):
    """Replay the conditional evolution of the hypothesis input under the record; return (P0, P1)."""
    tr = run_trajectory(input_hypothesis, delta, record.M, record.feedback_mode, record=record, diagnostics=False)
    return tuple(tr.probs[-1])


def mld_decode(input_hypothesis, record, delta):
    p0, p1 = mld_probs(input_hypothesis, record, delta)
    return DecoderVerdict("mld", int(p1 > p0), max(p0, p1)), (p0, p1)


def passive_decode(record=None):
    return DecoderVerdict("passive", 0)


def memoryless_decode(record, frame="none"):
    """Per-round corrective shifts of the memoryless strategy and its final verdict.

    Each outcome is split as l sqrt(pi) + n 2 sqrt(pi) + e, and the applied
    correction is delta = n 2 sqrt(pi) + e. That correction keeps the data in
    its coset, so the verdict is no flip (``frame="none"``). ``frame="xor"``
    instead XORs the per-round bits l into the verdict.

    Returns (verdict, shifts, l_bits) where shifts rows are (shift_q, shift_p).
    """
    shifts, lbits = [], []
    for rnd in record.rounds:
        lq, nq, eq = decompose_outcome(rnd.q_out)
        _, np_, ep = decompose_outcome(rnd.p_out)
        shifts.append((-(2 * SQRT_PI * nq + eq), 2 * SQRT_PI * np_ + ep))
        lbits.append(lq)
    if frame == "none":
        flip = 0
    elif frame == "xor":
        flip = int(np.bitwise_xor.reduce(np.array(lbits, dtype=int))) if lbits else 0
    else:
        raise ValueError("frame must be 'none' or 'xor'")
    return DecoderVerdict("memoryless", flip), np.array(shifts).reshape(-1, 2), np.array(lbits, dtype=int)


def parity_decode(record):
    """Flip iff the summed applied q-shifts lie closer to an odd multiple of sqrt(pi)."""
    total = float(np.sum(record.fb_q)) if record.M else 0.0
    return DecoderVerdict("parity", int(gs.logical_bit(total)))


def error_estimate(flip, p0, p1):
    """Logical error probability of a verdict given the true coset masses (P0, P1)."""
    return p1 if flip == 0 else p0


def mld_estimate(p0, p1):
    return min(p0, p1)


def sample_input_peak(psi, rng):
    """Draw q_in from |psi(q)|^2 on the grid (the sampled alternative to q_in = 0)."""
    w = psi.density()
    return float(rng.choice(psi.grid.q, p=w / w.sum()))


def trajectory_estimates(traj, delta, decoders=DECODERS, q0=0.0):
    """Per-prefix error estimates of one trajectory, {decoder: array of length M+1}.

    Entry m uses the coset masses after m rounds and the verdict built from
    the first m rounds, so a single M-round run yields every shorter M.
    """
    rec = traj.record
    p0, p1 = traj.probs[:, 0], traj.probs[:, 1]
    out = {}
    for name in decoders:
        if name == "mld":
            out[name] = np.minimum(p0, p1)
            continue
        if name == "forward":
            flips = forward_flips(rec, delta, q0, feedback_adapted=rec.feedback_mode != "none")
        elif name == "passive":
            flips = np.zeros(rec.M + 1, dtype=int)
        elif name == "memoryless":
            flips = np.array([memoryless_decode(rec.prefix(m))[0].flip for m in range(rec.M + 1)])
        elif name == "parity":
            flips = gs.logical_bit(np.concatenate([[0.0], np.cumsum(rec.fb_q)]))
        else:
            raise ValueError(f"unknown decoder {name!r}")
        out[name] = np.where(flips == 0, p1, p0)
    return out


@dataclass(frozen=True)
class Estimate:
    """Mean of per-trajectory error estimates.

    ``stderr`` is the binomial bound sqrt(p(1-p)/n); ``sample_stderr`` is the
    empirical std/sqrt(n); ``fluctuation`` is the per-trajectory std.
    """

    mean: float
    stderr: float
    sample_stderr: float
    fluctuation: float
    n: int


def summarize(samples):
    x = np.asarray(samples, dtype=float)
    n = len(x)
    p = float(x.mean())
    sd = float(x.std(ddof=1)) if n > 1 else 0.0
    return Estimate(p, math.sqrt(max(p * (1 - p), 0.0) / n), sd / math.sqrt(n), sd, n)
