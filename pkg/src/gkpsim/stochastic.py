"""Gaussian-shift model of repeated single-mode GKP error correction.

Each round the data picks up an incoming shift eps ~ N(0, s0^2), the syndrome
is read with measurement noise eta ~ N(0, s0^2), and the Steane-style
correction -s is applied. Only the q quadrature is simulated.

Decoding works with the uncorrected walk y_m = eps_1 + ... + eps_m. With
S_m the running sum of syndromes, the residual is e_m = y_m - S_m. The
syndrome likelihood is sum_j N(S_m + j sqrt(pi) - y_m; s0^2), so the
posterior of y is a Gaussian random walk reweighted round by round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .gridstate import SQRT_PI, logical_bit

DP_BINS = 2048
KERNEL_SIGMAS = 8.0


def centered_remainder(x):
    """x - sqrt(pi) * round(x / sqrt(pi)), in [-sqrt(pi)/2, sqrt(pi)/2)."""
    x = np.asarray(x, dtype=float)
    return x - SQRT_PI * np.floor(x / SQRT_PI + 0.5)


@dataclass
class ShiftTrajectory:
    sigma: float
    shifts: np.ndarray
    noises: np.ndarray
    syndromes: np.ndarray
    corrections: np.ndarray
    residuals: np.ndarray

    @property
    def M(self):
        return len(self.syndromes)

    @property
    def residual(self):
        return float(self.residuals[-1]) if self.M else 0.0

    def logical_error(self, m=None):
        """True iff the residual after m rounds (default all) is in the odd coset."""
        e = self.residual if m is None else (self.residuals[m - 1] if m else 0.0)
        return bool(logical_bit(e))


def simulate_stochastic(sigma, M, rng):
    """Sample one M-round record of the Gaussian-shift model."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    eps = rng.normal(0.0, sigma, M)
    eta = rng.normal(0.0, sigma, M)
    synd = np.empty(M)
    res = np.empty(M)
    e = 0.0
    for m in range(M):
        e += eps[m]
        synd[m] = centered_remainder(e + eta[m])
        e -= synd[m]
        res[m] = e
    return ShiftTrajectory(float(sigma), eps, eta, synd, -synd, res)


def _gauss(x, sigma):
    return np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def _syndrome_likelihood(y, target, sigma):
    """sum_j N(target + j sqrt(pi) - y; sigma^2) on the grid y."""
    d = centered_remainder(target - y)
    jmax = int(math.ceil(KERNEL_SIGMAS * sigma / SQRT_PI)) + 1
    js = np.arange(-jmax, jmax + 1)
    return _gauss(d[None, :] + SQRT_PI * js[:, None], sigma).sum(axis=0)


def dp_grid(sigma, M, bins=DP_BINS):
    """Equispaced residual grid of ``bins`` nodes with a node at 0, spanning +-max(6 s0 sqrt(M), 2 sqrt(pi))."""
    half = max(6.0 * sigma * math.sqrt(max(M, 1)), 2 * SQRT_PI)
    return (np.arange(bins) - bins // 2) * (2 * half / bins)


def _dp_steps(syndromes, sigma, bins, grid_rounds):
    """Yield (y grid, S_m, normalized posterior of y_m) after each round."""
    synd = np.asarray(syndromes, dtype=float)
    y = dp_grid(sigma, len(synd) if grid_rounds is None else grid_rounds, bins)
    h = y[1] - y[0]
    nk = int(math.ceil(KERNEL_SIGMAS * sigma / h))
    kernel = _gauss(h * np.arange(-nk, nk + 1), sigma) * h
    w = np.zeros(bins)
    w[bins // 2] = 1.0
    S = 0.0
    for s in synd:
        w = np.clip(fftconvolve(w, kernel, mode="same"), 0.0, None)
        S += s
        w = w * _syndrome_likelihood(y, S, sigma)
        tot = w.sum()
        if not tot > 0:
            raise FloatingPointError("DP posterior underflowed; widen the grid")
        w /= tot
        yield y, S, w


def coset_posterior(syndromes, sigma, bins=DP_BINS, grid_rounds=None):
    """Posterior odd-coset probability of the residual after each prefix of the record.

    Returns an array of length M+1 (entry 0 is the prior, 0). ``grid_rounds``
    sets the grid range (defaults to M).
    """
    out = [0.0]
    for y, S, w in _dp_steps(syndromes, sigma, bins, grid_rounds):
        out.append(float(w[logical_bit(y - S) == 1].sum()))
    return np.array(out)


def residual_posterior(syndromes, sigma, bins=DP_BINS):
    """(residual grid, posterior weights) of e_M = y_M - S_M for a nonempty record."""
    for y, S, w in _dp_steps(syndromes, sigma, bins, None):
        pass
    return y - S, w


def ml_coset_decode(syndromes, sigma):
    """Flip iff the odd-coset posterior exceeds 1/2. Returns (flip, P_odd / P_even)."""
    p_odd = coset_posterior(syndromes, sigma)[-1]
    ratio = p_odd / (1.0 - p_odd) if p_odd < 1 else math.inf
    return int(p_odd > 0.5), ratio


def naive_flip(syndromes):
    return 0


def parity_flip(syndromes):
    """Flip iff the summed corrections lie closer to an odd multiple of sqrt(pi)."""
    return int(logical_bit(-float(np.sum(syndromes))))


def stochastic_estimates(sigma, M, n_traj, rng):
    """Per-prefix ML error estimates min(P_odd, 1 - P_odd), shape (n_traj, M+1)."""
    est = np.empty((n_traj, M + 1))
    for i in range(n_traj):
        tr = simulate_stochastic(sigma, M, rng)
        p = coset_posterior(tr.syndromes, sigma)
        est[i] = np.minimum(p, 1.0 - p)
    return est


def compare_coherent_stochastic(delta, M_range, n_traj, rng, coherent=None):
    """Per-M table of the coherent MLD rate next to the stochastic ML rates at s0 = Delta/sqrt2 and s0 = Delta.

    ``coherent`` is an (n, M_max+1) array of per-trajectory MLD estimates from
    the coherent simulation (None leaves those columns NaN). Rows are
    (M, coh, coh_se, low, low_se, high, high_se), where "low" is s0 = Delta/sqrt2
    and "high" is s0 = Delta.
    """
    M_range = list(M_range)
    mmax = max(M_range)
    cols = []
    for s in (delta / math.sqrt(2), delta):
        est = stochastic_estimates(s, mmax, n_traj, rng)
        cols.append((est.mean(0), est.std(0, ddof=1) / math.sqrt(n_traj)))
    if coherent is not None:
        coherent = np.asarray(coherent)
        coh = (coherent.mean(0), coherent.std(0, ddof=1) / math.sqrt(len(coherent)))
    else:
        coh = (np.full(mmax + 1, np.nan), np.full(mmax + 1, np.nan))
    return np.array([[m, coh[0][m], coh[1][m], cols[0][0][m], cols[0][1][m], cols[1][0][m], cols[1][1][m]] for m in M_range])
