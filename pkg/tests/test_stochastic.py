import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.special import ndtr

from gkpsim import cli
from gkpsim import gridstate as gs
from gkpsim import stochastic as sto

SQRT_PI = math.sqrt(math.pi)


def one_round_posterior_quad(s, sigma):
    """P(odd residual | syndrome s) for M=1 by adaptive quadrature over the incoming shift."""

    def dens(eps):
        j = np.arange(-4, 5)
        like = np.exp(-0.5 * ((s + j * SQRT_PI - eps) / sigma) ** 2).sum()
        return math.exp(-0.5 * (eps / sigma) ** 2) * like

    mass = [0.0, 0.0]
    # residual eps - s is odd on the cells centred at s + k sqrt(pi) with k odd
    for k in range(-4, 5):
        lo, hi = s + (k - 0.5) * SQRT_PI, s + (k + 0.5) * SQRT_PI
        mass[k % 2] += integrate.quad(dens, lo, hi, epsabs=1e-14, epsrel=1e-12)[0]
    return mass[1] / (mass[0] + mass[1])


def one_round_error_quad(sigma):
    """P(residual odd) for M=1: inner Gaussian integral in closed form, outer quadrature over eta."""

    def odd_given_eta(eta):
        # e = -eta + n sqrt(pi) with n = round((eps + eta)/sqrt(pi)); e is odd iff floor(n - eta/sqrt(pi) + 1/2) is odd
        tot = 0.0
        for n in range(-6, 7):
            if math.floor(n - eta / SQRT_PI + 0.5) % 2 == 1:
                lo, hi = (n - 0.5) * SQRT_PI - eta, (n + 0.5) * SQRT_PI - eta
                tot += ndtr(hi / sigma) - ndtr(lo / sigma)
        return tot * math.exp(-0.5 * (eta / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))

    breaks = [SQRT_PI * (k + 0.5) for k in range(-4, 4)]
    return integrate.quad(odd_given_eta, -12 * sigma, 12 * sigma, points=breaks, limit=200)[0]


# ---------------------------------------------------------------- model


def test_centered_remainder():
    x = np.array([0.0, 0.3, SQRT_PI - 0.1, 2 * SQRT_PI + 0.2, -3 * SQRT_PI - 0.05])
    np.testing.assert_allclose(sto.centered_remainder(x), [0.0, 0.3, -0.1, 0.2, -0.05], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(x=st.floats(-100, 100))
def test_centered_remainder_property(x):
    r = float(sto.centered_remainder(x))
    assert -SQRT_PI / 2 - 1e-12 <= r < SQRT_PI / 2 + 1e-12
    k = (x - r) / SQRT_PI
    assert k == pytest.approx(round(k), abs=1e-9)


def test_simulate_bookkeeping(rng):
    tr = sto.simulate_stochastic(0.3, 12, rng)
    assert tr.M == 12
    np.testing.assert_array_equal(tr.corrections, -tr.syndromes)
    np.testing.assert_allclose(tr.residual, tr.shifts.sum() - tr.syndromes.sum(), atol=1e-12)
    assert np.all(np.abs(tr.syndromes) <= SQRT_PI / 2)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), sigma=st.floats(0.05, 1.5), M=st.integers(1, 15))
def test_syndromes_bounded(seed, sigma, M):
    tr = sto.simulate_stochastic(sigma, M, np.random.default_rng(seed))
    assert np.all(np.abs(tr.syndromes) <= SQRT_PI / 2)


def test_small_sigma(rng):
    tr = sto.simulate_stochastic(1e-12, 10, rng)
    np.testing.assert_allclose(tr.syndromes, 0.0, atol=1e-10)
    assert not tr.logical_error()


def test_rejects_nonpositive_sigma(rng):
    with pytest.raises(ValueError):
        sto.simulate_stochastic(0.0, 3, rng)


def test_one_round_error_rate_vs_quadrature():
    sigma, n = 0.2, 100_000
    r = np.random.default_rng(77)
    errs = np.array([sto.simulate_stochastic(sigma, 1, r).logical_error() for _ in range(n)], dtype=float)
    ref = one_round_error_quad(sigma)
    se = math.sqrt(ref * (1 - ref) / n)
    assert abs(errs.mean() - ref) <= 2 * se


def test_logical_error_prefix(rng):
    tr = sto.simulate_stochastic(0.5, 6, rng)
    assert tr.logical_error(0) is False
    assert tr.logical_error(6) == tr.logical_error()
    assert tr.logical_error(3) == bool(gs.logical_bit(tr.residuals[2]))


# ---------------------------------------------------------------- decoder


def test_dp_grid():
    y = sto.dp_grid(0.3, 10)
    assert len(y) == sto.DP_BINS
    assert y[sto.DP_BINS // 2] == 0.0
    assert -y[0] == pytest.approx(max(6 * 0.3 * math.sqrt(10), 2 * SQRT_PI))


def test_dp_matches_quadrature_one_round():
    sigma = 0.2
    r = np.random.default_rng(123)
    agree = 0
    for _ in range(100):
        s = sto.simulate_stochastic(sigma, 1, r).syndromes
        p_dp = sto.coset_posterior(s, sigma)[-1]
        p_ref = one_round_posterior_quad(float(s[0]), sigma)
        assert p_dp == pytest.approx(p_ref, abs=1e-6)
        agree += int(p_dp > 0.5) == int(p_ref > 0.5)
    assert agree == 100


def test_dp_matches_quadrature_near_boundary():
    # syndromes near the cell edge are where the two cosets compete; at this sigma the
    # density at the coset edges is large, so node binning of the DP grid shows up at ~1e-4
    sigma = 0.5
    for s in np.linspace(-SQRT_PI / 2 + 1e-3, SQRT_PI / 2 - 1e-3, 9):
        assert sto.coset_posterior([s], sigma)[-1] == pytest.approx(one_round_posterior_quad(s, sigma), abs=1e-3)


def test_all_zero_syndromes_no_flip():
    for M in (1, 5, 10):
        flip, ratio = sto.ml_coset_decode(np.zeros(M), 0.4)
        assert flip == 0
        assert ratio < 1


def test_coset_posterior_shape():
    p = sto.coset_posterior([0.1, -0.3, 0.5], 0.3)
    assert p.shape == (4,)
    assert p[0] == 0.0
    assert np.all((p >= 0) & (p <= 1))


def test_simple_decoders():
    assert sto.naive_flip([0.8, 0.8]) == 0
    assert sto.parity_flip([0.5 * SQRT_PI, 0.5 * SQRT_PI]) == 1
    assert sto.parity_flip([SQRT_PI, SQRT_PI]) == 0
    assert sto.parity_flip([]) == 0


@pytest.fixture(scope="module")
def paired_records():
    sigma, M, n = 0.2, 5, 10_000
    r = np.random.default_rng(2024)
    out = []
    for _ in range(n):
        tr = sto.simulate_stochastic(sigma, M, r)
        out.append((int(tr.logical_error()), sto.ml_coset_decode(tr.syndromes, sigma)[0], sto.parity_flip(tr.syndromes)))
    return np.array(out)


def test_ml_not_worse_than_naive(paired_records):
    truth, ml, _ = paired_records.T
    d = (ml != truth).astype(float) - (truth != 0).astype(float)
    assert d.mean() <= 2 * d.std(ddof=1) / math.sqrt(len(d))


def test_ml_not_worse_than_parity(paired_records):
    truth, ml, par = paired_records.T
    d = (ml != truth).astype(float) - (par != truth).astype(float)
    assert d.mean() <= 2 * d.std(ddof=1) / math.sqrt(len(d))


def test_residual_marginal_matches_histogram():
    # averaging posteriors over records reproduces the marginal of the true residual
    sigma, M, n = 0.35, 3, 3000
    r = np.random.default_rng(5)
    edges = np.linspace(-2.5, 2.5, 26)
    expected = np.zeros(len(edges) - 1)
    truth = np.empty(n)
    for i in range(n):
        tr = sto.simulate_stochastic(sigma, M, r)
        e, w = sto.residual_posterior(tr.syndromes, sigma)
        expected += np.histogram(e, edges, weights=w)[0]
        truth[i] = tr.residual
    observed = np.histogram(truth, edges)[0]
    keep = expected > 5
    exp_k = expected[keep] * observed[keep].sum() / expected[keep].sum()
    chi2 = np.sum((observed[keep] - exp_k) ** 2 / exp_k)
    assert stats.chi2.sf(chi2, keep.sum() - 1) > 1e-3


def test_estimates_shape(rng):
    est = sto.stochastic_estimates(0.3, 4, 20, rng)
    assert est.shape == (20, 5)
    assert np.all(est[:, 0] == 0)
    assert np.all(est <= 0.5)


def test_compare_table(rng):
    coh = np.full((10, 4), 0.1)
    rows = sto.compare_coherent_stochastic(0.3, range(1, 4), 10, rng, coh)
    assert rows.shape == (3, 7)
    np.testing.assert_array_equal(rows[:, 0], [1, 2, 3])
    np.testing.assert_allclose(rows[:, 1], 0.1)
    rows = sto.compare_coherent_stochastic(0.3, [2], 5, rng)
    assert np.isnan(rows[0, 1])


def test_small_delta_rates():
    # at Delta = 0.15 and one round all three rates are small
    delta, n = 0.15, 400
    r = np.random.default_rng(8)
    low = sto.stochastic_estimates(delta / math.sqrt(2), 1, n, r)[:, 1].mean()
    high = sto.stochastic_estimates(delta, 1, n, r)[:, 1].mean()
    coh, _, _ = cli.run_coherent(delta, "none", ["mld"], 1, 50, 3)
    assert max(low, high, coh[:, 0, 1].mean()) < 1e-2
