import math

import numpy as np
import pytest
from scipy.special import erfc

from macgeo.aloha import (AlohaResult, SeriesParams, aloha_prob,
                          aloha_prob_exponential, curve, default_mc_extent,
                          laplace_transform_w, mc_aloha_prob, optimize_range,
                          prob_w_below, sample_w, save_curve_csv)
from macgeo.errors import PrecisionLossError, UnsupportedFadingError
from macgeo.propagation import ChannelModel

P144 = SeriesParams(1.0, 1.0, 4.0)


def levy_cdf(x, lam=1.0):
    """Exact Pr(W < x) at alpha = 4: the stable-1/2 (Levy) CDF."""
    return erfc(math.pi ** 1.5 * lam / (2.0 * math.sqrt(x)))


def test_series_matches_levy_closed_form():
    for x in (0.7, 1.0, 2.0, 5.0, 20.0, 200.0, 1e4, 1e8):
        assert prob_w_below(x, P144) == pytest.approx(levy_cdf(x), abs=1e-9)


def test_series_limits():
    assert prob_w_below(1e12, P144) == pytest.approx(1.0, abs=1e-5)
    dilute = SeriesParams(1e-8, 1.0, 4.0)
    assert prob_w_below(3.0, dilute) == pytest.approx(1.0, abs=1e-6)
    assert aloha_prob(1e-3, P144) == pytest.approx(1.0, abs=1e-5)


def test_series_monotone_in_x():
    xs = np.geomspace(0.8, 1e6, 40)
    ps = [prob_w_below(float(x), P144) for x in xs]
    assert all(b >= a - 1e-12 for a, b in zip(ps, ps[1:]))
    assert all(0.0 <= p <= 1.0 for p in ps)


def test_series_precision_loss_signal():
    with pytest.raises(PrecisionLossError):
        prob_w_below(0.2, P144)  # deep lower tail: condition >> 1e12


def test_aloha_prob_monotone_in_r_and_beta():
    for beta in (0.1, 1.0, 10.0, 100.0):
        params = SeriesParams(1.0, beta, 4.0)
        last = 1.1
        for r in np.linspace(0.05, 1.0, 12):
            try:
                p = aloha_prob(float(r), params)
            except PrecisionLossError:
                break
            assert p <= last + 1e-12
            last = p
    for r in (0.1, 0.3, 0.5):
        ps = []
        for beta in (0.1, 1.0, 10.0, 100.0):
            try:
                ps.append(aloha_prob(r, SeriesParams(1.0, beta, 4.0)))
            except PrecisionLossError:
                break
        assert all(b <= a + 1e-12 for a, b in zip(ps, ps[1:]))


def test_fading_series_crosses_once_above_at_large_r():
    diffs = []
    for r in np.linspace(0.1, 0.9, 33):
        pn = aloha_prob(float(r), P144)
        pf = aloha_prob(float(r), P144, "log_uniform", 1.0)
        diffs.append(pf - pn)
    signs = np.sign(diffs)
    changes = np.nonzero(np.diff(signs))[0]
    assert len(changes) == 1
    assert signs[0] < 0 and signs[-1] > 0  # fading above at large r


def test_exponential_fading_rejected_by_series():
    with pytest.raises(UnsupportedFadingError):
        aloha_prob(0.3, P144, "exponential")


def test_laplace_transform():
    assert laplace_transform_w(0.0, 1.0, 4.0) == 1.0
    assert laplace_transform_w(1.0, 1.0, 4.0) == pytest.approx(
        math.exp(-math.pi ** 1.5))
    # Monte Carlo check of E[exp(-theta W)].
    rng = np.random.default_rng(123)
    w = sample_w(1.0, 3.0, 200_000, rng)
    for theta in (0.5, 1.0, 3.0):
        emp = np.exp(-theta * w)
        se = emp.std() / math.sqrt(len(emp))
        assert abs(emp.mean() - laplace_transform_w(theta, 1.0, 3.0)) < 3 * se


def test_laplace_transform_with_fading():
    rng = np.random.default_rng(99)
    w = sample_w(1.0, 4.0, 200_000, rng, fading="log_uniform", spread=1.0)
    got = np.exp(-2.0 * w)
    se = got.std() / math.sqrt(len(got))
    want = laplace_transform_w(2.0, 1.0, 4.0, "log_uniform", 1.0)
    assert abs(got.mean() - want) < 3 * se


def test_mc_matches_series():
    p_mc, se = mc_aloha_prob(0.3, 1.0, ChannelModel(4.0, 1.0), 200_000, seed=42)
    p_s = aloha_prob(0.3, P144)
    assert abs(p_mc - p_s) < 3 * se
    # Same draw at the spec's example threshold x = 0.3^-4.
    p2 = prob_w_below(0.3 ** -4, P144)
    assert abs(p_mc - p2) < 3 * se


def test_mc_beta_zero_always_succeeds():
    p, se = mc_aloha_prob(0.5, 1.0, ChannelModel(4.0, 0.0), 1000, seed=1)
    assert p == 1.0 and se == 0.0


def test_mc_log_uniform_fading():
    model = ChannelModel(4.0, 1.0, fading="log_uniform", spread=1.0)
    p_mc, se = mc_aloha_prob(0.4, 1.0, model, 200_000, seed=5)
    p_s = aloha_prob(0.4, P144, "log_uniform", 1.0)
    assert abs(p_mc - p_s) < 3 * se


def test_mc_exponential_closed_form():
    model = ChannelModel(4.0, 1.0, fading="exponential")
    p_mc, se = mc_aloha_prob(0.3, 1.0, model, 200_000, seed=7)
    p_cf = aloha_prob_exponential(0.3, 1.0, 1.0, 4.0)
    assert abs(p_mc - p_cf) < 3 * se


def test_mc_validation():
    with pytest.raises(ValueError):
        mc_aloha_prob(0.3, 1.0, ChannelModel(4.0, 1.0), 10, seed=0)


def test_sample_w_deterministic():
    a = sample_w(1.0, 4.0, 1000, 42)
    b = sample_w(1.0, 4.0, 1000, 42)
    assert np.array_equal(a, b)
    assert default_mc_extent(0.1, 1.0) == pytest.approx(16.0)
    assert default_mc_extent(2.0, 1.0) == pytest.approx(32.0)


def test_optimizer_beta10():
    res = optimize_range(SeriesParams(1.0, 10.0, 4.0))
    assert isinstance(res, AlohaResult)
    # Independent dense-scan oracle on the Levy closed form.
    rs = np.linspace(1e-3, 1.0, 20000)
    f = rs * erfc(math.pi ** 1.5 * math.sqrt(10.0) * rs ** 2 / 2.0)
    k = int(np.argmax(f))
    assert res.r == pytest.approx(rs[k], abs=2e-4)
    assert res.rp == pytest.approx(f[k], rel=1e-6)
    assert res.inv_rp == pytest.approx(1.0 / f[k], rel=1e-6)
    assert res.method == "series"


def test_optimizer_homothety():
    r1_ref = None
    for lam in (0.25, 1.0, 4.0):
        res = optimize_range(SeriesParams(lam, 10.0, 4.0))
        r1 = math.sqrt(lam) * res.r
        if r1_ref is None:
            r1_ref = r1
        else:
            assert abs(r1 - r1_ref) / r1_ref < 1e-3


def test_optimizer_fading_penalty():
    base = optimize_range(SeriesParams(1.0, 10.0, 4.0))
    fad = optimize_range(SeriesParams(1.0, 10.0, 4.0), "log_uniform", 1.0)
    penalty = 1.0 - fad.r / base.r
    assert 0.01 < penalty < 0.05


def test_curve_rows_and_csv(tmp_path):
    rows = curve(P144, [0.1, 0.5, 3.0])
    assert rows[0][3] == "series"
    assert rows[-1][3] == "below_resolution" and rows[-1][1] == 0.0
    out = tmp_path / "c.csv"
    save_curve_csv(rows, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "r,p,rp,method"
    assert len(lines) == 4


def test_series_params_validation():
    with pytest.raises(ValueError):
        SeriesParams(0.0, 1.0, 4.0)
    with pytest.raises(ValueError):
        SeriesParams(1.0, -1.0, 4.0)
    with pytest.raises(ValueError):
        SeriesParams(1.0, 1.0, 2.0)
    assert SeriesParams(1.0, 1.0, 4.0).gamma == pytest.approx(0.5)
    assert P144.series_constant() == pytest.approx(math.pi ** 1.5)
    assert P144.series_constant("log_uniform", 1.0) == pytest.approx(
        math.pi ** 1.5 * math.sinh(0.5) / 0.5)
