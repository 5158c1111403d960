"""Slotted-ALOHA success probability, Monte Carlo oracle and optimizer.

With simultaneous transmitters forming a uniform Poisson field of
intensity lam, the aggregate interference W at any point is a one-sided
stable random variable with Laplace transform

    E[exp(-theta W)] = exp(-C lam theta^gamma),    gamma = 2/alpha,

where C = pi Gamma(1 - gamma) without fading and C = pi psi(gamma)
Gamma(1 - gamma) with i.i.d. fading of fractional moment psi(s) = E[F^s].
Inverting the transform gives the success probability of a link of length
r at SIR threshold beta as the alternating series

    Pr(W < x) = sum_{n>=0} (-C lam)^n / n! * sin(pi n gamma)/pi
                * Gamma(n gamma) * psi(-n gamma) * x^(-n gamma),

with x = r^(-alpha)/beta and the n = 0 term equal to 1.  The terms grow
before they decay, so they are accumulated in log-magnitude/sign form
with compensated summation, and the evaluation refuses to return a result
once cancellation has destroyed it (see ``PrecisionLossError``).

Exponential (unit-mean) fading admits no such series (psi(-n gamma) has
poles) but has the exact closed form

    p = exp(-lam pi Gamma(1-gamma) Gamma(1+gamma) beta^gamma r^2),

used here as an independent cross-check of the Monte Carlo path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PrecisionLossError, UnsupportedFadingError
from .propagation import ChannelModel, psi, sample_fading

# Cancellation guard: refuse the series once the largest intermediate term
# exceeds this factor times the final sum.
_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class SeriesParams:
    """Series evaluation parameters for one (lam, beta, alpha)."""

    lam: float
    beta: float
    alpha: float
    max_terms: int = 400
    rel_tol: float = 1e-10

    def __post_init__(self):
        if not (self.lam > 0):
            raise ValueError("intensity must be positive")
        if not (self.beta > 0):
            raise ValueError("SIR threshold must be positive")
        if not (self.alpha > 2):
            raise ValueError("attenuation coefficient must exceed 2")
        if self.max_terms < 8:
            raise ValueError("max_terms too small")
        if not (0 < self.rel_tol < 1e-2):
            raise ValueError("rel_tol out of range")

    @property
    def gamma(self) -> float:
        return 2.0 / self.alpha

    def series_constant(self, fading: str = "none", spread: float = 1.0) -> float:
        """C = pi psi(gamma) Gamma(1 - gamma)."""
        g = self.gamma
        return math.pi * psi(fading, g, spread) * math.gamma(1.0 - g)


def _series(x: float, lam: float, gamma: float, C: float,
            max_terms: int, rel_tol: float,
            fading: str = "none", spread: float = 1.0) -> float:
    """Evaluate the alternating stable-CDF series at x.

    Terms are formed from logs (lgamma) so their size is known before
    exponentiation; the running sum uses Kahan compensation.  Raises
    :class:`PrecisionLossError` when the condition number passes the guard
    or the terms fail to converge within the budget.
    """
    if not (x > 0):
        raise ValueError("signal level x must be positive")
    log_cl = math.log(C * lam)
    log_x = math.log(x)

    total = 1.0  # n = 0 term by convention
    comp = 0.0
    max_abs = 1.0
    small_streak = 0
    converged = False

    for n in range(1, max_terms + 1):
        ng = n * gamma
        # sin(pi n gamma) vanishes exactly whenever n*gamma is an integer;
        # floating-point sin() only gets within ~1e-16 of zero there, which
        # would otherwise masquerade as series convergence.
        if abs(ng - round(ng)) < 1e-9:
            continue
        s = math.sin(math.pi * ng)
        log_mag = (n * log_cl - math.lgamma(n + 1.0)
                   + math.log(abs(s)) - math.log(math.pi)
                   + math.lgamma(ng) - ng * log_x)
        if fading == "log_uniform":
            log_mag += math.log(psi(fading, -ng, spread))
        if log_mag > 700.0:
            raise PrecisionLossError(
                "series term overflow; result lost to cancellation")
        mag = math.exp(log_mag)
        term = mag if ((n % 2 == 0) == (s > 0.0)) else -mag

        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t

        max_abs = max(max_abs, mag)
        # Converged once three successive terms sit below the tolerance
        # (one small term can be an accidental near-zero of the sine).
        if mag <= rel_tol * max(abs(total), 1e-300):
            small_streak += 1
            if small_streak >= 3:
                converged = True
                break
        else:
            small_streak = 0

    if not converged:
        raise PrecisionLossError(
            f"series did not converge within {max_terms} terms")
    if abs(total) * _CONDITION_LIMIT < max_abs:
        raise PrecisionLossError(
            f"condition number {max_abs / max(abs(total), 1e-300):.3g} "
            "exceeds the cancellation guard")
    return min(1.0, max(0.0, total))


def prob_w_below(x: float, params: SeriesParams) -> float:
    """Pr(W < x) for the no-fading Poisson interference field, clamped to
    [0, 1].  Raises :class:`PrecisionLossError` in the cancellation regime
    (callers then fall back to Monte Carlo)."""
    return _series(x, params.lam, params.gamma,
                   params.series_constant("none"),
                   params.max_terms, params.rel_tol)


def aloha_prob(r: float, params: SeriesParams, fading: str = "none",
               spread: float = 1.0) -> float:
    """Success probability of a link of length r under slotted ALOHA.

    ``fading="none"`` evaluates Pr(W < r^(-alpha)/beta); ``log_uniform``
    multiplies each term by psi(-n gamma) and uses the fading constant.
    Exponential fading has no convergent series (its negative moments
    diverge); use :func:`aloha_prob_exponential` or the Monte Carlo path.
    """
    if not (r > 0):
        raise ValueError("link length must be positive")
    if fading == "exponential":
        raise UnsupportedFadingError(
            "series diverges under exponential fading; use "
            "aloha_prob_exponential or mc_aloha_prob")
    x = r ** -params.alpha / params.beta
    return _series(x, params.lam, params.gamma,
                   params.series_constant(fading, spread),
                   params.max_terms, params.rel_tol, fading, spread)


def aloha_prob_exponential(r: float, lam: float, beta: float, alpha: float) -> float:
    """Exact success probability with exponential (unit-mean) fading on
    every link: exp(-lam pi Gamma(1-g) Gamma(1+g) beta^g r^2), g = 2/alpha."""
    g = 2.0 / alpha
    return math.exp(-lam * math.pi * math.gamma(1.0 - g) * math.gamma(1.0 + g)
                    * beta ** g * r * r)


def laplace_transform_w(theta: float, lam: float, alpha: float,
                        fading: str = "none", spread: float = 1.0) -> float:
    """E[exp(-theta W)] = exp(-pi lam psi(gamma) Gamma(1-gamma) theta^gamma)."""
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if theta == 0.0:
        return 1.0
    g = 2.0 / alpha
    return math.exp(-math.pi * lam * psi(fading, g, spread)
                    * math.gamma(1.0 - g) * theta ** g)


def _pow_neg_half(d2: np.ndarray, alpha: float) -> np.ndarray:
    """d2 ** (-alpha/2) with cheap paths for the common exponents."""
    if alpha == 4.0:
        r = 1.0 / d2
        return r * r
    if alpha == 6.0:
        r = 1.0 / d2
        return r * r * r
    if alpha == 3.0:
        return 1.0 / (d2 * np.sqrt(d2))
    return d2 ** (-0.5 * alpha)


def default_mc_extent(r: float, lam: float) -> float:
    """Radius of the simulated interferer disc around the receiver.

    Beyond this radius the field is folded in exactly through its analytic
    mean (see :func:`sample_w`), so a modest multiple of the typical
    nearest-interferer distance suffices.
    """
    return max(16.0 * r, 16.0 / math.sqrt(lam))


def sample_w(lam: float, alpha: float, trials: int, rng,
             extent: float | None = None, fading: str = "none",
             spread: float = 1.0, chunk: int = 8192) -> np.ndarray:
    """Draw ``trials`` samples of the aggregate interference W.

    Interferers form a Poisson disc of radius ``extent`` around the
    evaluation point, sampled radially (squared distances are uniform);
    the beyond-extent remainder is added as its exact analytic mean
    E[F] * 2 pi lam R^(2-alpha)/(alpha-2), whose fluctuation is negligible
    at the default radius.  Fading draws one factor per interferer.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    R = extent if extent is not None else default_mc_extent(1.0, lam)
    mean_count = lam * math.pi * R * R
    tail = psi(fading, 1.0, spread) * 2.0 * math.pi * lam \
        * R ** (2.0 - alpha) / (alpha - 2.0)

    out = np.empty(trials)
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        counts = rng.poisson(mean_count, m)
        total = int(counts.sum())
        d2 = rng.uniform(0.0, R * R, total)
        contrib = _pow_neg_half(d2, alpha)
        if fading != "none":
            contrib *= sample_fading(fading, rng, total, spread)
        offsets = np.concatenate(([0], np.cumsum(counts)))[:-1]
        if total:
            sums = np.add.reduceat(contrib, np.minimum(offsets, total - 1))
            sums[counts == 0] = 0.0
        else:
            sums = np.zeros(m)
        out[done:done + m] = sums
        done += m
    return out + tail


def mc_aloha_prob(r: float, lam: float, model: ChannelModel, trials: int,
                  extent: float | None = None, seed=0) -> tuple[float, float]:
    """Monte Carlo success probability of a link of length r.

    Each trial draws a fresh Poisson interferer field around the receiver
    (the probe transmitter is extra and never interferes) plus fading on
    every link per the model, and tests the SIR condition.  Returns the
    success fraction and its binomial standard error.
    """
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    if not (r > 0):
        raise ValueError("link length must be positive")
    rng = np.random.default_rng(seed)
    if model.beta == 0.0:
        return 1.0, 0.0
    if extent is None:
        extent = default_mc_extent(r, lam)
    w = sample_w(lam, model.alpha, trials, rng, extent,
                 model.fading, model.spread)
    x = r ** -model.alpha / model.beta
    if model.fading == "none":
        hits = np.count_nonzero(w < x)
    else:
        f_sig = sample_fading(model.fading, rng, trials, model.spread)
        hits = np.count_nonzero(w < x * f_sig)
    p = hits / trials
    return p, math.sqrt(p * (1.0 - p) / trials)


@dataclass(frozen=True)
class AlohaResult:
    """Optimizer output: the maximizer of r * p and derived report values."""

    r: float
    p: float
    rp: float
    inv_rp: float
    method: str = "series"


def optimize_range(params: SeriesParams, fading: str = "none",
                   spread: float = 1.0, r_tol: float = 1e-5) -> AlohaResult:
    """Maximize r * p(lam, r, beta, alpha) over the link length r.

    Golden-section search on [1e-4, r_hi] where r_hi is found by doubling
    until p < 1e-6 (points past the cancellation guard count as zero).
    A coarse scan first verifies the rise-then-fall shape; if violated the
    maximizer comes from a dense 10^4-point scan instead.  Normally called
    with lam = 1; other intensities work and obey sqrt(lam) * r = const.
    """

    def p_of(r):
        try:
            return aloha_prob(r, params, fading, spread)
        except PrecisionLossError:
            return 0.0

    def f(r):
        return r * p_of(r)

    r_hi = 0.1 / math.sqrt(params.lam)
    while p_of(r_hi) >= 1e-6:
        r_hi *= 2.0
        if r_hi > 1e6 / math.sqrt(params.lam):
            raise RuntimeError("no upper bracket for the range optimizer")
    r_lo = 1e-4

    grid = np.linspace(r_lo, r_hi, 64)
    vals = np.array([f(r) for r in grid])
    k = int(np.argmax(vals))
    noise = 1e-9 * vals.max()
    rising = np.all(np.diff(vals[: k + 1]) >= -noise)
    falling = np.all(np.diff(vals[k:]) <= noise)
    if not (rising and falling):
        grid = np.linspace(r_lo, r_hi, 10_000)
        vals = np.array([f(r) for r in grid])
        k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]

    phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > r_tol:
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
        else:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
    r_star = 0.5 * (a + b)
    p_star = p_of(r_star)
    rp = r_star * p_star
    return AlohaResult(r_star, p_star, rp, 1.0 / rp if rp > 0 else math.inf)


def curve(params: SeriesParams, r_values, fading: str = "none",
          spread: float = 1.0):
    """(r, p, r*p) rows for plot export; cancellation-regime points are
    reported as p = 0 with method 'below_resolution'."""
    rows = []
    for r in r_values:
        try:
            p = aloha_prob(float(r), params, fading, spread)
            method = "series"
        except PrecisionLossError:
            p, method = 0.0, "below_resolution"
        rows.append((float(r), p, float(r) * p, method))
    return rows


def save_curve_csv(rows, path) -> None:
    """Write optimizer/curve rows as CSV with header ``r,p,rp,method``."""
    with open(path, "w") as fh:
        fh.write("r,p,rp,method\n")
        for r, p, rp, method in rows:
            fh.write(f"{r:.12g},{p:.12g},{rp:.12g},{method}\n")
