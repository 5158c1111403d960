"""Shared test oracles.

High-precision evaluation of the interference-CDF series (mpmath) for the
cells where the float64 path correctly refuses due to cancellation, plus
the sharp Chernoff bound on the stable lower tail used to certify
"effectively zero" cells.

For integer attenuation exponents gamma = 2/alpha is rational p/q, so
terms q apart are related by a polynomial factor; the high-precision sum
walks q interleaved recurrence streams and needs mp.gamma only once per
stream.
"""

import math
from fractions import Fraction

import mpmath as mp


def psi_mp(fading, s, spread):
    if fading == "none":
        return mp.mpf(1)
    if fading == "log_uniform":
        a = spread * s
        if a == 0:
            return mp.mpf(1)
        return mp.sinh(a) / a
    raise ValueError(fading)


def _peak_log_term(x, lam, alpha, fading, spread, max_terms=300_000):
    """Float-side scan of ln|term_n|: (peak value, argmax n, last n)."""
    gamma = 2.0 / alpha
    psi_g = 1.0 if fading == "none" else math.sinh(spread * gamma) / (spread * gamma)
    log_cl = math.log(math.pi * psi_g * math.gamma(1.0 - gamma) * lam)
    log_x = math.log(x)
    peak, n_peak = 0.0, 0
    for n in range(1, max_terms + 1):
        ng = n * gamma
        if abs(ng - round(ng)) < 1e-9:
            continue
        lt = (n * log_cl - math.lgamma(n + 1.0) + math.lgamma(ng)
              - ng * log_x + math.log(abs(math.sin(math.pi * ng))) - math.log(math.pi))
        if fading == "log_uniform":
            a = spread * ng
            lt += (a - math.log(2.0 * a)) if a > 30.0 else math.log(math.sinh(a) / a)
        if lt > peak:
            peak, n_peak = lt, n
        if n > 2 * n_peak + 50 and lt < peak - 60.0:
            return peak, n_peak, n
    return peak, n_peak, max_terms


def mp_prob_w_below(x, lam, alpha, fading="none", spread=1.0,
                    dps=60, max_terms=200_000):
    """Arbitrary-precision sum of the success-probability series.

    Requires integer alpha (rational gamma).  Returns a float in [0, 1];
    raises ValueError when the precision cannot separate the result from
    the cancellation floor.
    """
    frac = Fraction(2, int(alpha))
    if float(frac) != 2.0 / alpha:
        raise ValueError("recurrence form needs an integer alpha")
    p_, q_ = frac.numerator, frac.denominator
    with mp.workdps(dps):
        g = mp.mpf(p_) / q_
        C = mp.pi * psi_mp(fading, g, spread) * mp.gamma(1 - g)
        A = -C * lam
        xm = mp.mpf(x)
        # Terms n = rho + k q for rho = 1..q-1 (n = 0 mod q vanish).
        # t(n+q) = t(n) * A^q * x^(-p) * prod(n gamma + j, j<p) / prod(n+j, 1<=j<=q)
        # with sin(pi n gamma) flipping sign by (-1)^p each stride.
        stride_mul = A ** q_ * xm ** (-p_) * (-1) ** p_
        efg = mp.e ** (spread * g) if fading == "log_uniform" else None

        streams = []
        for rho in range(1, q_):
            ng = rho * g
            t = (A ** rho / mp.factorial(rho) * mp.sinpi(ng) / mp.pi
                 * mp.gamma(ng) * psi_mp(fading, -ng, spread) * xm ** (-ng))
            streams.append([rho, t])

        total = mp.mpf(1)
        max_abs = mp.mpf(1)
        tol = mp.mpf(10) ** (-(dps - 10))
        streak = 0
        for _ in range(max_terms // max(1, q_ - 1) + 2):
            biggest = mp.mpf(0)
            for s in streams:
                n, t = s
                total += t
                mag = abs(t)
                biggest = max(biggest, mag)
                max_abs = max(max_abs, mag)
                # advance to n + q
                num = mp.mpf(1)
                for j in range(p_):
                    num *= n * g + j
                den = mp.mpf(1)
                for j in range(1, q_ + 1):
                    den *= n + j
                fac = stride_mul * num / den
                if fading == "log_uniform":
                    u_old = efg ** n
                    u_new = u_old * efg ** q_
                    fac *= ((u_new - 1 / u_new) / (u_old - 1 / u_old)
                            * mp.mpf(n) / (n + q_))
                s[1] = t * fac
                s[0] = n + q_
            if biggest < tol * max(abs(total), mp.mpf(10) ** -80):
                streak += 1
                if streak >= 3:
                    break
            else:
                streak = 0
        else:
            raise ValueError(f"no convergence within {max_terms} terms")
        if abs(total) < max_abs * mp.mpf(10) ** (-(dps - 15)):
            raise ValueError("insufficient precision for this cell")
        return float(min(1, max(0, total)))


def stable_tail_bound(x, lam, alpha, fading="none", spread=1.0):
    """Chernoff bound Pr(W < x F_sig) <= min_t exp(t y - s t^g) with
    y = x * max F_sig and s the Laplace exponent coefficient.  Sharp for
    the stable lower tail; certifies below-MC-resolution cells."""
    g = 2.0 / alpha
    if fading == "none":
        psi_g, y = 1.0, x
    elif fading == "log_uniform":
        a = spread * g
        psi_g = math.sinh(a) / a
        y = x * math.exp(spread)  # hard upper bound on the signal fade
    else:
        raise ValueError(fading)
    s = math.pi * psi_g * math.gamma(1.0 - g) * lam
    t_star = (y / (s * g)) ** (1.0 / (g - 1.0))
    return math.exp(t_star * y - s * t_star ** g)


def series_or_oracle(x, lam, alpha, fading="none", spread=1.0, dps_cap=1200):
    """Float series if it converges; else mpmath at a precision estimated
    from the peak term; else None with the certified tail bound.

    Returns (p or None, tail_bound or None).
    """
    from macgeo.aloha import _series
    from macgeo.errors import PrecisionLossError
    from macgeo.propagation import psi as psi_f

    g = 2.0 / alpha
    C = math.pi * psi_f(fading, g, spread) * math.gamma(1.0 - g)
    try:
        return _series(x, lam, g, C, 400, 1e-10, fading, spread), None
    except PrecisionLossError:
        pass
    peak, _, n_last = _peak_log_term(x, lam, alpha, fading, spread)
    # The result sits near exp(-peak) in the alternating regime, so the
    # working precision must absorb roughly twice the peak.
    dps = int(2.2 * peak / math.log(10.0)) + 30
    if dps <= dps_cap:
        for attempt in (dps, int(1.5 * dps) + 20):
            if attempt > dps_cap:
                break
            try:
                return mp_prob_w_below(x, lam, alpha, fading, spread,
                                       dps=attempt,
                                       max_terms=max(20_000, 3 * n_last)), None
            except ValueError:
                continue
    return None, stable_tail_bound(x, lam, alpha, fading, spread)
