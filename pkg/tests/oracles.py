"""High-precision reference computations, independent of the package's numerics."""

import mpmath as mp

DPS = 60


def mp_svi_variance(p, y):
    d = mp.mpf(y) - mp.mpf(p.m)
    return mp.mpf(p.a) + mp.mpf(p.b) * (mp.mpf(p.rho) * d + mp.sqrt(d * d + mp.mpf(p.s) ** 2))


def mp_otm_price(forward, strike, vol, maturity):
    """Undiscounted Black OTM price: call for K >= F, put below."""
    f, k = mp.mpf(forward), mp.mpf(strike)
    sd = mp.mpf(vol) * mp.sqrt(maturity)
    d1 = mp.log(f / k) / sd + sd / 2
    d2 = d1 - sd
    if k >= f:
        return f * mp.ncdf(d1) - k * mp.ncdf(d2)
    return k * mp.ncdf(-d2) - f * mp.ncdf(-d1)


def density_sign(p, maturity, y, rel_step=mp.mpf("1e-12")):
    """Sign of d2C/dK2 along an SVI smile by a central second difference in strike (F = 1).

    The OTM leg has the same second strike derivative as the call, by parity.
    """
    with mp.workdps(DPS):
        k = mp.exp(mp.mpf(y))
        h = k * rel_step

        def price(kk):
            v = mp_svi_variance(p, mp.log(kk))
            return mp_otm_price(1, kk, mp.sqrt(v), maturity)

        # the OTM leg switches from put to call at K = F; stay on one side
        if k - h < 1 <= k + h:
            return None
        second = price(k + h) - 2 * price(k) + price(k - h)
        return int(mp.sign(second))


def mp_central_diff(fn, y, order, h=mp.mpf("1e-15")):
    with mp.workdps(DPS):
        y = mp.mpf(y)
        if order == 1:
            return (fn(y + h) - fn(y - h)) / (2 * h)
        return (fn(y + h) - 2 * fn(y) + fn(y - h)) / (h * h)


def bisect_increasing(fn, target, lo, hi, iterations=200):
    with mp.workdps(DPS):
        lo, hi = mp.mpf(lo), mp.mpf(hi)
        for _ in range(iterations):
            mid = (lo + hi) / 2
            if fn(mid) < target:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2
