"""Pure-Python (numpy) implementation of the post-selection region integrals.

This mirrors ``_kernels.pyx`` line for line so that both backends produce the
same numbers to rounding; it is used when the compiled extension is missing.

For one quadrature, ``(a, b)`` is bivariate normal with covariance
``[[saa, sab], [sab, sbb]]``. The kept region is ``L_A <= |a| <= U_A`` and
``L_B <= |b| <= U_B``. The integral over ``b`` is done in closed form
(truncated normal moments), the integral over ``a`` by adaptive
Gauss-Kronrod (7/15) quadrature.
"""

import math

import numpy as np
from scipy.special import erfc

# Gauss-Kronrod 7/15 nodes and weights on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5, 7 from each end)
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]

# Beyond this many standard deviations past the last feature the Gaussian
# weight is below exp(-800) relative to the bulk and underflows to zero.
TAIL_SIGMAS = 40.0
MAX_INTERVALS = 4000
N_OUT = 5

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _phi(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def _band_moments(alpha, beta):
    """Integrals of z**k * phi(z) over [alpha, beta] for k = 0, 1, 2.

    Works elementwise; ``beta`` may be +inf. Intervals lying in the lower tail
    are reflected so that differences are always taken between upper-tail
    values, which keeps the k = 0 term free of cancellation.
    """
    flip = (alpha + beta) < 0.0
    lo = np.where(flip, -beta, alpha)
    hi = np.where(flip, -alpha, beta)
    # upper tail: Q(lo) - Q(hi), Q(z) = erfc(z / sqrt 2) / 2
    p0 = np.where(lo > 0.0,
                  0.5 * (erfc(lo * _INV_SQRT2) - erfc(hi * _INV_SQRT2)),
                  0.5 * (erfc(-hi * _INV_SQRT2) - erfc(-lo * _INV_SQRT2)))
    phi_lo = _phi(lo)
    finite_hi = np.isfinite(hi)
    phi_hi = np.where(finite_hi, _phi(np.where(finite_hi, hi, 0.0)), 0.0)
    hi_phi_hi = np.where(finite_hi, np.where(finite_hi, hi, 0.0) * phi_hi, 0.0)
    p1 = phi_lo - phi_hi
    p2 = p0 + lo * phi_lo - hi_phi_hi
    p1 = np.where(flip, -p1, p1)
    return p0, p1, p2


def _integrand(x, saa, sab, sbb, lb, ub):
    """Vector integrand at outer points ``x``; returns array of shape (5, n).

    Rows: mass, a*a mass, b*b mass, a*b mass, sign-error mass (b < 0 given a > 0).
    """
    slope = sab / saa
    s = math.sqrt(sbb - sab * sab / saa)
    w = np.exp(-0.5 * x * x / saa) / math.sqrt(2.0 * math.pi * saa)
    mu = slope * x
    out = np.empty((N_OUT, x.size))
    # b in [lb, ub]
    q0, q1, q2 = _band_moments((lb - mu) / s, (ub - mu) / s)
    # b in [-ub, -lb]
    r0, r1, r2 = _band_moments((-ub - mu) / s, (-lb - mu) / s)
    p0 = q0 + r0
    eb = mu * p0 + s * (q1 + r1)
    ebb = mu * mu * p0 + 2.0 * mu * s * (q1 + r1) + s * s * (q2 + r2)
    out[0] = w * p0
    out[1] = w * x * x * p0
    out[2] = w * ebb
    out[3] = w * x * eb
    out[4] = w * r0
    return out


def _gk15(a, b, saa, sab, sbb, lb, ub):
    half = 0.5 * (b - a)
    center = 0.5 * (a + b)
    f = _integrand(center + half * NODES, saa, sab, sbb, lb, ub)
    k = half * (f @ KRONROD_WEIGHTS)
    g = half * (f @ GAUSS_WEIGHTS)
    return k, np.abs(k - g)


def breakpoints(saa, sab, sbb, la, ua, lb, ub):
    """Outer integration interval split at the places where the inner band
    edges cross the conditional mean of ``b``, which is where the integrand
    changes fastest when the correlation is strong."""
    sa = math.sqrt(saa)
    slope = sab / saa
    pts = [la]
    if slope != 0.0:
        for edge in (lb, ub, -lb, -ub):
            if math.isfinite(edge):
                xe = edge / slope
                # crossings beyond the tail cut carry no mass
                if la < xe < la + TAIL_SIGMAS * sa:
                    pts.append(xe)
    if math.isinf(ua):
        hi = max(pts) + TAIL_SIGMAS * sa
    else:
        hi = ua
    pts = sorted(p for p in set(pts) if la <= p < hi)
    pts.append(hi)
    # a few extra cuts per standard deviation near the bulk
    out = [pts[0]]
    for lo, up in zip(pts[:-1], pts[1:]):
        n = max(1, min(8, int(math.ceil((up - lo) / sa))))
        step = (up - lo) / n
        out.extend(lo + step * (i + 1) for i in range(n))
    out[-1] = hi
    return out


def region_integrals(saa, sab, sbb, la, ua, lb, ub, rtol=1e-11):
    """Return the five region masses for one quadrature.

    The masses are integrals of the bivariate density over the whole kept
    region (both signs of ``a``), so ``result[0]`` is the keep probability and
    ``result[k] / result[0]`` are the conditional moments.

    Returns (masses, n_intervals) where masses is a float array of length 5.
    """
    pts = breakpoints(saa, sab, sbb, la, ua, lb, ub)
    intervals = []
    for a, b in zip(pts[:-1], pts[1:]):
        k, e = _gk15(a, b, saa, sab, sbb, lb, ub)
        intervals.append([a, b, k, e])
    scale = np.array([1.0, saa, sbb, math.sqrt(saa * sbb), 1.0])
    while True:
        total = np.zeros(N_OUT)
        err = np.zeros(N_OUT)
        for iv in intervals:
            total += iv[2]
            err += iv[3]
        if not total[0] > 0.0:
            break
        tol = rtol * np.maximum(np.abs(total), 1e-6 * total[0] * scale)
        if np.all(err <= tol) or len(intervals) >= MAX_INTERVALS:
            break
        # bisect the interval with the worst error relative to tolerance
        worst = int(np.argmax([np.max(iv[3] / tol) for iv in intervals]))
        a, b = intervals[worst][0], intervals[worst][1]
        m = 0.5 * (a + b)
        k, e = _gk15(a, m, saa, sab, sbb, lb, ub)
        intervals[worst] = [a, m, k, e]
        k, e = _gk15(m, b, saa, sab, sbb, lb, ub)
        intervals.append([m, b, k, e])
    return 2.0 * total, len(intervals)
