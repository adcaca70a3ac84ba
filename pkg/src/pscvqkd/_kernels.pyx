# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled post-selection region integrals.

Same algorithm as :mod:`pscvqkd._kernels_py`; see that module for the maths.
"""

from libc.math cimport erfc, exp, sqrt, fabs, ceil, INFINITY, isinf, isfinite

import numpy as np

DEF N_OUT = 5
DEF MAX_INTERVALS = 4000
DEF TAIL_SIGMAS = 40.0

cdef double INV_SQRT_2PI = 0.398942280401432677939946059934
cdef double INV_SQRT2 = 0.707106781186547524400844362105
cdef double PI = 3.14159265358979323846264338328

cdef double[15] NODES
cdef double[15] KW
cdef double[15] GW

cdef double[8] _XGK = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
]
cdef double[8] _WGK = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
]
cdef double[4] _WG = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
]

cdef int _i
for _i in range(7):
    NODES[_i] = -_XGK[_i]
    NODES[14 - _i] = _XGK[_i]
    KW[_i] = _WGK[_i]
    KW[14 - _i] = _WGK[_i]
    GW[_i] = 0.0
    GW[14 - _i] = 0.0
NODES[7] = 0.0
KW[7] = _WGK[7]
GW[7] = _WG[3]
for _i in range(3):
    GW[2 * _i + 1] = _WG[_i]
    GW[13 - 2 * _i] = _WG[_i]


cdef inline double _phi(double z) nogil:
    return INV_SQRT_2PI * exp(-0.5 * z * z)


cdef inline void _band_moments(double alpha, double beta, double *p0,
                               double *p1, double *p2) nogil:
    cdef double lo, hi, phi_lo, phi_hi, hi_phi_hi
    cdef bint flip = (alpha + beta) < 0.0
    if flip:
        lo = -beta
        hi = -alpha
    else:
        lo = alpha
        hi = beta
    if lo > 0.0:
        p0[0] = 0.5 * (erfc(lo * INV_SQRT2) - erfc(hi * INV_SQRT2))
    else:
        p0[0] = 0.5 * (erfc(-hi * INV_SQRT2) - erfc(-lo * INV_SQRT2))
    phi_lo = _phi(lo)
    if isfinite(hi):
        phi_hi = _phi(hi)
        hi_phi_hi = hi * phi_hi
    else:
        phi_hi = 0.0
        hi_phi_hi = 0.0
    p1[0] = phi_lo - phi_hi
    p2[0] = p0[0] + lo * phi_lo - hi_phi_hi
    if flip:
        p1[0] = -p1[0]


cdef inline void _integrand(double x, double saa, double slope, double s,
                            double norm, double lb, double ub,
                            double *out) nogil:
    cdef double w, mu, q0, q1, q2, r0, r1, r2, p0, eb, ebb
    w = exp(-0.5 * x * x / saa) / norm
    mu = slope * x
    _band_moments((lb - mu) / s, (ub - mu) / s, &q0, &q1, &q2)
    _band_moments((-ub - mu) / s, (-lb - mu) / s, &r0, &r1, &r2)
    p0 = q0 + r0
    eb = mu * p0 + s * (q1 + r1)
    ebb = mu * mu * p0 + 2.0 * mu * s * (q1 + r1) + s * s * (q2 + r2)
    out[0] = w * p0
    out[1] = w * x * x * p0
    out[2] = w * ebb
    out[3] = w * x * eb
    out[4] = w * r0


cdef void _gk15(double a, double b, double saa, double slope, double s,
                double norm, double lb, double ub,
                double *k, double *e) nogil:
    cdef double half = 0.5 * (b - a)
    cdef double center = 0.5 * (a + b)
    cdef double f[N_OUT]
    cdef double g[N_OUT]
    cdef int i, j
    for j in range(N_OUT):
        k[j] = 0.0
        g[j] = 0.0
    for i in range(15):
        _integrand(center + half * NODES[i], saa, slope, s, norm, lb, ub, f)
        for j in range(N_OUT):
            k[j] += KW[i] * f[j]
            g[j] += GW[i] * f[j]
    for j in range(N_OUT):
        k[j] *= half
        e[j] = fabs(k[j] - half * g[j])


def breakpoints(double saa, double sab, double sbb, double la, double ua,
                double lb, double ub):
    """Outer integration grid; identical to the pure-Python version."""
    cdef double sa = sqrt(saa)
    cdef double slope = sab / saa
    cdef double hi, xe, lo, up, step
    cdef int n, i
    pts = [la]
    if slope != 0.0:
        for edge in (lb, ub, -lb, -ub):
            if isfinite(edge):
                xe = edge / slope
                # crossings beyond the tail cut carry no mass
                if la < xe < la + TAIL_SIGMAS * sa:
                    pts.append(xe)
    if isinf(ua):
        hi = max(pts) + TAIL_SIGMAS * sa
    else:
        hi = ua
    pts = sorted(p for p in set(pts) if la <= p < hi)
    pts.append(hi)
    out = [pts[0]]
    for lo, up in zip(pts[:-1], pts[1:]):
        n = max(1, min(8, <int>ceil((up - lo) / sa)))
        step = (up - lo) / n
        for i in range(n):
            out.append(lo + step * (i + 1))
    out[len(out) - 1] = hi
    return out


def region_integrals(double saa, double sab, double sbb, double la, double ua,
                     double lb, double ub, double rtol=1e-11):
    """Five region masses for one quadrature; see the pure-Python twin."""
    cdef double slope = sab / saa
    cdef double s = sqrt(sbb - sab * sab / saa)
    cdef double norm = sqrt(2.0 * PI * saa)
    cdef double[MAX_INTERVALS] lo_arr
    cdef double[MAX_INTERVALS] hi_arr
    cdef double[MAX_INTERVALS][N_OUT] kk
    cdef double[MAX_INTERVALS][N_OUT] ee
    cdef double[N_OUT] total
    cdef double[N_OUT] err
    cdef double[N_OUT] tol
    cdef double[N_OUT] scale
    cdef double a, b, m, ratio, worst_ratio
    cdef int n = 0, i, j, worst
    cdef bint done

    pts = breakpoints(saa, sab, sbb, la, ua, lb, ub)
    for i in range(len(pts) - 1):
        lo_arr[n] = pts[i]
        hi_arr[n] = pts[i + 1]
        _gk15(lo_arr[n], hi_arr[n], saa, slope, s, norm, lb, ub, kk[n], ee[n])
        n += 1
    scale[0] = 1.0
    scale[1] = saa
    scale[2] = sbb
    scale[3] = sqrt(saa * sbb)
    scale[4] = 1.0

    with nogil:
        while True:
            for j in range(N_OUT):
                total[j] = 0.0
                err[j] = 0.0
            for i in range(n):
                for j in range(N_OUT):
                    total[j] += kk[i][j]
                    err[j] += ee[i][j]
            if not total[0] > 0.0:
                break
            done = True
            for j in range(N_OUT):
                tol[j] = rtol * max(fabs(total[j]), 1e-6 * total[0] * scale[j])
                if err[j] > tol[j]:
                    done = False
            if done or n >= MAX_INTERVALS:
                break
            worst = 0
            worst_ratio = -1.0
            for i in range(n):
                ratio = ee[i][0] / tol[0]
                for j in range(1, N_OUT):
                    if ee[i][j] / tol[j] > ratio:
                        ratio = ee[i][j] / tol[j]
                if ratio > worst_ratio:
                    worst_ratio = ratio
                    worst = i
            a = lo_arr[worst]
            b = hi_arr[worst]
            m = 0.5 * (a + b)
            hi_arr[worst] = m
            _gk15(a, m, saa, slope, s, norm, lb, ub, kk[worst], ee[worst])
            lo_arr[n] = m
            hi_arr[n] = b
            _gk15(m, b, saa, slope, s, norm, lb, ub, kk[n], ee[n])
            n += 1

    result = np.empty(N_OUT)
    for j in range(N_OUT):
        result[j] = 2.0 * total[j]
    return result, n
