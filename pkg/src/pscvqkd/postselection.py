"""Statistics of the post-selected ensemble and the effective Gaussian protocol.

A symbol is kept when Alice's two amplitudes and Bob's two records all have
magnitudes inside their bands. The x and p pairs are independent, so the
symbol keep probability is the square of the per-quadrature one and the kept
second moments are those of a single truncated quadrature pair.

The region integrals run in a compiled kernel when it is built and fall back
to a numpy implementation otherwise; set ``PSCVQKD_PURE_PYTHON=1`` to force
the fallback.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_py
from .errors import NoCorrelationError, RegionUnderflowError, UnphysicalStateError
from .gaussian import PHYSICAL_TOL, SIGMA_Z, symplectic_eigenvalues

try:
    if os.environ.get("PSCVQKD_PURE_PYTHON") == "1":
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
QUAD_RTOL = 1e-11
UNDERFLOW = 1e-300


def kernel(backend=None):
    """Return the ``region_integrals`` function of the requested backend."""
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel is not available")
        return _compiled.region_integrals
    if backend == "python":
        return _kernels_py.region_integrals
    raise ValueError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class PostSelectionRegion:
    """Magnitude bands ``L <= |value| <= U`` for Alice (A) and Bob (B).

    Alice's thresholds are in amplitude units, Bob's in raw heterodyne-record
    units. Upper thresholds may be ``math.inf``.
    """

    L_A: float = 0.0
    U_A: float = math.inf
    L_B: float = 0.0
    U_B: float = math.inf

    def __post_init__(self):
        for lo, hi, who in ((self.L_A, self.U_A, "Alice"), (self.L_B, self.U_B, "Bob")):
            if not (0.0 <= lo < hi) or math.isnan(hi):
                raise ValueError(f"{who}'s thresholds need 0 <= L < U, got L={lo}, U={hi}")

    @property
    def is_trivial(self):
        return (self.L_A == 0.0 and self.L_B == 0.0
                and math.isinf(self.U_A) and math.isinf(self.U_B))


@dataclass(frozen=True)
class PostSelectedStats:
    p_keep_quad: float
    P_ps: float
    V_a: float
    V_b: float
    C: float
    p_e: float


@dataclass(frozen=True)
class EffectiveParams:
    V_alpha: float
    eta: float
    delta: float

    @property
    def superunital(self):
        """True when the extraction produced an effective gain ``eta > 1``."""
        return self.eta > 1.0


def _masses(sigma, region, backend=None):
    m, _ = kernel(backend)(sigma.var_a, sigma.cov, sigma.var_b,
                           region.L_A, region.U_A, region.L_B, region.U_B, QUAD_RTOL)
    if not m[0] >= UNDERFLOW:
        raise RegionUnderflowError(
            f"post-selection region probability {m[0]:.3g} below {UNDERFLOW:g}")
    return m


def orthant_error(rho):
    """P(sign a != sign b) for a centred bivariate normal with correlation rho."""
    return 0.5 - math.asin(rho) / math.pi


def postselected_stats(sigma, region, backend=None):
    """All kept-ensemble statistics from a single pass of the region integrals."""
    if region.is_trivial:
        return PostSelectedStats(1.0, 1.0, sigma.var_a, sigma.var_b, sigma.cov,
                                 orthant_error(sigma.rho))
    m = _masses(sigma, region, backend)
    p = float(m[0])
    p_e = min(max(float(m[4]) / p, 0.0), 1.0)
    return PostSelectedStats(p, p * p, float(m[1]) / p, float(m[2]) / p,
                             float(m[3]) / p, p_e)


def keep_probability(sigma, region, backend=None):
    """Per-quadrature probability that both magnitudes fall in their bands."""
    return postselected_stats(sigma, region, backend).p_keep_quad


def truncated_moments(sigma, region, backend=None):
    """Kept second moments ``(V_a, V_b, C)`` about zero."""
    s = postselected_stats(sigma, region, backend)
    return s.V_a, s.V_b, s.C


def sign_error_probability(sigma, region, backend=None):
    """Probability that the signs of amplitude and record differ, given kept."""
    return postselected_stats(sigma, region, backend).p_e


def effective_params(V_a, V_b, C):
    """Parameters of the untruncated Gaussian protocol with the same record moments.

    Inverts ``V_a = V_alpha``, ``C = sqrt(eta / 2) V_alpha`` and
    ``V_b = (eta V_alpha + eta delta) / 2 + 1``. ``eta > 1`` is kept as is and
    reported through :attr:`EffectiveParams.superunital`.
    """
    if not (V_a > 0.0 and V_b > 0.0):
        raise ValueError(f"kept variances must be positive, got V_a={V_a}, V_b={V_b}")
    if not abs(C) > 1e-12 * math.sqrt(V_a * V_b):
        raise NoCorrelationError(f"kept covariance {C:.3g} carries no correlation")
    v_alpha = V_a
    eta = 2.0 * C * C / (v_alpha * v_alpha)
    delta = (2.0 * V_b - 2.0 - eta * v_alpha) / eta
    return EffectiveParams(v_alpha, eta, delta)


def effective_record_moments(e):
    """Record moments ``(V_a, V_b, C)`` an untruncated protocol with ``e`` produces."""
    return (e.V_alpha,
            (e.eta * e.V_alpha + e.eta * e.delta) / 2.0 + 1.0,
            math.sqrt(e.eta / 2.0) * e.V_alpha)


def noise_floor(eta):
    """Smallest ``delta`` for which :func:`build_gamma_ab` is physical at gain ``eta``.

    Zero for an attenuating channel; ``2 (eta - 1) / eta`` for an amplifying
    one (the quantum-limited amplifier). On the floor the smaller symplectic
    eigenvalue is exactly 1.
    """
    return max(0.0, 2.0 * (eta - 1.0) / eta)


def build_gamma_ab(e):
    """Standard-form two-mode covariance matrix of the effective protocol."""
    va = e.V_alpha
    a = 1.0 + va
    b = e.eta * va + e.eta * e.delta + 1.0
    c = math.sqrt(e.eta * (va * va + 2.0 * va))
    gamma = np.zeros((4, 4))
    gamma[:2, :2] = a * np.eye(2)
    gamma[2:, 2:] = b * np.eye(2)
    gamma[:2, 2:] = c * SIGMA_Z
    gamma[2:, :2] = c * SIGMA_Z
    try:
        nu_min = float(symplectic_eigenvalues(gamma)[-1])
    except UnphysicalStateError as exc:
        nu_min = exc.value
    if nu_min < 1.0 - PHYSICAL_TOL:
        raise UnphysicalStateError(
            f"unphysical effective state (V_alpha={va:.6g}, eta={e.eta:.6g}, "
            f"delta={e.delta:.6g}): symplectic eigenvalue {nu_min:.12g}",
            value=nu_min, params=e)
    return gamma
