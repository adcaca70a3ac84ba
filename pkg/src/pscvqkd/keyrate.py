"""Secret-key rate of the post-selected protocol under direct reconciliation."""

import math
from dataclasses import dataclass

from .channel import record_covariance
from .gaussian import (conditional_cm_heterodyne, symplectic_eigenvalues,
                       von_neumann_entropy)
from .postselection import (EffectiveParams, build_gamma_ab, effective_params,
                            postselected_stats)

HOLEVO_TOL = 1e-9


@dataclass(frozen=True)
class KeyRateReport:
    """Everything that went into one key-rate evaluation.

    ``I_ab_bits`` is the reconciled classical information per kept symbol
    (``beta`` times two sign-encoded quadratures) and ``chi_ea_bits`` the
    Holevo bound per kept symbol. ``key_rate`` is per channel use, i.e. already
    multiplied by the symbol success probability, and may be negative.
    """

    P_ps: float
    p_keep_quad: float
    p_e: float
    I_quad: float
    I_ab_bits: float
    chi_ea_bits: float
    key_rate: float
    effective: EffectiveParams
    physicality_margin: float
    V_a: float
    V_b: float
    C: float

    @property
    def key_rate_clamped(self):
        return max(self.key_rate, 0.0)

    def per_quadrature_normalisation(self):
        """Key rate with classical and quantum terms both charged per quadrature.

        Under the symbol-level AND rule this equals :attr:`key_rate`; it is
        provided for callers that normalise by ``p_keep_quad`` instead.
        """
        per_quad = self.I_ab_bits / 2.0 - self.chi_ea_bits / 2.0
        return 2.0 * self.p_keep_quad * self.p_keep_quad * per_quad


def _xlog2x(p):
    return p * math.log2(p) if p > 0.0 else 0.0


def mutual_information_sign(p_e):
    """Bits per quadrature shared through sign encoding with error rate ``p_e``."""
    if not 0.0 <= p_e <= 0.5:
        raise ValueError(f"sign error probability must lie in [0, 0.5], got {p_e}")
    return 1.0 + _xlog2x(p_e) + _xlog2x(1.0 - p_e)


def holevo_dr(gamma_ab):
    """Eve's Holevo information on Alice's heterodyne data, ``S(AB) - S(B|a)``."""
    chi = von_neumann_entropy(gamma_ab) - von_neumann_entropy(
        conditional_cm_heterodyne(gamma_ab, 0))
    if chi < 0.0:
        if chi < -HOLEVO_TOL:
            raise ArithmeticError(f"negative Holevo information {chi:.3g}")
        chi = 0.0
    return chi


def keyrate(p, ch, region, backend=None):
    """Evaluate the asymptotic key rate for one set of protocol parameters.

    Pipeline: record covariance, kept-ensemble statistics, effective Gaussian
    protocol, Holevo bound. For ``T = 1`` Eve holds no modes and the Holevo
    term is identically zero.
    """
    sigma = record_covariance(p, ch)
    stats = postselected_stats(sigma, region, backend)
    eff = effective_params(stats.V_a, stats.V_b, stats.C)
    gamma = build_gamma_ab(eff)
    margin = float(symplectic_eigenvalues(gamma)[-1]) - 1.0
    chi = 0.0 if ch.eve_absent else holevo_dr(gamma)
    i_quad = mutual_information_sign(min(stats.p_e, 0.5))
    i_ab = p.beta * 2.0 * i_quad
    return KeyRateReport(
        P_ps=stats.P_ps,
        p_keep_quad=stats.p_keep_quad,
        p_e=stats.p_e,
        I_quad=i_quad,
        I_ab_bits=i_ab,
        chi_ea_bits=chi,
        key_rate=stats.P_ps * (i_ab - chi),
        effective=eff,
        physicality_margin=margin,
        V_a=stats.V_a,
        V_b=stats.V_b,
        C=stats.C,
    )
