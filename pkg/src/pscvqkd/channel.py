"""Gaussian modulation, the entangling-cloner channel and the record statistics.

All variances are in shot-noise units. ``xi`` is the excess noise referred to
the channel output, so a coherent state of variance 1 leaves the channel with
variance ``1 + xi``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoClonerError
from .gaussian import (apply_symplectic, direct_sum, epr_cm, symplectic_beamsplitter,
                       vacuum_cm)

# mode layout of the six-mode entanglement-based state
A1, A2, E1, E2, B1, B2 = range(6)
MODE_NAMES = ("A1", "A2", "E1", "E2", "B1", "B2")


@dataclass(frozen=True)
class ChannelParams:
    T: float
    xi: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.T <= 1.0:
            raise ValueError(f"transmission must lie in (0, 1], got {self.T}")
        if not self.xi >= 0.0:
            raise ValueError(f"excess noise must be >= 0, got {self.xi}")
        if self.T == 1.0 and self.xi != 0.0:
            raise ValueError("a lossless channel (T=1) cannot add excess noise")

    @property
    def eve_absent(self):
        return self.T == 1.0


@dataclass(frozen=True)
class ProtocolParams:
    V_A: float
    beta: float = 1.0

    def __post_init__(self):
        if not self.V_A > 0.0:
            raise ValueError(f"modulation variance must be > 0, got {self.V_A}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"reconciliation efficiency must lie in [0, 1], got {self.beta}")


@dataclass(frozen=True)
class RecordCovariance:
    """Per-quadrature covariance of (Alice amplitude, Bob heterodyne record)."""

    var_a: float
    cov: float
    var_b: float

    def __post_init__(self):
        if not (self.var_a > 0.0 and self.var_b > 0.0):
            raise ValueError("record variances must be positive")
        if not self.cov * self.cov < self.var_a * self.var_b:
            raise ValueError("record covariance is not positive definite")

    @property
    def rho(self):
        return self.cov / math.sqrt(self.var_a * self.var_b)

    def as_matrix(self):
        return np.array([[self.var_a, self.cov], [self.cov, self.var_b]])


def cloner_arm_variance(ch):
    """Variance W of the EPR arm Eve injects: ``(1 - T) W = 1 - T + xi``."""
    if ch.eve_absent:
        raise NoClonerError("no entangling cloner at T = 1")
    return (1.0 - ch.T + ch.xi) / (1.0 - ch.T)


def cloner_variance(ch):
    """Squeezing parameter ``V_E = exp(arccosh(W))`` of Eve's EPR source."""
    w = cloner_arm_variance(ch)
    return w + math.sqrt(w * w - 1.0)


def source_squeezing(p):
    """Squeezing parameter ``V_S = exp(arccosh(V_A + 1))`` of Alice's EPR source."""
    v = p.V_A + 1.0
    return v + math.sqrt(v * v - 1.0)


def amplitude_scale(p):
    """Factor mapping Alice's heterodyne record onto her prepared amplitude.

    With arm variance ``V = V_A + 1`` Alice's record has variance ``(V + 1)/2``;
    the coherent amplitude she remotely prepares is ``kappa`` times that record.
    """
    return math.sqrt(2.0) * math.sqrt(p.V_A / (p.V_A + 2.0))


def full_eb_cm(p, ch, stations=True):
    """Covariance matrix of the six modes A1, A2, E1, E2, B1, B2 before detection.

    Alice's EPR (arm variance ``V_A + 1``) occupies modes A1 and B1, Eve's EPR
    (arm variance W) modes E1 and E2, and A2, B2 start as vacuum ancillae. The
    cloner mixes B1 with E1; Alice and Bob then each split their mode with the
    local ancilla on a 50:50 beamsplitter. For ``T = 1`` Eve's modes stay in
    vacuum and are never touched.

    With ``stations=False`` the heterodyne beamsplitters are left out, so A1
    and B1 hold Alice's kept arm and the channel output respectively.
    """
    w = 1.0 if ch.eve_absent else cloner_arm_variance(ch)
    alice = epr_cm(p.V_A + 1.0)
    eve = epr_cm(w)
    # product state in the order (A, B, anc_A, E1, E2, anc_B), then permuted
    # to the named layout (A1, A2, E1, E2, B1, B2)
    gamma = direct_sum(alice, vacuum_cm(1), eve, vacuum_cm(1))
    order = [0, 2, 3, 4, 1, 5]
    idx = np.ravel([[2 * m, 2 * m + 1] for m in order])
    gamma = gamma[np.ix_(idx, idx)]
    if not ch.eve_absent:
        gamma = apply_symplectic(symplectic_beamsplitter(ch.T, B1, E1, 6), gamma)
    if not stations:
        return gamma
    gamma = apply_symplectic(symplectic_beamsplitter(0.5, A1, A2, 6), gamma)
    gamma = apply_symplectic(symplectic_beamsplitter(0.5, B1, B2, 6), gamma)
    return gamma


def record_covariance(p, ch):
    """Closed-form covariance of one quadrature pair (amplitude, Bob's record).

    Bob's raw heterodyne record has mean ``sqrt(T/2)`` times Alice's amplitude.
    """
    va = p.V_A
    return RecordCovariance(
        var_a=va,
        cov=math.sqrt(ch.T / 2.0) * va,
        var_b=ch.T * va / 2.0 + 1.0 + ch.xi / 2.0,
    )


def record_transform(p):
    """Linear map from the 12 quadratures of :func:`full_eb_cm` to the records.

    Rows are ``(x_amp, p_amp, b_x, b_p)``. Alice's amplitude is ``kappa`` times
    her record (x on A1, p on A2). On Bob's side the p-port of the
    heterodyne beamsplitter carries the signal with a minus sign, which the
    record convention removes.
    """
    kappa = amplitude_scale(p)
    m = np.zeros((4, 12))
    m[0, 2 * A1] = kappa
    m[1, 2 * A2 + 1] = kappa
    m[2, 2 * B1] = 1.0
    m[3, 2 * B2 + 1] = -1.0
    return m


def records_from_state(p, gamma):
    """Covariance of ``(x_amp, p_amp, b_x, b_p)`` implied by the 6-mode state."""
    m = record_transform(p)
    return m @ gamma @ m.T
