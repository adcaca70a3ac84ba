import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pscvqkd.channel import ChannelParams, ProtocolParams, full_eb_cm
from pscvqkd.errors import UnphysicalStateError
from pscvqkd.gaussian import von_neumann_entropy
from pscvqkd.keyrate import holevo_dr, keyrate, mutual_information_sign
from pscvqkd.postselection import EffectiveParams, PostSelectionRegion, build_gamma_ab

INF = math.inf
TRIVIAL = PostSelectionRegion()


@pytest.mark.parametrize("p_e,expected", [
    (0.0, 1.0),
    (0.5, 0.0),
    (0.25, 0.18872187554086717),
    (0.1, 1 + 0.1 * math.log2(0.1) + 0.9 * math.log2(0.9)),
])
def test_sign_information(p_e, expected):
    assert mutual_information_sign(p_e) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("p_e", [-0.01, 0.51, math.nan])
def test_sign_information_rejects(p_e):
    with pytest.raises(ValueError):
        mutual_information_sign(p_e)


def test_holevo_vanishes_for_pure_state():
    assert holevo_dr(build_gamma_ab(EffectiveParams(5.0, 1.0, 0.0))) == pytest.approx(0, abs=1e-7)


def test_holevo_positive_for_lossy_state():
    assert holevo_dr(build_gamma_ab(EffectiveParams(5.0, 0.5, 0.0))) > 0.1


def _holevo_from_eve(p, ch):
    """S(E) - S(E|a) from the purified six-mode state."""
    g = full_eb_cm(p, ch, stations=False)
    a = g[0:2, 0:2]
    e = g[4:8, 4:8]
    c = g[4:8, 0:2]
    e_given_a = e - c @ np.linalg.solve(a + np.eye(2), c.T)
    return von_neumann_entropy(e) - von_neumann_entropy(0.5 * (e_given_a + e_given_a.T))


@pytest.mark.parametrize("va", [1.0, 4.0, 20.0])
@pytest.mark.parametrize("T", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("xi", [0.0, 0.02])
def test_holevo_matches_eve_side(va, T, xi):
    p, ch = ProtocolParams(va), ChannelParams(T, xi)
    r = keyrate(p, ch, TRIVIAL)
    assert r.chi_ea_bits == pytest.approx(_holevo_from_eve(p, ch), abs=1e-8)


def test_lossless_has_no_eavesdropper():
    r = keyrate(ProtocolParams(4.0), ChannelParams(1.0), TRIVIAL)
    assert r.chi_ea_bits == 0.0
    assert r.key_rate == pytest.approx(2 * mutual_information_sign(r.p_e))
    assert r.key_rate == pytest.approx(0.572642077207, rel=1e-11)


@pytest.mark.parametrize("va", [0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
def test_no_postselection_fails_beyond_3db(va):
    assert keyrate(ProtocolParams(va), ChannelParams(0.25), TRIVIAL).key_rate < 0


def test_alice_cut_preserves_channel():
    # conditioning on a alone leaves the regression of b on a intact
    r = keyrate(ProtocolParams(4.0), ChannelParams(0.25, 0.01),
                PostSelectionRegion(1.5, 4.0))
    assert r.effective.eta == pytest.approx(0.25, rel=1e-10)
    assert r.effective.delta == pytest.approx(0.04, rel=1e-8)
    assert r.effective.V_alpha > 4.0


def test_beta_scales_classical_term():
    ch = ChannelParams(0.6, 0.01)
    full = keyrate(ProtocolParams(3.0, 1.0), ch, TRIVIAL)
    part = keyrate(ProtocolParams(3.0, 0.9), ch, TRIVIAL)
    assert part.I_ab_bits == pytest.approx(0.9 * full.I_ab_bits)
    assert part.chi_ea_bits == full.chi_ea_bits


def test_report_consistency():
    r = keyrate(ProtocolParams(4.0), ChannelParams(0.7, 0.01), PostSelectionRegion(0.5, INF))
    assert r.P_ps == pytest.approx(r.p_keep_quad ** 2)
    assert r.key_rate == pytest.approx(r.P_ps * (r.I_ab_bits - r.chi_ea_bits))
    assert r.per_quadrature_normalisation() == pytest.approx(r.key_rate, rel=1e-14)
    assert r.key_rate_clamped == max(r.key_rate, 0.0)
    assert r.physicality_margin >= -1e-9


def test_unphysical_region_raises():
    with pytest.raises(UnphysicalStateError):
        keyrate(ProtocolParams(4.0), ChannelParams(0.5, 0.01), PostSelectionRegion(4.0, INF, 1.6, INF))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.3, 10), st.floats(0.05, 0.95), st.floats(0, 2.5), st.floats(0, 2.5),
       st.floats(0, 0.05), st.floats(0.001, 0.05))
def test_monotone_in_noise(va, T, la_sd, lb_sd, xi, dxi):
    p = ProtocolParams(va)
    region = PostSelectionRegion(la_sd * math.sqrt(va), INF,
                                 lb_sd * math.sqrt(T * va / 2 + 1), INF)
    try:
        lo = keyrate(p, ChannelParams(T, xi), region)
        hi = keyrate(p, ChannelParams(T, xi + dxi), region)
    except (UnphysicalStateError, ArithmeticError):
        assume(False)
    assert lo.chi_ea_bits >= 0 and hi.chi_ea_bits >= 0
    assert hi.key_rate <= lo.key_rate + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 10), st.floats(0.05, 0.95), st.floats(0, 0.1))
def test_no_postselection_rate_is_finite(va, T, xi):
    r = keyrate(ProtocolParams(va), ChannelParams(T, xi), TRIVIAL)
    assert math.isfinite(r.key_rate)
    assert r.effective.eta == pytest.approx(T)
    assert r.physicality_margin >= -1e-9
