import math

import numpy as np
import pytest

from pscvqkd.channel import ChannelParams, ProtocolParams, record_covariance
from pscvqkd.montecarlo import (McConfig, McReport, batch_rng, keep_mask, sample_records,
                                simulate_pm, symmetrise, verify)
from pscvqkd.postselection import PostSelectionRegion, postselected_stats

INF = math.inf
P = ProtocolParams(4.0)
CH = ChannelParams(0.5, 0.01)


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(sample_count=0)
    with pytest.raises(ValueError):
        McConfig(batch_size=0)
    with pytest.raises(ValueError):
        McConfig(seed=-1)


def test_unconditioned_records_match_closed_form():
    rec = sample_records(P, CH, 400_000, batch_rng(5, 0))
    cov = np.cov(rec.T, bias=True)
    s = record_covariance(P, CH)
    # 4 sigma on a sample variance of n points is roughly 4 * sqrt(2/n) relative
    assert cov[0, 0] == pytest.approx(s.var_a, rel=0.01)
    assert cov[2, 2] == pytest.approx(s.var_b, rel=0.01)
    assert cov[0, 2] == pytest.approx(s.cov, rel=0.02)
    assert cov[1, 3] == pytest.approx(s.cov, rel=0.02)
    assert abs(cov[0, 3]) < 0.02 and abs(cov[0, 1]) < 0.03


def test_no_postselection_statistics():
    m = simulate_pm(P, CH, PostSelectionRegion(), McConfig(sample_count=200_000, seed=1))
    assert m.n_kept == m.n_samples
    assert m.estimates["P_ps"] == 1.0
    v = verify(postselected_stats(record_covariance(P, CH), PostSelectionRegion()), m)
    assert v.passed, v.lines()


def test_vanishing_transmission_decorrelates():
    m = simulate_pm(P, ChannelParams(1e-9), PostSelectionRegion(),
                    McConfig(sample_count=200_000, seed=2))
    assert abs(m.estimates["C"]) < 4 * m.std_errors["C"]
    assert m.estimates["p_e"] == pytest.approx(0.5, abs=4 * m.std_errors["p_e"])


def test_deterministic_and_schedule_independent():
    r = PostSelectionRegion(1.0, INF, 0.8, INF)
    a = simulate_pm(P, CH, r, McConfig(sample_count=100_000, seed=9, batch_size=30_000))
    b = simulate_pm(P, CH, r, McConfig(sample_count=100_000, seed=9, batch_size=30_000, jobs=4))
    assert a == b
    c = simulate_pm(P, CH, r, McConfig(sample_count=100_000, seed=10, batch_size=30_000))
    assert c.estimates != a.estimates


def test_standard_error_scaling():
    r = PostSelectionRegion(1.0, INF, 0.8, INF)
    small = simulate_pm(P, CH, r, McConfig(sample_count=250_000, seed=3))
    large = simulate_pm(P, CH, r, McConfig(sample_count=1_000_000, seed=3))
    for name in ("V_a", "V_b", "C", "p_e", "P_ps"):
        assert 1.8 <= small.std_errors[name] / large.std_errors[name] <= 2.2


def test_symmetrise_identity_at_zero_angle():
    rec = sample_records(P, CH, 1000, batch_rng(0, 0))
    assert np.array_equal(symmetrise(rec, angles=np.zeros(len(rec))), rec)


def test_symmetrise_preserves_norms_and_inner_products():
    rec = sample_records(P, CH, 1000, batch_rng(0, 1))
    out = symmetrise(rec, seed=4)
    for i in (0, 2):
        assert np.allclose(np.hypot(out[:, i], out[:, i + 1]), np.hypot(rec[:, i], rec[:, i + 1]))
    dot = lambda r: r[:, 0] * r[:, 2] + r[:, 1] * r[:, 3]
    assert np.allclose(dot(out), dot(rec))


def test_symmetrise_rejects_bad_shape():
    with pytest.raises(ValueError):
        symmetrise(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        symmetrise(np.zeros((0, 4)))


def test_symmetrised_ensemble_is_isotropic():
    # rotating a circularly symmetric source before selection changes nothing
    # in distribution: keep rate and kept moments agree, x-p covariance vanishes
    r = PostSelectionRegion(1.0, INF, 0.8, INF)
    plain = simulate_pm(P, CH, r, McConfig(sample_count=400_000, seed=6))
    sym = simulate_pm(P, CH, r, McConfig(sample_count=400_000, seed=6, symmetrise=True))
    for name in ("P_ps", "V_a", "V_b", "C", "p_e"):
        diff = sym.estimates[name] - plain.estimates[name]
        assert abs(diff) < 3 * math.hypot(sym.std_errors[name], plain.std_errors[name]), name
    assert abs(sym.estimates["xp"]) < 3 * sym.std_errors["xp"]


def test_keep_mask_symbol_rule():
    rec = np.array([[2.0, 2.0, 1.0, 1.0],
                    [2.0, 0.1, 1.0, 1.0],
                    [2.0, -2.0, -1.0, 1.0],
                    [2.0, 2.0, 1.0, 0.2]])
    assert keep_mask(rec, PostSelectionRegion(1.0, 3.0, 0.5, INF)).tolist() == [
        True, False, True, False]


def test_verify_detects_perturbation():
    r = PostSelectionRegion(1.0, INF, 0.8, INF)
    analytic = postselected_stats(record_covariance(P, CH), r)
    m = simulate_pm(P, CH, r, McConfig(sample_count=1_000_000, seed=11))
    assert verify(analytic, m).passed
    shifted = type(analytic)(**{**analytic.__dict__,
                                "V_a": analytic.V_a + 10 * m.std_errors["V_a"]})
    v = verify(shifted, m)
    assert not v.passed and abs(v.z_scores["V_a"]) > 4
    assert any("FAIL" in line for line in v.lines())


def test_no_data():
    r = PostSelectionRegion(30.0, INF)
    m = simulate_pm(P, CH, r, McConfig(sample_count=10_000, seed=0))
    assert m.n_kept == 0 and m.status.startswith("no data")
    assert math.isnan(m.estimates["V_a"])
    analytic = postselected_stats(record_covariance(P, CH), PostSelectionRegion(1.0, INF))
    v = verify(analytic, m)
    assert not v.passed and v.status == "no data"
    assert isinstance(m, McReport)
